//! Sign-function identities and the coefficient tensors of the inequalities
//! they generate.
//!
//! For ±1 outcomes the expression
//!
//! ```text
//! Σ_{k,l=1,2} S(k,l) (P_1 + (-1)^k P_2) (Q_1 + (-1)^l Q_2)
//! ```
//!
//! takes the value ±4 whenever `P_1, P_2, Q_1, Q_2 = ±1`. Nesting it, with
//! `P_1, P_2` replaced by two copies of the expression for one party fewer on
//! disjoint setting blocks and `Q_1, Q_2` the two settings of a new party,
//! gives identities whose value is ±4^{N-1} for every deterministic strategy
//! over the setting profile `(2^{N-1}, 2^{N-1}, 2^{N-2}, ..., 2)`. Expanding an
//! identity in the correlators `E_{i_1...i_N}` gives a Bell inequality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::{classical_bound, DeterministicStrategy};

/// A map `{1,2}² → ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignFunction {
    values: [[i8; 2]; 2],
}

impl SignFunction {
    /// `values[k-1][l-1] = S(k, l)`.
    pub fn new(values: [[i8; 2]; 2]) -> Result<Self> {
        if values.iter().flatten().any(|&v| v != 1 && v != -1) {
            return Err(invalid(format!("sign function entries must be ±1, got {values:?}")));
        }
        Ok(SignFunction { values })
    }

    /// Bit `2(k-1) + (l-1)` of `index` set means `S(k,l) = -1`.
    pub fn from_index(index: u8) -> Result<Self> {
        if index >= 16 {
            return Err(invalid(format!("sign function index {index} is outside 0..16")));
        }
        let bit = |b: u8| if index >> b & 1 == 1 { -1 } else { 1 };
        Ok(SignFunction { values: [[bit(0), bit(1)], [bit(2), bit(3)]] })
    }

    pub fn index(&self) -> u8 {
        let mut idx = 0;
        for k in 0..2 {
            for l in 0..2 {
                if self.values[k][l] < 0 {
                    idx |= 1 << (2 * k + l);
                }
            }
        }
        idx
    }

    /// All 16 sign functions in index order.
    pub fn all() -> impl Iterator<Item = SignFunction> {
        (0..16).map(|i| SignFunction::from_index(i).expect("index < 16"))
    }

    /// The non-factorable function used by the generating inequalities:
    /// `S = [[-1, 1], [1, 1]]`, for which the identity term equals
    /// `2 [P_1 (Q_1 + Q_2) + P_2 (Q_1 - Q_2)]`.
    pub fn canonical() -> Self {
        SignFunction { values: [[-1, 1], [1, 1]] }
    }

    /// `S(k, l)` for `k, l ∈ {1, 2}`.
    pub fn get(&self, k: usize, l: usize) -> i8 {
        self.values[k - 1][l - 1]
    }

    pub fn values(&self) -> [[i8; 2]; 2] {
        self.values
    }

    /// `S(k,l) = s1(k) s2(l)` for some ±1 functions; equivalently the product
    /// of the four values is +1.
    pub fn is_factorable(&self) -> bool {
        self.values.iter().flatten().map(|&v| v as i32).product::<i32>() == 1
    }

    /// Factors `(s1, s2)` with `s2(1) = 1`, if factorable.
    pub fn factors(&self) -> Option<([i8; 2], [i8; 2])> {
        if !self.is_factorable() {
            return None;
        }
        let s1 = [self.values[0][0], self.values[1][0]];
        let s2 = [1, self.values[0][0] * self.values[0][1]];
        Some((s1, s2))
    }
}

pub fn is_factorable(s: &SignFunction) -> bool {
    s.is_factorable()
}

/// One sign function per internal combination node of the nested identity.
///
/// A tree of depth `d` (a single node has depth 1) drives an identity for
/// `d + 1` parties. The left child acts on the first half of every earlier
/// party's setting block, the right child on the second half.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignTree {
    sign: SignFunction,
    children: Option<Box<[SignTree; 2]>>,
}

impl SignTree {
    pub fn leaf(sign: SignFunction) -> Self {
        SignTree { sign, children: None }
    }

    pub fn node(sign: SignFunction, left: SignTree, right: SignTree) -> Result<Self> {
        if left.depth() != right.depth() {
            return Err(Error::MalformedSignTree(format!(
                "children have depths {} and {}",
                left.depth(),
                right.depth()
            )));
        }
        Ok(SignTree { sign, children: Some(Box::new([left, right])) })
    }

    /// Same sign function at every node of the tree for `n_parties`.
    pub fn uniform(n_parties: usize, sign: SignFunction) -> Result<Self> {
        if n_parties < 2 {
            return Err(invalid(format!("an identity needs at least 2 parties, got {n_parties}")));
        }
        let mut tree = SignTree::leaf(sign);
        for _ in 2..n_parties {
            tree = SignTree::node(sign, tree.clone(), tree)?;
        }
        Ok(tree)
    }

    /// The `4 x 4 x 2` tree `(S, S', S'')`: root `S`, `S'` on settings 1,2 and
    /// `S''` on settings 3,4 of the first two parties.
    pub fn triple(signs: [SignFunction; 3]) -> Self {
        SignTree {
            sign: signs[0],
            children: Some(Box::new([SignTree::leaf(signs[1]), SignTree::leaf(signs[2])])),
        }
    }

    pub fn sign(&self) -> SignFunction {
        self.sign
    }

    pub fn children(&self) -> Option<&[SignTree; 2]> {
        self.children.as_deref()
    }

    pub fn depth(&self) -> usize {
        match &self.children {
            None => 1,
            Some(c) => 1 + c[0].depth(),
        }
    }

    pub fn n_parties(&self) -> usize {
        self.depth() + 1
    }

    pub fn node_count(&self) -> usize {
        match &self.children {
            None => 1,
            Some(c) => 1 + c[0].node_count() + c[1].node_count(),
        }
    }

    fn check_balanced(&self) -> Result<usize> {
        match &self.children {
            None => Ok(1),
            Some(c) => {
                let (l, r) = (c[0].check_balanced()?, c[1].check_balanced()?);
                if l != r {
                    return Err(Error::MalformedSignTree(format!("unbalanced children {l} and {r}")));
                }
                Ok(l + 1)
            }
        }
    }
}

/// Settings per party of the identity for `n_parties`:
/// `(2^{N-1}, 2^{N-1}, 2^{N-2}, ..., 2)`.
pub fn identity_profile(n_parties: usize) -> Vec<usize> {
    (0..n_parties)
        .map(|j| if j == 0 { 1 << (n_parties - 1) } else { 1 << (n_parties - j) })
        .collect()
}

/// Offsets of the right-hand sub-block: each earlier party's block splits in half.
fn right_offsets(offsets: &[usize], level: usize) -> Vec<usize> {
    let sub = identity_profile_level(level - 1);
    offsets.iter().zip(sub).map(|(o, m)| o + m).collect()
}

/// Profile of a level-`m` sub-expression; level 1 is a single setting of party 1.
fn identity_profile_level(m: usize) -> Vec<usize> {
    if m == 1 {
        vec![1]
    } else {
        identity_profile(m)
    }
}

/// Evaluates the nested identity on a deterministic strategy.
///
/// The strategy must cover the profile `(2^{N-1}, 2^{N-1}, ..., 2)` of the
/// tree's party count. The result is always ±4^{N-1}.
pub fn identity_value(strategy: &DeterministicStrategy, signs: &SignTree) -> Result<i64> {
    let n = signs.check_balanced()? + 1;
    let profile = identity_profile(n);
    if strategy.settings_per_party() != profile {
        return Err(invalid(format!(
            "strategy profile {:?} does not match identity profile {:?}",
            strategy.settings_per_party(),
            profile
        )));
    }
    Ok(eval_node(strategy.outcomes(), signs, n, &vec![0; n]))
}

fn eval_node(x: &[Vec<i8>], node: &SignTree, level: usize, offsets: &[usize]) -> i64 {
    let (p1, p2) = match node.children() {
        None => (x[0][offsets[0]] as i64, x[0][offsets[0] + 1] as i64),
        Some([left, right]) => (
            eval_node(x, left, level - 1, &offsets[..level - 1]),
            eval_node(x, right, level - 1, &right_offsets(&offsets[..level - 1], level)),
        ),
    };
    let last = &x[level - 1];
    let (q1, q2) = (last[offsets[level - 1]] as i64, last[offsets[level - 1] + 1] as i64);
    let mut total = 0;
    for k in 1..=2 {
        for l in 1..=2 {
            let pk = if k == 1 { p1 - p2 } else { p1 + p2 };
            let ql = if l == 1 { q1 - q2 } else { q1 + q2 };
            total += node.sign.get(k, l) as i64 * pk * ql;
        }
    }
    total
}

type Poly = BTreeMap<Vec<usize>, i64>;

/// Expands the identity into integer coefficients on 1-based setting tuples.
fn expand_node(node: &SignTree, level: usize, offsets: &[usize]) -> Poly {
    let (p1, p2): (Poly, Poly) = match node.children() {
        None => (
            Poly::from([(vec![offsets[0] + 1], 1)]),
            Poly::from([(vec![offsets[0] + 2], 1)]),
        ),
        Some([left, right]) => (
            expand_node(left, level - 1, &offsets[..level - 1]),
            expand_node(right, level - 1, &right_offsets(&offsets[..level - 1], level)),
        ),
    };
    // Σ_{k,l} S(k,l) (P1 + (-1)^k P2)(Q1 + (-1)^l Q2), collected per product.
    let s = |k, l| node.sign.get(k, l) as i64;
    let w = |k: usize| if k == 1 { -1 } else { 1 };
    let mut c = [[0i64; 2]; 2];
    for k in 1..=2 {
        for l in 1..=2 {
            c[0][0] += s(k, l);
            c[0][1] += s(k, l) * w(l);
            c[1][0] += s(k, l) * w(k);
            c[1][1] += s(k, l) * w(k) * w(l);
        }
    }
    let q = [offsets[level - 1] + 1, offsets[level - 1] + 2];
    let mut out = Poly::new();
    for (pi, p) in [&p1, &p2].into_iter().enumerate() {
        for (qi, &qs) in q.iter().enumerate() {
            if c[pi][qi] == 0 {
                continue;
            }
            for (tuple, coeff) in p {
                let mut t = tuple.clone();
                t.push(qs);
                *out.entry(t).or_insert(0) += coeff * c[pi][qi];
            }
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

/// Sparse real coefficients on correlators `E_{i_1...i_N}` with a declared
/// local-realistic bound.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCoefficients {
    settings_per_party: Vec<usize>,
    terms: BTreeMap<Vec<usize>, f64>,
    declared_bound: f64,
}

impl InequalityCoefficients {
    /// Zero coefficients are dropped; setting indices are 1-based.
    pub fn new(
        settings_per_party: Vec<usize>,
        terms: BTreeMap<Vec<usize>, f64>,
        declared_bound: f64,
    ) -> Result<Self> {
        if settings_per_party.is_empty() || settings_per_party.iter().any(|&m| m == 0) {
            return Err(invalid(format!("bad setting profile {settings_per_party:?}")));
        }
        if !(declared_bound > 0.0) || !declared_bound.is_finite() {
            return Err(invalid(format!("declared bound must be positive, got {declared_bound}")));
        }
        for (tuple, c) in &terms {
            if tuple.len() != settings_per_party.len() {
                return Err(Error::DimensionMismatch(format!(
                    "term {tuple:?} has the wrong number of parties"
                )));
            }
            if tuple.iter().zip(&settings_per_party).any(|(&i, &m)| i == 0 || i > m) {
                return Err(invalid(format!("term {tuple:?} outside profile {settings_per_party:?}")));
            }
            if !c.is_finite() {
                return Err(invalid(format!("coefficient of {tuple:?} is not finite")));
            }
        }
        let terms: BTreeMap<_, _> = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        if terms.is_empty() {
            return Err(invalid("inequality has no nonzero coefficient"));
        }
        Ok(InequalityCoefficients { settings_per_party, terms, declared_bound })
    }

    fn from_poly(settings_per_party: Vec<usize>, poly: Poly, scale: i64, bound: f64) -> Result<Self> {
        let terms = poly.into_iter().map(|(t, c)| (t, c as f64 / scale as f64)).collect();
        Self::new(settings_per_party, terms, bound)
    }

    pub fn n_parties(&self) -> usize {
        self.settings_per_party.len()
    }

    pub fn settings_per_party(&self) -> &[usize] {
        &self.settings_per_party
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    pub fn declared_bound(&self) -> f64 {
        self.declared_bound
    }

    pub fn coefficient(&self, settings: &[usize]) -> f64 {
        self.terms.get(settings).copied().unwrap_or(0.0)
    }

    /// Dimension `Π m_j` of the correlation-function space.
    pub fn ambient_dim(&self) -> usize {
        self.settings_per_party.iter().product()
    }

    pub fn with_declared_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(invalid(format!("declared bound must be positive, got {bound}")));
        }
        self.declared_bound = bound;
        Ok(self)
    }

    /// Integer coefficients, if every coefficient is an integer of modest size.
    pub fn integer_terms(&self) -> Option<Vec<(Vec<usize>, i64)>> {
        const LIMIT: f64 = (1u64 << 52) as f64;
        self.terms
            .iter()
            .map(|(t, &c)| (c.fract() == 0.0 && c.abs() < LIMIT).then(|| (t.clone(), c as i64)))
            .collect()
    }

    /// Outcome relabelling `X_i → f_{j,i} X_i`: each coefficient is multiplied
    /// by the product of the flips of its settings.
    pub fn flipped(&self, flips: &[Vec<i8>]) -> Result<Self> {
        check_shape(flips.iter().map(Vec::len), &self.settings_per_party, "flip")?;
        let terms = self
            .terms
            .iter()
            .map(|(t, &c)| {
                let s: i32 = t.iter().enumerate().map(|(j, &i)| flips[j][i - 1] as i32).product();
                (t.clone(), c * s as f64)
            })
            .collect();
        Self::new(self.settings_per_party.clone(), terms, self.declared_bound)
    }

    /// Identifies settings without renumbering: the coefficient of every
    /// setting moves to its representative and the profile is unchanged.
    /// The declared bound is kept; it remains valid but may no longer be tight.
    pub fn merged(&self, map: &MergeMap) -> Result<Self> {
        map.check(&self.settings_per_party)?;
        let mut terms = BTreeMap::new();
        for (t, &c) in &self.terms {
            let image: Vec<usize> = t.iter().enumerate().map(|(j, &i)| map.parties[j][i - 1]).collect();
            *terms.entry(image).or_insert(0.0) += c;
        }
        Self::new(self.settings_per_party.clone(), terms, self.declared_bound)
    }
}

fn check_shape(
    lens: impl ExactSizeIterator<Item = usize>,
    profile: &[usize],
    what: &str,
) -> Result<()> {
    if lens.len() != profile.len() {
        return Err(Error::DimensionMismatch(format!("{what} map has the wrong number of parties")));
    }
    for (j, (len, &m)) in lens.zip(profile).enumerate() {
        if len != m {
            return Err(Error::DimensionMismatch(format!(
                "{what} map for party {} has {len} entries, expected {m}",
                j + 1
            )));
        }
    }
    Ok(())
}

/// Per-party map from each 1-based setting to its representative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeMap {
    pub parties: Vec<Vec<usize>>,
}

impl MergeMap {
    pub fn identity(profile: &[usize]) -> Self {
        MergeMap { parties: profile.iter().map(|&m| (1..=m).collect()).collect() }
    }

    fn check(&self, profile: &[usize]) -> Result<()> {
        check_shape(self.parties.iter().map(Vec::len), profile, "merge")?;
        for (j, (map, &m)) in self.parties.iter().zip(profile).enumerate() {
            if let Some(bad) = map.iter().find(|&&r| r == 0 || r > m) {
                return Err(invalid(format!(
                    "merge map for party {} references setting {bad}, which does not exist",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Identifies settings, renumbers the surviving representatives `1..m'` in
/// ascending order, and recertifies the bound by exhaustive enumeration.
pub fn identify_settings(ineq: &InequalityCoefficients, map: &MergeMap) -> Result<InequalityCoefficients> {
    let merged = ineq.merged(map)?;
    let mut renumber = Vec::new();
    let mut profile = Vec::new();
    for reps in &map.parties {
        let mut distinct = reps.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let mut table = vec![0; reps.len() + 1];
        for (new, &old) in distinct.iter().enumerate() {
            table[old] = new + 1;
        }
        profile.push(distinct.len());
        renumber.push(table);
    }
    let terms = merged
        .terms
        .iter()
        .map(|(t, &c)| (t.iter().enumerate().map(|(j, &i)| renumber[j][i]).collect(), c))
        .collect();
    let compact = InequalityCoefficients::new(profile, terms, merged.declared_bound)?;
    let bound = classical_bound(&compact)?.bound;
    compact.with_declared_bound(bound)
}

/// Expands the nested identity of a sign tree; declared bound `4^{N-1}`.
pub fn identity_inequality(signs: &SignTree) -> Result<InequalityCoefficients> {
    let n = signs.check_balanced()? + 1;
    let poly = expand_node(signs, n, &vec![0; n]);
    InequalityCoefficients::from_poly(identity_profile(n), poly, 1, 4f64.powi(n as i32 - 1))
}

/// The `4 x 4 x 2` member for sign functions `(S, S', S'')` at identity
/// normalization (bound 16).
pub fn family_442(signs: [SignFunction; 3]) -> InequalityCoefficients {
    identity_inequality(&SignTree::triple(signs)).expect("balanced triple")
}

/// Number of members of the `4 x 4 x 2` family.
pub const FAMILY_442_SIZE: usize = 1 << 12;

/// Sign triple of family member `index`, ordered lexicographically by
/// `(S, S', S'')` sign-function indices.
pub fn family_triple(index: usize) -> Result<[SignFunction; 3]> {
    if index >= FAMILY_442_SIZE {
        return Err(invalid(format!("family index {index} is outside 0..{FAMILY_442_SIZE}")));
    }
    let f = |shift: usize| SignFunction::from_index(((index >> shift) & 15) as u8).expect("< 16");
    Ok([f(8), f(4), f(0)])
}

pub fn family_member(index: usize) -> Result<InequalityCoefficients> {
    Ok(family_442(family_triple(index)?))
}

/// All 4096 members in index order.
pub fn family_442_all() -> Vec<InequalityCoefficients> {
    (0..FAMILY_442_SIZE).map(|i| family_member(i).expect("in range")).collect()
}

/// The generating inequality for `n_parties ≥ 2`, built from the canonical
/// non-factorable sign function at every node.
///
/// Normalizations: `N = 2` is CHSH (unit coefficients, bound 2); `N = 3` has
/// unit coefficients and bound 4; for `N ≥ 4` the two `(N-1)`-party blocks keep
/// their identity normalization, `A (D_1 + D_2) + A' (D_1 - D_2)`, with bound
/// `2·4^{N-2}` (32 at `N = 4`).
pub fn generating_inequality(n_parties: usize) -> Result<InequalityCoefficients> {
    if n_parties < 2 {
        return Err(invalid(format!("generating inequality needs N ≥ 2, got {n_parties}")));
    }
    let tree = SignTree::uniform(n_parties, SignFunction::canonical())?;
    let poly = expand_node(&tree, n_parties, &vec![0; n_parties]);
    let scale: i64 = if n_parties == 3 { 4 } else { 2 };
    let bound = 4f64.powi(n_parties as i32 - 1) / scale as f64;
    InequalityCoefficients::from_poly(identity_profile(n_parties), poly, scale, bound)
}

/// Witness that a family member with a factorable sign function is a setting
/// identification of a member whose sign functions are all non-factorable.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorableReduction {
    pub witness: [SignFunction; 3],
    pub merge: MergeMap,
}

/// For `(S, S', S'')` with at least one factorable function, builds an
/// all-non-factorable triple and a merge map with
/// `family_442(signs) == family_442(witness).merged(merge)`.
///
/// A factorable `S = s1 ⊗ s2` collapses its node to `4 σ1 σ2 P_x Q_y`. For the
/// root this is reproduced by identifying the third party's two settings, for
/// `S'` (`S''`) by identifying the first party's settings 1,2 (3,4).
/// Returns `None` when all three are non-factorable.
pub fn reduce_factorable(signs: [SignFunction; 3]) -> Option<FactorableReduction> {
    if signs.iter().all(|s| !s.is_factorable()) {
        return None;
    }
    let mut witness = signs;
    let mut merge = MergeMap::identity(&[4, 4, 2]);

    // Which of the two inputs a ±1 function keeps, and with what sign.
    let keep = |s: [i8; 2]| if s[0] == s[1] { (1usize, s[0]) } else { (2usize, s[1]) };

    if let Some((s1, s2)) = signs[0].factors() {
        let (y, sigma2) = keep(s2);
        let f12 = sigma2 * s1[0];
        let f22 = sigma2 * s1[1];
        witness[0] = SignFunction::new([[f12, f12], [-f22, f22]]).expect("±1 entries");
        merge.parties[2] = vec![y, y];
    }
    for (slot, base) in [(1usize, 0usize), (2, 2)] {
        if let Some((s1, s2)) = signs[slot].factors() {
            let (x, sigma1) = keep(s1);
            let f21 = sigma1 * s2[0];
            let f22 = sigma1 * s2[1];
            witness[slot] = SignFunction::new([[f21, -f22], [f21, f22]]).expect("±1 entries");
            merge.parties[0][base] = base + x;
            merge.parties[0][base + 1] = base + x;
        }
    }
    debug_assert!(witness.iter().all(|s| !s.is_factorable()));
    Some(FactorableReduction { witness, merge })
}

/// Finds outcome flips `f` with `target = scale · source.flipped(f)`, solving
/// the sign constraints over GF(2). Both tensors must have the same support.
pub fn find_sign_flips(
    target: &InequalityCoefficients,
    source: &InequalityCoefficients,
    scale: f64,
) -> Option<Vec<Vec<i8>>> {
    if target.settings_per_party != source.settings_per_party || target.terms.len() != source.terms.len() {
        return None;
    }
    let profile = &source.settings_per_party;
    let offsets: Vec<usize> = profile
        .iter()
        .scan(0, |acc, &m| {
            let o = *acc;
            *acc += m;
            Some(o)
        })
        .collect();
    let n_vars: usize = profile.iter().sum();
    let words = n_vars / 64 + 1;
    // Each row: variable bits followed by the right-hand side bit at position n_vars.
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(source.terms.len());
    for (t, &c) in &source.terms {
        let d = target.coefficient(t);
        if d == 0.0 || (d.abs() - (scale * c).abs()).abs() > 1e-12 * d.abs().max(1.0) {
            return None;
        }
        let mut row = vec![0u64; words + 1];
        for (j, &i) in t.iter().enumerate() {
            let v = offsets[j] + i - 1;
            row[v / 64] ^= 1 << (v % 64);
        }
        if (d > 0.0) != (scale * c > 0.0) {
            row[n_vars / 64] ^= 1 << (n_vars % 64);
        }
        rows.push(row);
    }
    let bit = |row: &[u64], v: usize| row[v / 64] >> (v % 64) & 1 == 1;
    let mut pivots = Vec::new();
    let mut r = 0;
    for v in 0..n_vars {
        let Some(p) = (r..rows.len()).find(|&i| bit(&rows[i], v)) else { continue };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && bit(row, v) {
                row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
            }
        }
        pivots.push(v);
        r += 1;
    }
    if rows[r..].iter().any(|row| bit(row, n_vars)) {
        return None;
    }
    let mut assignment = vec![false; n_vars];
    for (row, &v) in rows.iter().zip(&pivots) {
        assignment[v] = bit(row, n_vars);
    }
    Some(
        profile
            .iter()
            .zip(&offsets)
            .map(|(&m, &o)| (0..m).map(|i| if assignment[o + i] { -1 } else { 1 }).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn terms_of(ineq: &InequalityCoefficients) -> Vec<(Vec<usize>, f64)> {
        ineq.terms().iter().map(|(t, &c)| (t.clone(), c)).collect()
    }

    fn random_strategy(rng: &mut ChaCha8Rng, profile: &[usize]) -> DeterministicStrategy {
        DeterministicStrategy::new(
            profile
                .iter()
                .map(|&m| (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
                .collect(),
        )
        .unwrap()
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> SignTree {
        let s = SignFunction::from_index(rng.random_range(0..16)).unwrap();
        if n == 2 {
            SignTree::leaf(s)
        } else {
            SignTree::node(s, random_tree(rng, n - 1), random_tree(rng, n - 1)).unwrap()
        }
    }

    #[test]
    fn factorability_by_definition() {
        let by_definition = |s: &SignFunction| {
            let pm = [1i8, -1];
            pm.iter().any(|&a1| {
                pm.iter().any(|&a2| {
                    pm.iter().any(|&b1| {
                        pm.iter().any(|&b2| {
                            let a = [a1, a2];
                            let b = [b1, b2];
                            (1..=2).all(|k| (1..=2).all(|l| s.get(k, l) == a[k - 1] * b[l - 1]))
                        })
                    })
                })
            })
        };
        let mut non = 0;
        for s in SignFunction::all() {
            assert_eq!(s.is_factorable(), by_definition(&s));
            if !s.is_factorable() {
                non += 1;
            }
            if let Some((a, b)) = s.factors() {
                assert!((1..=2).all(|k| (1..=2).all(|l| s.get(k, l) == a[k - 1] * b[l - 1])));
            }
        }
        assert_eq!(non, 8);
        assert!(SignFunction::new([[1, 1], [1, 1]]).unwrap().is_factorable());
        // (-1)^{k+l}
        assert!(SignFunction::new([[1, -1], [-1, 1]]).unwrap().is_factorable());
        assert!(!SignFunction::canonical().is_factorable());
        assert!(SignFunction::new([[1, 0], [1, 1]]).is_err());
    }

    #[test]
    fn sign_function_index_roundtrip() {
        for s in SignFunction::all() {
            assert_eq!(SignFunction::from_index(s.index()).unwrap(), s);
        }
        assert!(SignFunction::from_index(16).is_err());
    }

    #[test]
    fn tree_shapes() {
        assert_eq!(SignTree::uniform(3, SignFunction::canonical()).unwrap().node_count(), 3);
        assert_eq!(SignTree::uniform(4, SignFunction::canonical()).unwrap().node_count(), 7);
        let leaf = SignTree::leaf(SignFunction::canonical());
        let deep = SignTree::uniform(3, SignFunction::canonical()).unwrap();
        assert!(SignTree::node(SignFunction::canonical(), leaf, deep).is_err());
        assert_eq!(identity_profile(4), vec![8, 8, 4, 2]);
        assert_eq!(identity_profile(2), vec![2, 2]);
    }

    #[test]
    fn identity_value_two_parties_exhaustive() {
        for s in SignFunction::all() {
            for bits in 0..16u32 {
                let x = |b: u32| if bits >> b & 1 == 1 { -1 } else { 1 };
                let st = DeterministicStrategy::new(vec![vec![x(0), x(1)], vec![x(2), x(3)]]).unwrap();
                let v = identity_value(&st, &SignTree::leaf(s)).unwrap();
                assert_eq!(v.abs(), 4);
            }
        }
    }

    #[test]
    fn identity_value_random_three_and_four_parties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3, 4] {
            for _ in 0..500 {
                let tree = random_tree(&mut rng, n);
                let st = random_strategy(&mut rng, &identity_profile(n));
                assert_eq!(identity_value(&st, &tree).unwrap().abs(), 4i64.pow(n as u32 - 1));
            }
        }
    }

    #[test]
    fn identity_value_rejects_wrong_profile() {
        let st = DeterministicStrategy::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        let tree = SignTree::uniform(3, SignFunction::canonical()).unwrap();
        assert!(identity_value(&st, &tree).is_err());
    }

    #[test]
    fn expansion_agrees_with_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 4] {
            for _ in 0..50 {
                let tree = random_tree(&mut rng, n);
                let ineq = identity_inequality(&tree).unwrap();
                let st = random_strategy(&mut rng, &identity_profile(n));
                let expanded: f64 = ineq
                    .terms()
                    .iter()
                    .map(|(t, c)| c * t.iter().enumerate().map(|(j, &i)| st.outcomes()[j][i - 1] as f64).product::<f64>())
                    .sum();
                assert_eq!(expanded as i64, identity_value(&st, &tree).unwrap());
            }
        }
    }

    #[test]
    fn generating_three_parties_term_by_term() {
        let g = generating_inequality(3).unwrap();
        let expect: Vec<(Vec<usize>, f64)> = vec![
            (vec![1, 1, 1], 1.0),
            (vec![1, 1, 2], 1.0),
            (vec![1, 2, 1], 1.0),
            (vec![1, 2, 2], 1.0),
            (vec![2, 1, 1], 1.0),
            (vec![2, 1, 2], 1.0),
            (vec![2, 2, 1], -1.0),
            (vec![2, 2, 2], -1.0),
            (vec![3, 3, 1], 1.0),
            (vec![3, 3, 2], -1.0),
            (vec![3, 4, 1], 1.0),
            (vec![3, 4, 2], -1.0),
            (vec![4, 3, 1], 1.0),
            (vec![4, 3, 2], -1.0),
            (vec![4, 4, 1], -1.0),
            (vec![4, 4, 2], 1.0),
        ];
        assert_eq!(terms_of(&g), expect);
        assert_eq!(g.declared_bound(), 4.0);
        assert_eq!(g.settings_per_party(), &[4, 4, 2]);
    }

    #[test]
    fn generating_chsh_and_larger() {
        let g = generating_inequality(2).unwrap();
        assert_eq!(
            terms_of(&g),
            vec![(vec![1, 1], 1.0), (vec![1, 2], 1.0), (vec![2, 1], 1.0), (vec![2, 2], -1.0)]
        );
        assert_eq!(g.declared_bound(), 2.0);
        let g4 = generating_inequality(4).unwrap();
        assert_eq!(g4.settings_per_party(), &[8, 8, 4, 2]);
        assert_eq!(g4.declared_bound(), 32.0);
        for n in 2..=6 {
            let g = generating_inequality(n).unwrap();
            assert_eq!(g.terms().len(), 1 << (2 * (n - 1)));
            let mag = g.terms().values().next().unwrap().abs();
            assert!(g.terms().values().all(|c| c.abs() == mag));
            if n <= 3 {
                assert_eq!(mag, 1.0);
            }
        }
        assert!(generating_inequality(1).is_err());
    }

    #[test]
    fn family_enumeration() {
        let all = family_442_all();
        assert_eq!(all.len(), 4096);
        assert!(all.iter().all(|f| f.declared_bound() == 16.0));
        assert_eq!(family_triple(0).unwrap(), [SignFunction::from_index(0).unwrap(); 3]);
        assert!(family_member(4096).is_err());
    }

    #[test]
    fn factorable_root_drops_third_setting() {
        // S(k,l) = a(k) with b ≡ 0: constant in l.
        let s = SignFunction::new([[1, 1], [-1, -1]]).unwrap();
        let m = family_442([s, SignFunction::canonical(), SignFunction::canonical()]);
        assert!(m.terms().keys().all(|t| t[2] == 1));
    }

    #[test]
    fn canonical_triple_is_four_times_generating() {
        let c = SignFunction::canonical();
        let m = family_442([c, c, c]);
        let g = generating_inequality(3).unwrap();
        for (t, v) in m.terms() {
            assert_eq!(*v, 4.0 * g.coefficient(t));
        }
        assert_eq!(m.terms().len(), g.terms().len());
    }

    #[test]
    fn merge_examples() {
        let g = generating_inequality(3).unwrap();
        let map = MergeMap { parties: vec![vec![1, 1, 3, 4], vec![1, 1, 3, 4], vec![1, 2]] };
        let m = identify_settings(&g, &map).unwrap();
        assert_eq!(m.settings_per_party(), &[3, 3, 2]);

        let same = identify_settings(&g, &MergeMap::identity(&[4, 4, 2])).unwrap();
        assert_eq!(same.terms(), g.terms());

        let chsh = generating_inequality(2).unwrap();
        let all = MergeMap { parties: vec![vec![1, 1], vec![1, 1]] };
        let one = identify_settings(&chsh, &all).unwrap();
        assert_eq!(terms_of(&one), vec![(vec![1, 1], 2.0)]);
        assert_eq!(one.declared_bound(), 2.0);

        let bad = MergeMap { parties: vec![vec![1, 3], vec![1, 2]] };
        assert!(identify_settings(&chsh, &bad).is_err());
        let short = MergeMap { parties: vec![vec![1, 2]] };
        assert!(identify_settings(&chsh, &short).is_err());
    }

    #[test]
    fn sign_flip_search() {
        let g = generating_inequality(3).unwrap();
        let flips = vec![vec![1, -1, 1, 1], vec![-1, 1, 1, -1], vec![1, -1]];
        let f = g.flipped(&flips).unwrap();
        let found = find_sign_flips(&f, &g, 1.0).unwrap();
        assert_eq!(g.flipped(&found).unwrap(), f);
        // CHSH has an odd number of minus signs; all plus is unreachable.
        let chsh = generating_inequality(2).unwrap();
        let plus = InequalityCoefficients::new(
            vec![2, 2],
            [(vec![1, 1], 1.0), (vec![1, 2], 1.0), (vec![2, 1], 1.0), (vec![2, 2], 1.0)].into(),
            4.0,
        )
        .unwrap();
        assert!(find_sign_flips(&plus, &chsh, 1.0).is_none());
    }

    #[test]
    fn inequality_validation() {
        assert!(InequalityCoefficients::new(vec![2], [(vec![3], 1.0)].into(), 1.0).is_err());
        assert!(InequalityCoefficients::new(vec![2], [(vec![1], 0.0)].into(), 1.0).is_err());
        assert!(InequalityCoefficients::new(vec![2], [(vec![1], 1.0)].into(), 0.0).is_err());
        assert!(InequalityCoefficients::new(vec![2, 2], [(vec![1], 1.0)].into(), 1.0).is_err());
    }
}
