//! Local-realistic certification by exhaustive enumeration.
//!
//! A deterministic strategy assigns ±1 to every (party, setting). Its
//! correlation vector is the outer product of the per-party outcome lists, a
//! vertex of the correlation polytope in `R^{Π m_j}`.

use num_traits::Signed;
use rayon::prelude::*;

use crate::construct::InequalityCoefficients;
use crate::error::{invalid, Error, Result};
use crate::rank::integer_rank;

/// Largest number of outcome bits `Σ m_j` swept by [`classical_bound`].
pub const MAX_STRATEGY_BITS: u32 = 26;

/// Largest `vertices x dimension` product materialised by [`enumerate_vertices`].
pub const MAX_VERTEX_ENTRIES: u64 = 1 << 26;

/// Predetermined ±1 outcomes, one list per party.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    outcomes: Vec<Vec<i8>>,
}

impl DeterministicStrategy {
    pub fn new(outcomes: Vec<Vec<i8>>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.iter().any(Vec::is_empty) {
            return Err(invalid("strategy needs at least one setting per party"));
        }
        if outcomes.iter().flatten().any(|&v| v != 1 && v != -1) {
            return Err(invalid("strategy outcomes must be ±1"));
        }
        Ok(DeterministicStrategy { outcomes })
    }

    /// Bit `b` of `bits` (parties in order, settings within a party) set means -1.
    fn from_bits(profile: &[usize], bits: u64) -> Self {
        let mut b = 0;
        let outcomes = profile
            .iter()
            .map(|&m| {
                (0..m)
                    .map(|_| {
                        let v = if bits >> b & 1 == 1 { -1 } else { 1 };
                        b += 1;
                        v
                    })
                    .collect()
            })
            .collect();
        DeterministicStrategy { outcomes }
    }

    pub fn outcomes(&self) -> &[Vec<i8>] {
        &self.outcomes
    }

    pub fn settings_per_party(&self) -> Vec<usize> {
        self.outcomes.iter().map(Vec::len).collect()
    }

    /// `Σ_t c_t Π_j x_{j,t_j}`.
    pub fn value(&self, ineq: &InequalityCoefficients) -> f64 {
        ineq.terms()
            .iter()
            .map(|(t, c)| c * t.iter().enumerate().map(|(j, &i)| self.outcomes[j][i - 1] as f64).product::<f64>())
            .sum()
    }

    pub fn vertex(&self) -> ProductVertex {
        let mut entries = vec![1i8];
        for party in &self.outcomes {
            entries = entries.iter().flat_map(|&e| party.iter().map(move |&x| e * x)).collect();
        }
        ProductVertex { entries }
    }
}

/// Flattened outer product of a strategy's outcome lists (party 1 most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductVertex {
    entries: Vec<i8>,
}

impl ProductVertex {
    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn negated(&self) -> ProductVertex {
        ProductVertex { entries: self.entries.iter().map(|v| -v).collect() }
    }

    /// Inner product with the coefficient tensor.
    pub fn value(&self, ineq: &InequalityCoefficients) -> f64 {
        let strides = strides(ineq.settings_per_party());
        ineq.terms()
            .iter()
            .map(|(t, c)| {
                let flat: usize = t.iter().zip(&strides).map(|(i, s)| (i - 1) * s).sum();
                c * self.entries[flat] as f64
            })
            .sum()
    }
}

fn strides(profile: &[usize]) -> Vec<usize> {
    let mut s = vec![1; profile.len()];
    for j in (0..profile.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * profile[j + 1];
    }
    s
}

/// Result of an exhaustive local-realistic maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalBound {
    /// `max |Σ c_t E_t|` over deterministic strategies.
    pub bound: f64,
    /// The same value when all coefficients are integers.
    pub exact: Option<i64>,
    /// First maximizing strategy in sweep order.
    pub argmax: DeterministicStrategy,
    /// Number of strategies attaining `|value| = bound`.
    pub n_maximizers: u64,
}

struct Sweep<T> {
    /// Variable (bit) indices of each term, with its coefficient.
    terms: Vec<(Vec<usize>, T)>,
    /// Terms touching each variable.
    incidence: Vec<Vec<usize>>,
    n_vars: usize,
}

#[derive(Clone)]
struct Partial<T> {
    best: T,
    count: u64,
    argmax: u64,
}

impl<T> Sweep<T>
where
    T: Signed + Copy + PartialOrd + Send + Sync + From<i8>,
{
    fn new(profile: &[usize], terms: Vec<(Vec<usize>, T)>) -> Self {
        let offsets: Vec<usize> = profile
            .iter()
            .scan(0, |acc, &m| {
                let o = *acc;
                *acc += m;
                Some(o)
            })
            .collect();
        let n_vars = profile.iter().sum();
        let terms: Vec<(Vec<usize>, T)> = terms
            .into_iter()
            .map(|(t, c)| (t.iter().enumerate().map(|(j, &i)| offsets[j] + i - 1).collect(), c))
            .collect();
        let mut incidence = vec![Vec::new(); n_vars];
        for (k, (vars, _)) in terms.iter().enumerate() {
            for &v in vars {
                incidence[v].push(k);
            }
        }
        Sweep { terms, incidence, n_vars }
    }

    fn term_value(&self, k: usize, x: &[i8]) -> T {
        let (vars, c) = &self.terms[k];
        let sign: i8 = vars.iter().map(|&v| x[v]).product();
        *c * T::from(sign)
    }

    /// Gray-code sweep over the low bits with the high bits fixed to `chunk`.
    /// Low bits are the least-incident variables, so cheap updates dominate.
    fn run_chunk(&self, order: &[usize], low_bits: u32, chunk: u64, tol: T) -> Partial<T> {
        let mut x = vec![1i8; self.n_vars];
        let mut code: u64 = chunk << low_bits;
        for (pos, &v) in order.iter().enumerate() {
            if code >> pos & 1 == 1 {
                x[v] = -1;
            }
        }
        let mut value = (0..self.terms.len()).fold(T::zero(), |acc, k| acc + self.term_value(k, &x));
        let mut part = Partial { best: value.abs(), count: 1, argmax: code };
        for step in 1u64..(1u64 << low_bits) {
            let pos = step.trailing_zeros() as usize;
            let v = order[pos];
            let delta = self.incidence[v]
                .iter()
                .fold(T::zero(), |acc, &k| acc + self.term_value(k, &x));
            value = value - delta - delta;
            x[v] = -x[v];
            code ^= 1 << pos;
            let a = value.abs();
            if a > part.best + tol {
                part = Partial { best: a, count: 1, argmax: code };
            } else if a >= part.best - tol {
                part.count += 1;
            }
        }
        part
    }

    fn run(&self, tol: T) -> (Partial<T>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.n_vars).collect();
        order.sort_by_key(|&v| (self.incidence[v].len(), v));
        let high = (self.n_vars as u32).min(8);
        let low = self.n_vars as u32 - high;
        let best = (0..1u64 << high)
            .into_par_iter()
            .map(|chunk| self.run_chunk(&order, low, chunk, tol))
            .reduce_with(|a, b| {
                if b.best > a.best + tol {
                    b
                } else if b.best >= a.best - tol {
                    Partial { count: a.count + b.count, ..a }
                } else {
                    a
                }
            })
            .expect("at least one chunk");
        (best, order)
    }
}

fn decode(code: u64, order: &[usize], profile: &[usize]) -> DeterministicStrategy {
    let mut bits = 0u64;
    for (pos, &v) in order.iter().enumerate() {
        if code >> pos & 1 == 1 {
            bits |= 1 << v;
        }
    }
    DeterministicStrategy::from_bits(profile, bits)
}

/// Exact local-realistic bound `max |Σ c_t E_t|` over all `2^{Σ m_j}`
/// deterministic strategies.
///
/// Integer coefficients are summed in 64-bit integers (no overflow is possible
/// once `Σ |c_t| < 2^62`); otherwise in `f64` with ties at relative `1e-12`.
pub fn classical_bound(ineq: &InequalityCoefficients) -> Result<ClassicalBound> {
    let profile = ineq.settings_per_party().to_vec();
    let bits: usize = profile.iter().sum();
    if bits as u32 > MAX_STRATEGY_BITS {
        return Err(Error::TooLarge { what: "strategy enumeration (strategies)", bits: bits as u32, limit: MAX_STRATEGY_BITS });
    }
    let int_terms = ineq
        .integer_terms()
        .filter(|t| t.iter().map(|(_, c)| c.unsigned_abs() as u128).sum::<u128>() < 1 << 62);
    if let Some(terms) = int_terms {
        let sweep = Sweep::new(&profile, terms.into_iter().map(|(t, c)| (t, c)).collect::<Vec<(Vec<usize>, i64)>>());
        let (best, order) = sweep.run(0);
        return Ok(ClassicalBound {
            bound: best.best as f64,
            exact: Some(best.best),
            argmax: decode(best.argmax, &order, &profile),
            n_maximizers: best.count,
        });
    }
    let scale = ineq.terms().values().map(|c| c.abs()).sum::<f64>();
    let terms: Vec<(Vec<usize>, f64)> = ineq.terms().iter().map(|(t, &c)| (t.clone(), c)).collect();
    let sweep = Sweep::new(&profile, terms);
    let (best, order) = sweep.run(1e-12 * scale);
    let argmax = decode(best.argmax, &order, &profile);
    // Recompute directly to shed the drift of incremental updates.
    let bound = argmax.value(ineq).abs();
    Ok(ClassicalBound { bound, exact: None, argmax, n_maximizers: best.count })
}

/// All distinct product vertices for a setting profile.
///
/// Strategies differing by flipping the outcomes of an even number of parties
/// give the same vertex; fixing the first outcome of parties 2..N to +1 picks
/// one strategy per vertex, so the count is `2^{m_1} Π_{j≥2} 2^{m_j - 1}`.
/// `v` and `-v` are both listed.
pub fn enumerate_vertices(profile: &[usize]) -> Result<Vec<ProductVertex>> {
    if profile.is_empty() || profile.contains(&0) {
        return Err(invalid(format!("bad setting profile {profile:?}")));
    }
    let free_bits: usize = profile[0] + profile[1..].iter().map(|m| m - 1).sum::<usize>();
    let dim: u64 = profile.iter().map(|&m| m as u64).product();
    if free_bits >= 40 || (1u64 << free_bits).saturating_mul(dim) > MAX_VERTEX_ENTRIES {
        let entry_bits = free_bits as u32 + dim.next_power_of_two().trailing_zeros();
        return Err(Error::TooLarge {
            what: "vertex enumeration (vertices x dimension)",
            bits: entry_bits,
            limit: MAX_VERTEX_ENTRIES.trailing_zeros(),
        });
    }
    let out = (0..1u64 << free_bits)
        .into_par_iter()
        .map(|code| {
            let mut b = 0;
            let outcomes = profile
                .iter()
                .enumerate()
                .map(|(j, &m)| {
                    (0..m)
                        .map(|i| {
                            if j > 0 && i == 0 {
                                return 1;
                            }
                            let v = if code >> b & 1 == 1 { -1 } else { 1 };
                            b += 1;
                            v
                        })
                        .collect()
                })
                .collect();
            DeterministicStrategy { outcomes }.vertex()
        })
        .collect();
    Ok(out)
}

/// Vertices attaining `+bound` and `-bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturatingSet {
    pub positive: Vec<ProductVertex>,
    pub negative: Vec<ProductVertex>,
}

/// Splits the vertices attaining `|value| = bound` by sign.
pub fn saturating_set(ineq: &InequalityCoefficients, bound: f64) -> Result<SaturatingSet> {
    let vertices = enumerate_vertices(ineq.settings_per_party())?;
    let tol = if ineq.integer_terms().is_some() && bound.fract() == 0.0 { 0.0 } else { 1e-9 * bound.max(1.0) };
    let mut set = SaturatingSet { positive: Vec::new(), negative: Vec::new() };
    for v in vertices {
        let val = v.value(ineq);
        if (val - bound).abs() <= tol {
            set.positive.push(v);
        } else if (val + bound).abs() <= tol {
            set.negative.push(v);
        }
    }
    if set.positive.is_empty() && set.negative.is_empty() {
        return Err(Error::BoundNotAttained(bound));
    }
    Ok(set)
}

/// Exact rank over the rationals of the matrix whose rows are the vertices.
pub fn tightness_rank(vertices: &[ProductVertex]) -> usize {
    let rows: Vec<Vec<i64>> = vertices.iter().map(|v| v.entries.iter().map(|&e| e as i64).collect()).collect();
    integer_rank(&rows)
}

/// Bound, saturating counts and the tightness certificate of one inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub bound: f64,
    pub exact_bound: Option<i64>,
    pub n_saturating_pos: usize,
    pub n_saturating_neg: usize,
    pub rank: usize,
    pub ambient_dim: usize,
    pub tight: bool,
}

/// Certifies the bound exhaustively and checks whether the vertices saturating
/// `+bound` span the whole correlation space.
pub fn certify(ineq: &InequalityCoefficients) -> Result<TightnessReport> {
    let cb = classical_bound(ineq)?;
    let set = saturating_set(ineq, cb.bound)?;
    let rank = tightness_rank(&set.positive);
    let ambient_dim = ineq.ambient_dim();
    Ok(TightnessReport {
        bound: cb.bound,
        exact_bound: cb.exact,
        n_saturating_pos: set.positive.len(),
        n_saturating_neg: set.negative.len(),
        rank,
        ambient_dim,
        tight: rank == ambient_dim,
    })
}
