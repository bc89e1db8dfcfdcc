//! Violation criteria computed from the full-rank block of a correlation tensor.
//!
//! The squared criteria (two-party, multisetting, standard) are violated when
//! their value exceeds 1; the violation factor is the square root of the value
//! and white noise of visibility `v` scales the value by `v²`.

mod frames;
mod quantum_max;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{multistart, NelderMead, SearchOptions};
use crate::quantum::{contract_last, CorrelationTensor};

pub use frames::{FrameTree, OrthonormalPair};
pub use quantum_max::{quantum_max, QuantumMax};

/// A criterion value together with frames realizing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub value: f64,
    pub frames: FrameTree,
    pub violation_factor: f64,
    pub noise_threshold: f64,
}

impl CriterionResult {
    fn new(value: f64, frames: FrameTree) -> Self {
        let value = value.max(0.0);
        CriterionResult {
            value,
            frames,
            violation_factor: value.sqrt(),
            noise_threshold: threshold(value),
        }
    }

    pub fn is_violation(&self) -> bool {
        self.value > 1.0
    }
}

fn threshold(value: f64) -> f64 {
    if value > 1.0 {
        1.0 / value.sqrt()
    } else {
        1.0
    }
}

/// Critical visibility `1/√value` of a squared criterion, or 1 if `value ≤ 1`.
pub fn noise_threshold(value: f64) -> Result<f64> {
    if !(value >= 0.0) {
        return Err(invalid(format!("criterion value must be nonnegative, got {value}")));
    }
    Ok(threshold(value))
}

/// Singular values in decreasing order with matching left/right vectors.
fn sorted_svd(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3], [Vector3<f64>; 3]) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    (
        order.map(|i| svd.singular_values[i]),
        order.map(|i| u.column(i).into_owned()),
        order.map(|i| vt.row(i).transpose()),
    )
}

/// Sum of the two largest squared singular values.
fn leaf_max(block: &[f64]) -> f64 {
    let m = Matrix3::from_row_slice(block);
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigenvalues();
    let smallest = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    (gram.trace() - smallest).max(0.0)
}

fn leaf_frames(block: &[f64]) -> FrameTree {
    let m = Matrix3::from_row_slice(block);
    let (_, u, v) = sorted_svd(&m);
    FrameTree::Leaf {
        first: OrthonormalPair::orthonormalized(&u[0], &u[1]),
        second: OrthonormalPair::orthonormalized(&v[0], &v[1]),
    }
}

/// Closed-form maximum over both observers' frames of `Σ_{k,l=1,2} T_kl²`.
pub fn two_party_criterion(t: &Matrix3<f64>) -> CriterionResult {
    let block: Vec<f64> = (0..9).map(|i| t[(i / 3, i % 3)]).collect();
    CriterionResult::new(leaf_max(&block), leaf_frames(&block))
}

fn check_parties(tensor: &CorrelationTensor) -> Result<()> {
    if tensor.n_parties() < 2 {
        return Err(invalid(format!("criteria need N ≥ 2 parties, got {}", tensor.n_parties())));
    }
    Ok(())
}

/// Number of angles describing the branch pairs above a block of `m` parties.
fn tree_params(m: usize) -> usize {
    3 * ((1usize << (m - 2)) - 1)
}

/// Criterion sum for a block of `m` parties, maximizing leaves in closed form.
/// Angles are laid out in preorder: node pair, then the `e1` subtree, then the `e2` subtree.
fn branch_value(block: &[f64], m: usize, angles: &[f64]) -> f64 {
    if m == 2 {
        return leaf_max(block);
    }
    let pair = OrthonormalPair::from_angles([angles[0], angles[1], angles[2]]);
    let sub = tree_params(m - 1);
    let (e1, e2) = pair.vectors();
    branch_value(&contract_last(block, &e1), m - 1, &angles[3..3 + sub])
        + branch_value(&contract_last(block, &e2), m - 1, &angles[3 + sub..])
}

fn branch_frames(block: &[f64], m: usize, angles: &[f64]) -> FrameTree {
    if m == 2 {
        return leaf_frames(block);
    }
    let pair = OrthonormalPair::from_angles([angles[0], angles[1], angles[2]]);
    let sub = tree_params(m - 1);
    let (e1, e2) = pair.vectors();
    let left = branch_frames(&contract_last(block, &e1), m - 1, &angles[3..3 + sub]);
    let right = branch_frames(&contract_last(block, &e2), m - 1, &angles[3 + sub..]);
    FrameTree::Branch { pair, children: Box::new([left, right]) }
}

/// Top two eigenvectors of the Gram matrix of the last index: the plane
/// carrying most of the block's weight for that party.
fn dominant_pair(block: &[f64]) -> OrthonormalPair {
    let mut g = Matrix3::zeros();
    for c in block.chunks_exact(3) {
        let v = Vector3::new(c[0], c[1], c[2]);
        g += v * v.transpose();
    }
    let eig = SymmetricEigen::new(g);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1 = eig.eigenvectors.column(order[0]).into_owned();
    let e2 = eig.eigenvectors.column(order[1]).into_owned();
    OrthonormalPair::orthonormalized(&e1, &e2)
}

fn dominant_start(block: &[f64], m: usize, out: &mut Vec<f64>) {
    if m == 2 {
        return;
    }
    let pair = dominant_pair(block);
    out.extend(pair.to_angles());
    let (e1, e2) = pair.vectors();
    dominant_start(&contract_last(block, &e1), m - 1, out);
    dominant_start(&contract_last(block, &e2), m - 1, out);
}

/// Angles of the three coordinate planes `(x,y)`, `(y,z)`, `(x,z)`.
fn coordinate_planes() -> [[f64; 3]; 3] {
    [OrthonormalPair::xy(), OrthonormalPair::yz(), OrthonormalPair::xz()].map(|p| p.to_angles())
}

fn nelder_mead() -> NelderMead {
    NelderMead { f_tol: 1e-12, ..NelderMead::default() }
}

/// Hierarchical multisetting criterion: parties `N, N-1, ..., 3` each choose an
/// orthonormal pair independently per branch, and every leaf contributes the
/// closed-form two-party maximum of its contracted block.
///
/// The value is the best found over `opts.restarts` local searches, a lower
/// bound on the true maximum.
pub fn multisetting_criterion(tensor: &CorrelationTensor, opts: &SearchOptions) -> Result<CriterionResult> {
    check_parties(tensor)?;
    let n = tensor.n_parties();
    let block = tensor.full_rank_block();
    let dim = tree_params(n);
    if dim == 0 {
        return Ok(CriterionResult::new(leaf_max(&block), leaf_frames(&block)));
    }
    let mut starts: Vec<Vec<f64>> = coordinate_planes().iter().map(|a| a.repeat(dim / 3)).collect();
    let mut dominant = Vec::with_capacity(dim);
    dominant_start(&block, n, &mut dominant);
    starts.push(dominant);
    let best = multistart(|x| branch_value(&block, n, x), dim, &starts, opts, &nelder_mead());
    log::debug!("multisetting criterion: {} after {} evaluations in the best run", best.value, best.evals);
    Ok(CriterionResult::new(best.value, branch_frames(&block, n, &best.x)))
}

fn fixed_value(block: &[f64], tree: &FrameTree) -> f64 {
    match tree {
        FrameTree::Leaf { first, second } => {
            let m = Matrix3::from_row_slice(block);
            let (a1, a2) = first.vectors();
            let (b1, b2) = second.vectors();
            [a1, a2]
                .iter()
                .flat_map(|a| [b1, b2].map(|b| a.dot(&(m * b)).powi(2)))
                .sum()
        }
        FrameTree::Branch { pair, children } => {
            let (e1, e2) = pair.vectors();
            fixed_value(&contract_last(block, &e1), &children[0])
                + fixed_value(&contract_last(block, &e2), &children[1])
        }
    }
}

/// Criterion sum at explicitly given frames, without any maximization.
pub fn fixed_axes_value(tensor: &CorrelationTensor, axes: &FrameTree) -> Result<f64> {
    check_parties(tensor)?;
    let parties = axes.n_parties()?;
    if parties != tensor.n_parties() {
        return Err(Error::MalformedFrameTree(format!(
            "frame tree covers {parties} parties, tensor has {}",
            tensor.n_parties()
        )));
    }
    axes.check_pairs()?;
    Ok(fixed_value(&tensor.full_rank_block(), axes))
}

fn layered_from_angles(x: &[f64]) -> FrameTree {
    let pairs: Vec<OrthonormalPair> =
        x.chunks_exact(3).map(|a| OrthonormalPair::from_angles([a[0], a[1], a[2]])).collect();
    FrameTree::layered(&pairs).expect("at least two parties")
}

/// Standard two-setting sufficient condition: one frame per party shared by
/// all terms, maximizing the sum of squared components inside those frames.
pub fn standard_sufficient_value(tensor: &CorrelationTensor, opts: &SearchOptions) -> Result<CriterionResult> {
    check_parties(tensor)?;
    let n = tensor.n_parties();
    let block = tensor.full_rank_block();
    if n == 2 {
        return Ok(CriterionResult::new(leaf_max(&block), leaf_frames(&block)));
    }
    let mut starts: Vec<Vec<f64>> = coordinate_planes().iter().map(|a| a.repeat(n)).collect();
    starts.push(party_gram_start(&block, n));
    let best = multistart(
        |x| fixed_value(&block, &layered_from_angles(x)),
        3 * n,
        &starts,
        opts,
        &nelder_mead(),
    );
    Ok(CriterionResult::new(best.value, layered_from_angles(&best.x)))
}

/// Dominant plane of every party's reduced Gram matrix.
fn party_gram_start(block: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * n);
    for party in 0..n {
        let stride = 3usize.pow((n - 1 - party) as u32);
        // Move `party` to the last position, then reuse `dominant_pair`.
        let mut moved = Vec::with_capacity(block.len());
        for hi in 0..block.len() / (3 * stride) {
            for lo in 0..stride {
                for a in 0..3 {
                    moved.push(block[hi * 3 * stride + a * stride + lo]);
                }
            }
        }
        out.extend(dominant_pair(&moved).to_angles());
    }
    out
}

/// Two settings per party found by [`wwzb_max`], as unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WwzbResult {
    /// Largest ratio of a two-setting full-correlation expression to its local bound.
    pub value: f64,
    pub settings: Vec<[[f64; 3]; 2]>,
}

impl WwzbResult {
    pub fn violation_factor(&self) -> f64 {
        self.value
    }

    /// Critical visibility `1/value`, or 1 without violation.
    pub fn noise_threshold(&self) -> f64 {
        if self.value > 1.0 {
            1.0 / self.value
        } else {
            1.0
        }
    }
}

fn sphere(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// `Σ_s |T · ⊗_j (s_j a_j1 + a_j2)|` over sign tuples of the parties `0..m`.
fn wwzb_sum(block: &[f64], m: usize, dirs: &[[Vector3<f64>; 2]]) -> f64 {
    if m == 0 {
        return block[0].abs();
    }
    let [a1, a2] = &dirs[m - 1];
    wwzb_sum(&contract_last(block, &(a2 + a1)), m - 1, dirs)
        + wwzb_sum(&contract_last(block, &(a2 - a1)), m - 1, dirs)
}

fn wwzb_dirs(x: &[f64]) -> Vec<[Vector3<f64>; 2]> {
    x.chunks_exact(4).map(|a| [sphere(a[0], a[1]), sphere(a[2], a[3])]).collect()
}

/// Maximal violation ratio of all two-setting full-correlation Bell
/// inequalities, `(1/2^N) Σ_s |Σ_k Π_j s_j^{k_j} E_k|`, over unit settings.
pub fn wwzb_max(tensor: &CorrelationTensor, opts: &SearchOptions) -> Result<WwzbResult> {
    check_parties(tensor)?;
    let n = tensor.n_parties();
    let block = tensor.full_rank_block();
    let scale = 0.5f64.powi(n as i32);
    let half = std::f64::consts::FRAC_PI_2;
    // Settings along x/y, x/z and y/z in every party.
    let planes = [[half, 0.0, half, half], [half, 0.0, 0.0, 0.0], [half, half, 0.0, 0.0]];
    let starts: Vec<Vec<f64>> = planes.iter().map(|p| p.repeat(n)).collect();
    let best = multistart(|x| scale * wwzb_sum(&block, n, &wwzb_dirs(x)), 4 * n, &starts, opts, &nelder_mead());
    let settings = wwzb_dirs(&best.x).iter().map(|[a, b]| [(*a).into(), (*b).into()]).collect();
    Ok(WwzbResult { value: best.value, settings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{QuantumState, C64};
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn epr() -> CorrelationTensor {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [0.0, h, -h, 0.0].map(|v| C64::new(v, 0.0));
        QuantumState::from_amplitudes(2, &amps).unwrap().correlation_tensor()
    }

    fn ghz3_max() -> CorrelationTensor {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        amps[0] = C64::new(h, 0.0);
        amps[7] = C64::new(h, 0.0);
        QuantumState::from_amplitudes(3, &amps).unwrap().correlation_tensor()
    }

    fn random_tensor(n: usize, rng: &mut ChaCha8Rng) -> CorrelationTensor {
        let amps: Vec<C64> =
            (0..1 << n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        QuantumState::from_amplitudes(n, &amps).unwrap().correlation_tensor()
    }

    /// Grid over the pair parameters of both observers, 10° resolution in each angle.
    fn two_party_grid(t: &Matrix3<f64>) -> f64 {
        let steps: Vec<f64> = (0..36).map(|i| i as f64 * std::f64::consts::PI / 18.0).collect();
        let mut pairs = Vec::new();
        for &a in &steps {
            for &b in steps.iter().take(19) {
                for &c in steps.iter().step_by(3) {
                    pairs.push(OrthonormalPair::from_angles([a, b, c]).vectors());
                }
            }
        }
        let mut best: f64 = 0.0;
        for (a1, a2) in &pairs {
            // Optimal second frame for fixed first frame: top-2 of the 2x3 block.
            let rows = nalgebra::Matrix2x3::from_rows(&[(a1.transpose() * t), (a2.transpose() * t)]);
            let s = rows.singular_values();
            best = best.max(s[0] * s[0] + s[1] * s[1]);
        }
        best
    }

    #[test]
    fn two_party_examples() {
        let r = two_party_criterion(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)));
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.violation_factor - 2f64.sqrt()).abs() < 1e-12);
        let zz = Vector3::z() * Vector3::z().transpose();
        let p = two_party_criterion(&zz);
        assert!((p.value - 1.0).abs() < 1e-12 && !p.is_violation());
        let z = two_party_criterion(&Matrix3::zeros());
        assert_eq!(z.value, 0.0);
        assert_eq!(z.noise_threshold, 1.0);
        z.frames.check_pairs().unwrap();
    }

    #[test]
    fn two_party_matches_grid_and_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let t = random_tensor(2, &mut rng);
            let m = Matrix3::from_row_slice(&t.full_rank_block());
            let r = two_party_criterion(&m);
            let grid = two_party_grid(&m);
            assert!(r.value >= grid - 1e-9 && r.value - grid < 0.05, "{} vs grid {grid}", r.value);
            let at_frames = fixed_axes_value(&t, &r.frames).unwrap();
            assert!((at_frames - r.value).abs() < 1e-10);
        }
        let e = two_party_grid(&Matrix3::from_row_slice(&epr().full_rank_block()));
        assert!((e - 2.0).abs() < 1e-9);
    }

    #[test]
    fn noise_threshold_examples() {
        assert_eq!(noise_threshold(4.0).unwrap(), 0.5);
        assert!((noise_threshold(7.0 / 3.0).unwrap() - 0.654_653_670_707_977).abs() < 1e-12);
        assert_eq!(noise_threshold(1.0).unwrap(), 1.0);
        assert_eq!(noise_threshold(0.3).unwrap(), 1.0);
        assert!(noise_threshold(-0.1).is_err());
        assert!(noise_threshold(f64::NAN).is_err());
    }

    #[test]
    fn consistency_chain_at_two_parties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = SearchOptions::new(4, 0);
        for _ in 0..5 {
            let t = random_tensor(2, &mut rng);
            let a = two_party_criterion(&Matrix3::from_row_slice(&t.full_rank_block())).value;
            let b = multisetting_criterion(&t, &opts).unwrap().value;
            let c = standard_sufficient_value(&t, &opts).unwrap().value;
            assert!((a - b).abs() < 1e-7 && (a - c).abs() < 1e-7);
        }
    }

    #[test]
    fn ghz_standard_violation_factor_is_two() {
        // T_xxx = 1 and T_xyy = T_yxy = T_yyx = -1 inside the (x,y) frames.
        let t = ghz3_max();
        let r = standard_sufficient_value(&t, &SearchOptions::new(8, 0)).unwrap();
        assert!((r.value - 4.0).abs() < 1e-4, "{}", r.value);
        assert!((r.violation_factor - 2.0).abs() < 1e-4);
        let m = multisetting_criterion(&t, &SearchOptions::new(8, 0)).unwrap();
        assert!(r.value <= m.value + 1e-7);
    }

    #[test]
    fn multisetting_frames_reproduce_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tensor(3, &mut rng);
        let r = multisetting_criterion(&t, &SearchOptions::new(6, 1)).unwrap();
        r.frames.check_pairs().unwrap();
        assert!((fixed_axes_value(&t, &r.frames).unwrap() - r.value).abs() < 1e-9);
        let s = standard_sufficient_value(&t, &SearchOptions::new(6, 1)).unwrap();
        assert!(s.value <= r.value + 1e-7);
    }

    #[test]
    fn rotation_covariance_of_fixed_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(3, &mut rng);
        let tree = FrameTree::layered(&[OrthonormalPair::xy(), OrthonormalPair::yz(), OrthonormalPair::xz()]).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let rotated = t.rotate_party(1, &rot).unwrap();
        // T' = R T on party 2, so frames rotated by R give the same value.
        let moved = FrameTree::layered(&[
            OrthonormalPair::xy(),
            OrthonormalPair::new(rot * Vector3::y(), rot * Vector3::z()).unwrap(),
            OrthonormalPair::xz(),
        ])
        .unwrap();
        let a = fixed_axes_value(&t, &tree).unwrap();
        let b = fixed_axes_value(&rotated, &moved).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fixed_axes_shape_errors() {
        let t = ghz3_max();
        let two = FrameTree::layered(&[OrthonormalPair::xy(), OrthonormalPair::xy()]).unwrap();
        assert!(matches!(fixed_axes_value(&t, &two), Err(Error::MalformedFrameTree(_))));
        let zero = CorrelationTensor::from_components(3, vec![0.0; 64]).unwrap();
        let three = FrameTree::layered(&[OrthonormalPair::xy(); 3]).unwrap();
        assert_eq!(fixed_axes_value(&zero, &three).unwrap(), 0.0);
    }

    #[test]
    fn wwzb_epr_is_tsirelson() {
        let r = wwzb_max(&epr(), &SearchOptions::new(8, 0)).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-6, "{}", r.value);
        assert!((r.noise_threshold() - 1.0 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn wwzb_epr_grid_oracle() {
        // Coplanar settings in the x-z plane suffice for the singlet.
        let t = epr();
        let block = t.full_rank_block();
        let mut best: f64 = 0.0;
        for i in 0..36 {
            for j in 0..36 {
                for k in 0..36 {
                    let ang = |s: usize| s as f64 * std::f64::consts::PI / 18.0;
                    let dirs = [
                        [Vector3::new(0.0, 0.0, 1.0), Vector3::new(ang(i).sin(), 0.0, ang(i).cos())],
                        [Vector3::new(ang(j).sin(), 0.0, ang(j).cos()), Vector3::new(ang(k).sin(), 0.0, ang(k).cos())],
                    ];
                    best = best.max(0.25 * wwzb_sum(&block, 2, &dirs));
                }
            }
        }
        assert!(best <= 2f64.sqrt() + 1e-12 && best > 1.40);
    }
}
