use std::f64::consts::PI;

use bellforge::catalog::{ghz, w_state};
use bellforge::criterion::{multisetting_criterion, OrthonormalPair};
use bellforge::optim::SearchOptions;
use bellforge::quantum::{CorrelationTensor, QuantumState, C64};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn top_two(m: &Matrix3<f64>) -> f64 {
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v * v).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] + s[1]
}

/// Third party's pair on a 10° grid of rotation angles, leaves in closed form.
fn grid_value(t: &CorrelationTensor) -> f64 {
    let block = t.full_rank_block();
    let slice = |e: &Vector3<f64>| Matrix3::from_fn(|a, b| (0..3).map(|c| block[9 * a + 3 * b + c] * e[c]).sum());
    let step = PI / 18.0;
    let mut best: f64 = 0.0;
    for i in 0..36 {
        for j in 0..=18 {
            for k in 0..36 {
                let (e1, e2) = OrthonormalPair::from_angles([i as f64 * step, j as f64 * step, k as f64 * step]).vectors();
                best = best.max(top_two(&slice(&e1)) + top_two(&slice(&e2)));
            }
        }
    }
    best
}

#[test]
fn optimizer_beats_coarse_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tensors = vec![
        ghz(3, 0.2).unwrap().state.correlation_tensor(),
        w_state(3).unwrap().state.correlation_tensor(),
    ];
    for _ in 0..3 {
        let amps: Vec<C64> = (0..8).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        tensors.push(QuantumState::from_amplitudes(3, &amps).unwrap().correlation_tensor());
    }
    for t in &tensors {
        let grid = grid_value(t);
        let m = multisetting_criterion(t, &SearchOptions::default()).unwrap().value;
        assert!(m >= grid - 1e-6, "optimized {m} below grid {grid}");
    }
}
