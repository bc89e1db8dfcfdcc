use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::InequalityCoefficients;
use crate::error::{Error, Result};
use crate::optim::SearchOptions;
use crate::quantum::{contract_last, CorrelationTensor};

const MAX_SWEEPS: usize = 20_000;
const SWEEP_TOL: f64 = 1e-14;

/// Best quantum value of an inequality on a fixed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumMax {
    /// `|Σ c_k E_k|` at the reported settings; a lower bound on the true maximum.
    pub value: f64,
    /// `settings[party][setting]`, unit Bloch vectors.
    pub settings: Vec<Vec<[f64; 3]>>,
}

impl QuantumMax {
    pub fn ratio(&self, ineq: &InequalityCoefficients) -> f64 {
        self.value / ineq.declared_bound()
    }
}

/// Contracts the first index of a dense `3^m` block.
fn contract_first(block: &[f64], v: &Vector3<f64>) -> Vec<f64> {
    let rest = block.len() / 3;
    (0..rest).map(|r| v[0] * block[r] + v[1] * block[rest + r] + v[2] * block[2 * rest + r]).collect()
}

/// The block contracted with every party's vector except `skip`'s.
fn contract_except(block: &[f64], vecs: &[&Vector3<f64>], skip: usize) -> Vector3<f64> {
    let mut cur = block.to_vec();
    for v in vecs[skip + 1..].iter().rev() {
        cur = contract_last(&cur, v);
    }
    for v in &vecs[..skip] {
        cur = contract_first(&cur, v);
    }
    Vector3::new(cur[0], cur[1], cur[2])
}

struct Problem<'a> {
    block: Vec<f64>,
    terms: Vec<(&'a [usize], f64)>,
    profile: &'a [usize],
}

impl Problem<'_> {
    fn value(&self, dirs: &[Vec<Vector3<f64>>]) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                let vs: Vec<&Vector3<f64>> = k.iter().enumerate().map(|(j, &s)| &dirs[j][s - 1]).collect();
                let mut cur = self.block.clone();
                for v in vs.iter().rev() {
                    cur = contract_last(&cur, v);
                }
                c * cur[0]
            })
            .sum()
    }

    /// The expression is linear in each single setting vector, so the best
    /// choice with all others fixed is the normalized coefficient vector.
    fn sweep(&self, dirs: &mut [Vec<Vector3<f64>>]) {
        for party in 0..self.profile.len() {
            for s in 0..self.profile[party] {
                let mut g = Vector3::zeros();
                for (k, c) in &self.terms {
                    if k[party] != s + 1 {
                        continue;
                    }
                    let vs: Vec<&Vector3<f64>> = k.iter().enumerate().map(|(j, &t)| &dirs[j][t - 1]).collect();
                    g += *c * contract_except(&self.block, &vs, party);
                }
                let norm = g.norm();
                if norm > 1e-300 {
                    dirs[party][s] = g / norm;
                }
            }
        }
    }

    fn climb(&self, mut dirs: Vec<Vec<Vector3<f64>>>) -> (f64, Vec<Vec<Vector3<f64>>>) {
        // Start on the positive side; flipping one party's settings negates the value.
        if self.value(&dirs) < 0.0 {
            dirs[0].iter_mut().for_each(|v| *v = -*v);
        }
        let mut value = self.value(&dirs);
        for _ in 0..MAX_SWEEPS {
            self.sweep(&mut dirs);
            let next = self.value(&dirs);
            let gained = next - value;
            value = next;
            if gained <= SWEEP_TOL * (1.0 + value.abs()) {
                break;
            }
        }
        (value, dirs)
    }
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Maximizes `|Σ_k c_k E_k|` over unit setting vectors by alternating exact
/// single-vector updates from `opts.restarts` random starts.
pub fn quantum_max(
    ineq: &InequalityCoefficients,
    tensor: &CorrelationTensor,
    opts: &SearchOptions,
) -> Result<QuantumMax> {
    if ineq.n_parties() != tensor.n_parties() {
        return Err(Error::DimensionMismatch(format!(
            "inequality has {} parties, tensor has {}",
            ineq.n_parties(),
            tensor.n_parties()
        )));
    }
    let problem = Problem {
        block: tensor.full_rank_block(),
        terms: ineq.terms().iter().map(|(k, &c)| (k.as_slice(), c)).collect(),
        profile: ineq.settings_per_party(),
    };
    let runs: Vec<(f64, Vec<Vec<Vector3<f64>>>)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = opts.rng(r);
            let dirs = problem.profile.iter().map(|&m| (0..m).map(|_| random_unit(&mut rng)).collect()).collect();
            problem.climb(dirs)
        })
        .collect();
    let (value, dirs) = runs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one restart");
    Ok(QuantumMax {
        value: value.abs(),
        settings: dirs.iter().map(|p| p.iter().map(|v| (*v).into()).collect()).collect(),
    })
}
