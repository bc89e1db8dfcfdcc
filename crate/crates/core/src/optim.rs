//! Derivative-free maximization: Nelder-Mead simplex search driven from many
//! seeded starting points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Restart count and seed shared by every stochastic search in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { restarts: 32, seed: 0 }
    }
}

impl SearchOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        SearchOptions { restarts, seed }
    }

    /// Independent generator for restart `index`.
    pub fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMax {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub initial_step: f64,
    /// Stop when the simplex values spread by less than `f_tol (1 + |f|)`.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub polish_rounds: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { initial_step: 0.4, f_tol: 1e-13, max_evals: 20_000, polish_rounds: 3 }
    }
}

impl NelderMead {
    pub fn maximize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> LocalMax {
        let mut best = self.run(&f, x0, self.initial_step);
        for round in 0..self.polish_rounds {
            let step = self.initial_step * 0.25f64.powi(round as i32 + 1);
            let next = self.run(&f, &best.x, step);
            let gained = next.value - best.value;
            let evals = best.evals + next.evals;
            if next.value >= best.value {
                best = LocalMax { evals, ..next };
            } else {
                best.evals = evals;
            }
            if gained <= self.f_tol * (1.0 + best.value.abs()) {
                break;
            }
        }
        best
    }

    fn run<F: Fn(&[f64]) -> f64>(&self, f: &F, x0: &[f64], step: f64) -> LocalMax {
        let n = x0.len();
        if n == 0 {
            return LocalMax { x: Vec::new(), value: f(x0), evals: 1 };
        }
        // Minimize g = -f.
        let g = |x: &[f64]| -f(x);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), g(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step;
            let v = g(&x);
            simplex.push((x, v));
        }
        let mut evals = n + 1;
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let lo = simplex[0].1;
            let hi = simplex[n].1;
            if (hi - lo).abs() <= self.f_tol * (1.0 + lo.abs()) {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(alpha);
            let fr = g(&xr);
            evals += 1;
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = g(&xe);
                evals += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(rho);
                    let fc = g(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = g(&xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for (x, v) in simplex.iter_mut().skip(1) {
                        for (xi, bi) in x.iter_mut().zip(&best) {
                            *xi = bi + sigma * (*xi - bi);
                        }
                        *v = g(x);
                    }
                    evals += n;
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, v) = simplex.swap_remove(0);
        LocalMax { x, value: -v, evals }
    }
}

/// Runs a local search from each starting point and keeps the best; ties go to
/// the earliest start, so the result is independent of scheduling.
///
/// Starts `0..fixed.len()` are the given points; the remaining
/// `opts.restarts - fixed.len()` are uniform in `[-π, π]^dim`.
pub fn multistart<F>(f: F, dim: usize, fixed: &[Vec<f64>], opts: &SearchOptions, nm: &NelderMead) -> LocalMax
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = opts.restarts.max(1).max(fixed.len());
    let results: Vec<LocalMax> = (0..n)
        .into_par_iter()
        .map(|r| {
            let x0 = match fixed.get(r) {
                Some(x) => x.clone(),
                None => {
                    let mut rng = opts.rng(r);
                    (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
                }
            };
            nm.maximize(&f, &x0)
        })
        .collect();
    results
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one restart")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_peak() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let r = NelderMead::default().maximize(f, &[0.0, 0.0]);
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn multistart_escapes_local_maxima() {
        // Local maxima at every integer; the global one at x = 3.
        let f = |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).cos() - 0.05 * (x[0] - 3.0).powi(2);
        let r = multistart(f, 1, &[vec![0.0]], &SearchOptions::new(64, 1), &NelderMead::default());
        assert!(r.value > 0.9);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let f = |x: &[f64]| (x[0] * 1.7).sin() * (x[1] * 0.3 + x[2]).cos();
        let opts = SearchOptions::new(16, 42);
        let a = multistart(f, 3, &[], &opts, &NelderMead::default());
        let b = multistart(f, 3, &[], &opts, &NelderMead::default());
        assert_eq!(a, b);
    }
}
