//! Named states with closed-form correlation tensors: generalized GHZ, W and
//! the four-qubit state `Ψ = √(2/3)|GHZ⟩ + √(1/3)|EPR⟩|EPR⟩`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use crate::criterion::{FrameTree, OrthonormalPair};
use crate::error::{Error, Result};
use crate::quantum::{CorrelationTensor, QuantumState, C64};

const MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub state: QuantumState,
    /// Closed-form full-rank components; entries with an identity index are zero.
    pub analytic_tensor: CorrelationTensor,
    pub parameters: BTreeMap<String, f64>,
    /// Full-rank indices whose closed-form sign was replaced by the computed one.
    pub sign_corrections: Vec<Vec<usize>>,
}

fn flat_index(indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &k| acc * 4 + k)
}

fn full_rank_indices(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..3usize.pow(n as u32)).map(move |mut r| {
        let mut idx = vec![0; n];
        for slot in idx.iter_mut().rev() {
            *slot = r % 3 + 1;
            r /= 3;
        }
        idx
    })
}

/// Checks closed-form components against the trace computation. A component
/// that differs only in sign is replaced by the computed value and recorded;
/// any other mismatch is an error.
fn build_entry(
    name: String,
    state: QuantumState,
    analytic: impl Fn(&[usize]) -> f64,
    parameters: BTreeMap<String, f64>,
) -> Result<CatalogEntry> {
    let n = state.n_parties();
    let computed = state.correlation_tensor();
    let mut components = vec![0.0; 1 << (2 * n)];
    let mut sign_corrections = Vec::new();
    for idx in full_rank_indices(n) {
        let a = analytic(&idx);
        let c = computed.get(&idx);
        let value = if (a - c).abs() <= MATCH_TOL {
            a
        } else if (a + c).abs() <= MATCH_TOL {
            log::info!("{name}: component {idx:?} has sign {c:+} in the computed tensor, closed form gave {a:+}");
            sign_corrections.push(idx.clone());
            c
        } else {
            return Err(Error::Catalog(format!("{name}: component {idx:?} is {c}, closed form gave {a}")));
        };
        components[flat_index(&idx)] = value;
    }
    Ok(CatalogEntry {
        name,
        state,
        analytic_tensor: CorrelationTensor::from_components(n, components)?,
        parameters,
        sign_corrections,
    })
}

fn check_parties(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::Catalog(format!("needs at least {min} parties, got {n}")));
    }
    if n > crate::quantum::MAX_PARTIES {
        return Err(Error::Catalog(format!("at most {} parties supported, got {n}", crate::quantum::MAX_PARTIES)));
    }
    Ok(())
}

/// `cos α |0...0⟩ + sin α |1...1⟩`.
pub fn ghz(n: usize, alpha: f64) -> Result<CatalogEntry> {
    check_parties(n, 2)?;
    if !alpha.is_finite() {
        return Err(Error::Catalog(format!("alpha must be finite, got {alpha}")));
    }
    if !(0.0..=FRAC_PI_4 + 1e-12).contains(&alpha) {
        log::warn!("ghz: alpha = {alpha} is outside [0, π/4]; the family repeats up to local symmetries");
    }
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    amps[0] = C64::new(alpha.cos(), 0.0);
    amps[(1 << n) - 1] = C64::new(alpha.sin(), 0.0);
    let state = QuantumState::from_amplitudes(n, &amps)?;
    let (s, c) = (2.0 * alpha).sin_cos();
    let all_z = if n % 2 == 1 { c } else { 1.0 };
    let analytic = move |idx: &[usize]| {
        if idx.iter().all(|&k| k == 3) {
            all_z
        } else if idx.iter().all(|&k| k == 1 || k == 2) {
            let ys = idx.iter().filter(|&&k| k == 2).count();
            if ys % 2 == 0 {
                if ys % 4 == 0 { s } else { -s }
            } else {
                0.0
            }
        } else {
            0.0
        }
    };
    let params = BTreeMap::from([("alpha".to_string(), alpha), ("n_parties".to_string(), n as f64)]);
    build_entry(format!("ghz:{n}:{alpha}"), state, analytic, params)
}

/// `(|10...0⟩ + |01...0⟩ + ... + |0...01⟩)/√N`.
pub fn w_state(n: usize) -> Result<CatalogEntry> {
    check_parties(n, 2)?;
    let amp = 1.0 / (n as f64).sqrt();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    for j in 0..n {
        amps[1 << j] = C64::new(amp, 0.0);
    }
    let state = QuantumState::from_amplitudes(n, &amps)?;
    let pair = 2.0 / n as f64;
    let analytic = move |idx: &[usize]| {
        let count = |k: usize| idx.iter().filter(|&&v| v == k).count();
        let (x, y, z) = (count(1), count(2), count(3));
        if z == idx.len() {
            // Closed-form sign is +1; the computed value fixes it.
            1.0
        } else if (x == 2 && y == 0) || (y == 2 && x == 0) {
            pair
        } else {
            0.0
        }
    };
    let params = BTreeMap::from([("n_parties".to_string(), n as f64)]);
    build_entry(format!("w:{n}"), state, analytic, params)
}

/// The 21 nonzero full-rank components of `Ψ`, indices `1,2,3 = x,y,z`.
fn psi4_components() -> Vec<(&'static str, f64)> {
    let mut out = vec![("xxxx", 1.0), ("yyyy", 1.0), ("zzzz", 1.0)];
    out.extend(["xxyy", "xxzz", "yyxx", "yyzz", "zzxx", "zzyy"].map(|k| (k, -1.0 / 3.0)));
    out.extend(["xzxz", "xzzx", "zxxz", "zxzx"].map(|k| (k, 2.0 / 3.0)));
    out.extend(["xyxy", "xyyx", "yxxy", "yxyx", "yzyz", "yzzy", "zyyz", "zyzy"].map(|k| (k, -2.0 / 3.0)));
    out
}

fn parse_axes(label: &str) -> Vec<usize> {
    label.chars().map(|c| match c { 'x' => 1, 'y' => 2, _ => 3 }).collect()
}

pub fn psi4() -> Result<CatalogEntry> {
    let a = 1.0 / 3f64.sqrt();
    let h = a / 2.0;
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    amps[0b0000] = C64::new(a, 0.0);
    amps[0b1111] = C64::new(a, 0.0);
    for k in [0b1010, 0b0101, 0b0110, 0b1001] {
        amps[k] = C64::new(h, 0.0);
    }
    let state = QuantumState::from_amplitudes(4, &amps)?;
    let table: BTreeMap<Vec<usize>, f64> = psi4_components().into_iter().map(|(k, v)| (parse_axes(k), v)).collect();
    build_entry("psi4".into(), state, |idx| table.get(idx).copied().unwrap_or(0.0), BTreeMap::new())
}

/// Criterion value of the GHZ family at [`ghz_reference_axes`]:
/// `2^{N-2} sin²2α + T_{z...z}²`, where `T_{z...z}` is `cos 2α` for odd `N` and 1 for even `N`.
pub fn ghz_violation_lhs(n: usize, alpha: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Catalog(format!("ghz_violation_lhs needs N ≥ 3, got {n}")));
    }
    let (s, c) = (2.0 * alpha).sin_cos();
    let all_z = if n % 2 == 1 { c } else { 1.0 };
    Ok(2f64.powi(n as i32 - 2) * s * s + all_z * all_z)
}

/// `3 - 2/N`, the W-state criterion value at all-`(ŷ,ẑ)` frames.
pub fn w_violation_value(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Catalog(format!("w_violation_value needs N ≥ 2, got {n}")));
    }
    Ok(3.0 - 2.0 / n as f64)
}

/// Frames for the GHZ family: the last party uses `(x̂,ẑ)`; below its `x̂`
/// branch every frame is `(x̂,ŷ)`, below its `ẑ` branch every frame is `(x̂,ẑ)`.
pub fn ghz_reference_axes(n: usize) -> Result<FrameTree> {
    if n < 3 {
        return Err(Error::MalformedFrameTree(format!("GHZ reference frames need N ≥ 3, got {n}")));
    }
    let xy = FrameTree::layered(&vec![OrthonormalPair::xy(); n - 1])?;
    let xz = FrameTree::layered(&vec![OrthonormalPair::xz(); n - 1])?;
    Ok(FrameTree::Branch { pair: OrthonormalPair::xz(), children: Box::new([xy, xz]) })
}

/// Looks up `ghz:N:alpha`, `w:N` or `psi4`.
pub fn resolve(name: &str) -> Result<CatalogEntry> {
    let parts: Vec<&str> = name.split(':').collect();
    let parse_n = |s: &str| s.parse::<usize>().map_err(|_| Error::Catalog(format!("bad party count in {name:?}")));
    match parts.as_slice() {
        ["ghz", n, alpha] => {
            let alpha: f64 = alpha.parse().map_err(|_| Error::Catalog(format!("bad alpha in {name:?}")))?;
            ghz(parse_n(n)?, alpha)
        }
        ["w", n] => w_state(parse_n(n)?),
        ["psi4"] => psi4(),
        _ => Err(Error::Catalog(format!("unknown catalog state {name:?}; expected ghz:N:alpha, w:N or psi4"))),
    }
}
