//! N-qubit states and their Pauli correlation tensors.
//!
//! Conventions: `|0>` is the +1 eigenvector of `σz`, Pauli index `0,1,2,3` is
//! `1,x,y,z`, and party 1 is the leftmost tensor factor (most significant bit of
//! a computational-basis index, most significant digit of a tensor index).

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Largest number of parties the dense representation accepts.
pub const MAX_PARTIES: usize = 10;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const UNIT_TOL: f64 = 1e-12;

/// `σ0 = 1`, `σx`, `σy`, `σz`.
pub fn pauli_matrix(k: usize) -> Result<Matrix2<C64>> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    Ok(match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        3 => Matrix2::new(l, o, o, -l),
        _ => return Err(invalid(format!("Pauli index {k} is outside 0..=3"))),
    })
}

/// Density operator of `n_parties` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_parties: usize,
    rho: DMatrix<C64>,
}

impl QuantumState {
    /// Pure state `|ψ><ψ|` from (possibly unnormalized) amplitudes.
    pub fn from_amplitudes(n_parties: usize, amps: &[C64]) -> Result<Self> {
        check_parties(n_parties)?;
        if !amps.len().is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {} is not a power of two",
                amps.len()
            )));
        }
        if amps.len() != 1 << n_parties {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes given for {} qubits",
                amps.len(),
                n_parties
            )));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("amplitude vector has zero or non-finite norm"));
        }
        let psi: Vec<C64> = amps.iter().map(|a| a / norm).collect();
        let dim = psi.len();
        let rho = DMatrix::from_fn(dim, dim, |r, c| psi[r] * psi[c].conj());
        Ok(QuantumState { n_parties, rho })
    }

    /// Mixed state from an explicit density matrix; checks hermiticity, unit
    /// trace and positivity.
    pub fn from_density(n_parties: usize, rho: DMatrix<C64>) -> Result<Self> {
        check_parties(n_parties)?;
        let dim = 1usize << n_parties;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix given for {} qubits",
                rho.nrows(),
                rho.ncols(),
                n_parties
            )));
        }
        let mut asym = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                asym = asym.max((rho[(r, c)] - rho[(c, r)].conj()).norm());
            }
        }
        if asym >= HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (asymmetry {asym:e})")));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let min_eig = rho
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(QuantumState { n_parties, rho })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// `(1-v) 1/2^N + v ρ`.
    pub fn with_white_noise(&self, visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid(format!("visibility {visibility} is outside [0, 1]")));
        }
        let dim = self.dim();
        let mut rho = &self.rho * C64::new(visibility, 0.0);
        let diag = (1.0 - visibility) / dim as f64;
        for d in 0..dim {
            rho[(d, d)] += diag;
        }
        Ok(QuantumState { n_parties: self.n_parties, rho })
    }

    /// `U_party ρ U_party†` for a single-qubit unitary acting on `party` (0-based).
    pub fn apply_local_unitary(&self, party: usize, u: &Matrix2<C64>) -> Result<Self> {
        if party >= self.n_parties {
            return Err(invalid(format!("party {party} out of range for {} qubits", self.n_parties)));
        }
        let dim = self.dim();
        let shift = self.n_parties - 1 - party;
        let mut full = DMatrix::<C64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                if (r ^ c) & !(1 << shift) != 0 {
                    continue;
                }
                full[(r, c)] = u[((r >> shift) & 1, (c >> shift) & 1)];
            }
        }
        let rho = &full * &self.rho * full.adjoint();
        Ok(QuantumState { n_parties: self.n_parties, rho })
    }

    /// `T_{k1..kN} = Tr[ρ σ_k1 ⊗ ... ⊗ σ_kN]` for all `4^N` index tuples.
    pub fn correlation_tensor(&self) -> CorrelationTensor {
        let n = self.n_parties;
        let dim = self.dim();
        let mut components = vec![0.0; 1 << (2 * n)];
        for (flat, slot) in components.iter_mut().enumerate() {
            // Each Pauli string is a signed permutation: row r couples to column r ^ flip.
            let mut flip = 0usize;
            let mut ys = 0usize;
            let mut zmask = 0usize;
            for party in 0..n {
                let k = (flat >> (2 * (n - 1 - party))) & 3;
                let bit = 1 << (n - 1 - party);
                match k {
                    1 => flip |= bit,
                    2 => {
                        flip |= bit;
                        ys += 1;
                        zmask |= bit;
                    }
                    3 => zmask |= bit,
                    _ => {}
                }
            }
            // σy = i σx σz, so the string equals i^ys (X-part)(Z-part); the Z part
            // contributes (-1)^{popcount(col & zmask)} on column `col`.
            let phase = match ys % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            };
            let mut acc = C64::new(0.0, 0.0);
            for col in 0..dim {
                let row = col ^ flip;
                let sign = if (col & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                // Tr(ρ P) = Σ_col ρ[col][row] P[row][col]
                acc += self.rho[(col, row)] * sign;
            }
            *slot = (acc * phase).re;
        }
        CorrelationTensor { n_parties: n, components }
    }
}

fn check_parties(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PARTIES {
        return Err(invalid(format!("number of parties must be in 1..={MAX_PARTIES}, got {n}")));
    }
    Ok(())
}

/// Pauli correlation tensor over all `4^N` index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    n_parties: usize,
    components: Vec<f64>,
}

impl CorrelationTensor {
    pub fn from_components(n_parties: usize, components: Vec<f64>) -> Result<Self> {
        check_parties(n_parties)?;
        if components.len() != 1 << (2 * n_parties) {
            return Err(Error::DimensionMismatch(format!(
                "{} components given, expected 4^{}",
                components.len(),
                n_parties
            )));
        }
        Ok(CorrelationTensor { n_parties, components })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Component at `indices` (each in `0..=3`).
    ///
    /// Panics if the tuple has the wrong length or an index above 3.
    pub fn get(&self, indices: &[usize]) -> f64 {
        self.components[self.flat_index(indices)]
    }

    fn flat_index(&self, indices: &[usize]) -> usize {
        assert_eq!(indices.len(), self.n_parties, "index tuple length");
        indices.iter().fold(0, |acc, &k| {
            assert!(k < 4, "Pauli index {k} out of range");
            acc * 4 + k
        })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.components.iter().map(|t| t * t).sum()
    }

    /// Entries with `|t| > tol`, in lexicographic index order.
    pub fn nonzero_entries(&self, tol: f64) -> Vec<(Vec<usize>, f64)> {
        let n = self.n_parties;
        self.components
            .iter()
            .enumerate()
            .filter(|(_, t)| t.abs() > tol)
            .map(|(flat, &t)| {
                let idx = (0..n).map(|p| (flat >> (2 * (n - 1 - p))) & 3).collect();
                (idx, t)
            })
            .collect()
    }

    /// The full-rank block (all indices in `1..=3`) as a dense row-major array
    /// of length `3^N`, with local index `0,1,2 = x,y,z`.
    pub fn full_rank_block(&self) -> Vec<f64> {
        let n = self.n_parties;
        let len = 3usize.pow(n as u32);
        (0..len)
            .map(|mut r| {
                let mut flat = 0;
                let mut place = 0;
                for _ in 0..n {
                    flat |= (r % 3 + 1) << (2 * place);
                    r /= 3;
                    place += 1;
                }
                self.components[flat]
            })
            .collect()
    }

    /// Applies a local rotation `T'_{..a..} = Σ_b R_ab T_{..b..}` on one party's
    /// spatial index; identity indices are untouched.
    pub fn rotate_party(&self, party: usize, rotation: &Matrix3<f64>) -> Result<Self> {
        if party >= self.n_parties {
            return Err(invalid(format!("party {party} out of range")));
        }
        let shift = 2 * (self.n_parties - 1 - party);
        let mut out = self.components.clone();
        for (flat, slot) in out.iter_mut().enumerate() {
            let a = (flat >> shift) & 3;
            if a == 0 {
                continue;
            }
            let base = flat & !(3 << shift);
            *slot = (1..4)
                .map(|b| rotation[(a - 1, b - 1)] * self.components[base | (b << shift)])
                .sum();
        }
        Ok(CorrelationTensor { n_parties: self.n_parties, components: out })
    }
}

/// Unit Bloch vector describing a local measurement direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingVector(Vector3<f64>);

impl SettingVector {
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(invalid(format!("setting vector has norm {}, expected 1", v.norm())));
        }
        Ok(SettingVector(v))
    }

    /// Rescales a nonzero vector to unit length.
    pub fn normalized(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("cannot normalize a zero vector"));
        }
        Ok(SettingVector(v / n))
    }

    pub fn x() -> Self {
        SettingVector(Vector3::x())
    }

    pub fn y() -> Self {
        SettingVector(Vector3::y())
    }

    pub fn z() -> Self {
        SettingVector(Vector3::z())
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Contracts the last index of a dense `3^n` block with `v`, giving a `3^{n-1}` block.
pub(crate) fn contract_last(block: &[f64], v: &Vector3<f64>) -> Vec<f64> {
    block
        .chunks_exact(3)
        .map(|c| c[0] * v[0] + c[1] * v[1] + c[2] * v[2])
        .collect()
}

/// Full contraction of a dense `3^n` block with one vector per party.
pub(crate) fn contract_all(block: &[f64], vectors: &[&Vector3<f64>]) -> f64 {
    let mut cur = block.to_vec();
    for v in vectors.iter().rev() {
        cur = contract_last(&cur, v);
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}

/// Quantum correlation function `E = (a_1 ⊗ ... ⊗ a_N) · T`.
pub fn correlation_function(tensor: &CorrelationTensor, settings: &[SettingVector]) -> Result<f64> {
    if settings.len() != tensor.n_parties() {
        return Err(Error::DimensionMismatch(format!(
            "{} setting vectors for {} parties",
            settings.len(),
            tensor.n_parties()
        )));
    }
    for s in settings {
        SettingVector::new(s.0)?;
    }
    let vs: Vec<&Vector3<f64>> = settings.iter().map(|s| &s.0).collect();
    Ok(contract_all(&tensor.full_rank_block(), &vs))
}

/// `(1-v) 1/2^N + v ρ`; see [`QuantumState::with_white_noise`].
pub fn add_white_noise(state: &QuantumState, visibility: f64) -> Result<QuantumState> {
    state.with_white_noise(visibility)
}

/// The rotation `R_ab = ½ Tr(σ_a U σ_b U†)` induced on Bloch vectors by a
/// single-qubit unitary.
pub fn bloch_rotation(u: &Matrix2<C64>) -> Matrix3<f64> {
    let sig: Vec<Matrix2<C64>> = (1..4).map(|k| pauli_matrix(k).expect("valid index")).collect();
    let ud = u.adjoint();
    Matrix3::from_fn(|a, b| 0.5 * (sig[a] * u * sig[b] * ud).trace().re)
}
