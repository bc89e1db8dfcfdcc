//! JSON file formats for states, correlation tensors and inequalities.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::construct::InequalityCoefficients;
use crate::error::{invalid, Result};
use crate::quantum::{CorrelationTensor, QuantumState, C64};

/// Components with modulus at or below this are omitted from tensor output.
pub const TENSOR_OUTPUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Density,
}

/// `{ "n_parties", "kind", "amplitudes" | "matrix" }` with complex numbers as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n_parties: usize,
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

impl StateFile {
    pub fn pure(n_parties: usize, amplitudes: &[C64]) -> Self {
        StateFile {
            n_parties,
            kind: StateKind::Pure,
            amplitudes: Some(amplitudes.iter().map(|a| [a.re, a.im]).collect()),
            matrix: None,
        }
    }

    pub fn density(state: &QuantumState) -> Self {
        let rho = state.rho();
        let matrix = (0..rho.nrows()).map(|r| (0..rho.ncols()).map(|c| [rho[(r, c)].re, rho[(r, c)].im]).collect()).collect();
        StateFile { n_parties: state.n_parties(), kind: StateKind::Density, amplitudes: None, matrix: Some(matrix) }
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        match self.kind {
            StateKind::Pure => {
                let amps = self.amplitudes.as_ref().ok_or_else(|| invalid("pure state file needs \"amplitudes\""))?;
                let amps: Vec<C64> = amps.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                QuantumState::from_amplitudes(self.n_parties, &amps)
            }
            StateKind::Density => {
                let rows = self.matrix.as_ref().ok_or_else(|| invalid("density state file needs \"matrix\""))?;
                let dim = rows.len();
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(invalid("density matrix must be square"));
                }
                let rho = DMatrix::from_fn(dim, dim, |r, c| C64::new(rows[r][c][0], rows[r][c][1]));
                QuantumState::from_density(self.n_parties, rho)
            }
        }
    }
}

pub fn state_from_json(text: &str) -> Result<QuantumState> {
    serde_json::from_str::<StateFile>(text)?.to_state()
}

pub fn read_state(path: &Path) -> Result<QuantumState> {
    state_from_json(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub indices: Vec<usize>,
    pub value: f64,
}

/// Nonzero components (`|t| > 1e-12`) in flat-index order.
pub fn tensor_entries(tensor: &CorrelationTensor) -> Vec<TensorEntry> {
    tensor
        .nonzero_entries(TENSOR_OUTPUT_TOL)
        .into_iter()
        .map(|(indices, value)| TensorEntry { indices, value })
        .collect()
}

/// Coefficient written as the shortest decimal string that parses back to the
/// same `f64`; numbers are accepted on input too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Text(String),
    Number(f64),
}

impl Coefficient {
    pub fn value(&self) -> Result<f64> {
        match self {
            Coefficient::Number(v) => Ok(*v),
            Coefficient::Text(s) => s.trim().parse().map_err(|_| invalid(format!("bad coefficient {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub settings: Vec<usize>,
    pub coeff: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityFile {
    pub n_parties: usize,
    pub settings_per_party: Vec<usize>,
    pub declared_bound: f64,
    pub terms: Vec<TermEntry>,
}

impl InequalityFile {
    /// Terms in lexicographic setting order.
    pub fn from_inequality(ineq: &InequalityCoefficients) -> Self {
        InequalityFile {
            n_parties: ineq.n_parties(),
            settings_per_party: ineq.settings_per_party().to_vec(),
            declared_bound: ineq.declared_bound(),
            terms: ineq
                .terms()
                .iter()
                .map(|(k, c)| TermEntry { settings: k.clone(), coeff: Coefficient::Text(format!("{c}")) })
                .collect(),
        }
    }

    pub fn to_inequality(&self) -> Result<InequalityCoefficients> {
        if self.n_parties != self.settings_per_party.len() {
            return Err(invalid(format!(
                "n_parties is {} but settings_per_party has {} entries",
                self.n_parties,
                self.settings_per_party.len()
            )));
        }
        let mut terms = BTreeMap::new();
        for t in &self.terms {
            if terms.insert(t.settings.clone(), t.coeff.value()?).is_some() {
                return Err(invalid(format!("duplicate term {:?}", t.settings)));
            }
        }
        InequalityCoefficients::new(self.settings_per_party.clone(), terms, self.declared_bound)
    }
}

pub fn inequality_to_json(ineq: &InequalityCoefficients) -> String {
    serde_json::to_string_pretty(&InequalityFile::from_inequality(ineq)).expect("plain data")
}

pub fn inequality_from_json(text: &str) -> Result<InequalityCoefficients> {
    serde_json::from_str::<InequalityFile>(text)?.to_inequality()
}

pub fn read_inequality(path: &Path) -> Result<InequalityCoefficients> {
    inequality_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_inequality(path: &Path, ineq: &InequalityCoefficients) -> Result<()> {
    std::fs::write(path, inequality_to_json(ineq) + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{family_member, generating_inequality};
    use crate::error::Error;

    #[test]
    fn inequality_round_trip_is_exact() {
        for ineq in [generating_inequality(2).unwrap(), generating_inequality(4).unwrap(), family_member(1234).unwrap()] {
            let text = inequality_to_json(&ineq);
            assert_eq!(inequality_from_json(&text).unwrap(), ineq);
            assert_eq!(inequality_to_json(&inequality_from_json(&text).unwrap()), text);
        }
        let chsh = inequality_to_json(&generating_inequality(2).unwrap());
        assert!(chsh.contains("\"coeff\": \"-1\""));
    }

    #[test]
    fn inequality_accepts_numbers_and_dyadics() {
        let text = r#"{"n_parties":2,"settings_per_party":[1,2],"declared_bound":1.5,
            "terms":[{"settings":[1,1],"coeff":"0.25"},{"settings":[1,2],"coeff":-1.25}]}"#;
        let ineq = inequality_from_json(text).unwrap();
        assert_eq!(ineq.coefficient(&[1, 1]), 0.25);
        assert_eq!(ineq.coefficient(&[1, 2]), -1.25);
        assert!(inequality_to_json(&ineq).contains("\"-1.25\""));
    }

    #[test]
    fn inequality_validation() {
        let dup = r#"{"n_parties":1,"settings_per_party":[2],"declared_bound":1,
            "terms":[{"settings":[1],"coeff":"1"},{"settings":[1],"coeff":"1"}]}"#;
        assert!(matches!(inequality_from_json(dup), Err(Error::InvalidArgument(_))));
        let count = r#"{"n_parties":2,"settings_per_party":[2],"declared_bound":1,"terms":[]}"#;
        assert!(inequality_from_json(count).is_err());
        let text = r#"{"n_parties":1,"settings_per_party":[2],"declared_bound":1,"terms":[{"settings":[1],"coeff":"x"}]}"#;
        assert!(inequality_from_json(text).is_err());
        assert!(matches!(inequality_from_json("{"), Err(Error::Json(_))));
    }

    #[test]
    fn state_formats() {
        let pure = r#"{"n_parties":2,"kind":"pure","amplitudes":[[0,0],[0.7071067811865476,0],[-0.7071067811865476,0],[0,0]]}"#;
        let s = state_from_json(pure).unwrap();
        assert!((s.correlation_tensor().get(&[3, 3]) + 1.0).abs() < 1e-12);
        let dens = serde_json::to_string(&StateFile::density(&s)).unwrap();
        let back = state_from_json(&dens).unwrap();
        assert!((back.rho() - s.rho()).norm() < 1e-15);
        let file = StateFile::pure(1, &[C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        assert!(file.to_state().is_ok());
        assert!(state_from_json(r#"{"n_parties":1,"kind":"pure"}"#).is_err());
        assert!(state_from_json(r#"{"n_parties":1,"kind":"density","matrix":[[[1,0],[0,0]]]}"#).is_err());
        assert!(state_from_json(r#"{"n_parties":1,"kind":"mixed"}"#).is_err());
    }

    #[test]
    fn tensor_output_skips_zeros() {
        let s = state_from_json(r#"{"n_parties":1,"kind":"pure","amplitudes":[[1,0],[0,0]]}"#).unwrap();
        let entries = tensor_entries(&s.correlation_tensor());
        assert_eq!(entries, vec![TensorEntry { indices: vec![0], value: 1.0 }, TensorEntry { indices: vec![3], value: 1.0 }]);
    }
}
