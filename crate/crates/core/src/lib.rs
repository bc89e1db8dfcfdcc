//! Multisetting multipartite Bell inequalities for qubits.
//!
//! The crate is organised around the chain that connects a quantum state to a
//! local-realism test:
//!
//! - [`quantum`]: N-qubit density matrices, Pauli correlation tensors and
//!   white-noise admixture.
//! - [`construct`]: sign-function identities and the coefficient tensors of the
//!   `2^{N-1} x 2^{N-1} x 2^{N-2} x ... x 2` inequalities built from them.
//! - [`oracle`]: exhaustive local-realistic bounds, product vertices of the
//!   correlation polytope, and exact-rank tightness certificates.
//! - [`criterion`]: violation criteria on correlation tensors (closed-form two
//!   party, hierarchical multisetting, standard two-setting comparisons) and
//!   direct quantum maxima of coefficient tensors.
//! - [`catalog`]: generalized GHZ, W and the four-qubit Ψ state with closed-form
//!   tensors.
//! - [`io`]: JSON file formats shared with the command-line tool.

pub mod catalog;
pub mod construct;
pub mod criterion;
pub mod error;
pub mod io;
pub mod optim;
pub mod oracle;
pub mod quantum;
pub mod rank;

pub use error::{Error, Result};
