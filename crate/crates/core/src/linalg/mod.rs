//! Dense complex linear algebra: norms, log-determinants and the complex
//! Schur form.

mod lu;
mod matrix;
mod schur;

pub(crate) use lu::logabsdet_in_place;
pub use lu::lu_logabsdet;
pub use matrix::{norm2, normalized_trace, trace_of_product, ComplexMatrix};
pub use schur::{eigenvalues, schur, SchurForm, DEFLATION_TOL, SWEEPS_PER_ROW};
