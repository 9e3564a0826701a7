//! Dense linear algebra used by the solvers.

mod eigen;
mod lanczos;
mod matrix;
mod psd;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use lanczos::{lanczos_positive, LanczosOutcome};
pub use matrix::{dot, Matrix};
pub use psd::{lambda_min, project_psd, PsdProjector};
