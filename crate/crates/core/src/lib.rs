//! Clustering high-dimensional Gaussian mixtures with the exponential
//! dot-product kernel `k(x, y) = exp(<x, y> / p)`.
//!
//! The crate covers the full simulation loop:
//!
//! * [`model`] samples planted, balanced Gaussian mixtures.
//! * [`kernel`] builds the Gram matrix, the population surrogate and the
//!   first/second order residual matrices.
//! * [`metrics`] measures partitions against the ground truth (overlap
//!   matrix, misclassification rate, kernel k-means objective).
//! * [`kmeans`] maximises the kernel k-means objective, exactly for tiny
//!   instances and by a balanced Lloyd heuristic otherwise.
//! * [`sdp`] solves the semidefinite relaxation, estimates the
//!   `inf -> 1` operator norm and evaluates the Grothendieck certificate.
//! * [`rounding`] turns a relaxed solution back into a partition.
//! * [`thresholds`] evaluates the closed-form phase-transition boundaries.
//! * [`concentration`] holds the Monte Carlo checks of the polynomial
//!   statistics that drive the analysis.
//! * [`experiment`] and [`phase`] run single sweep trials and reduce sweep
//!   results into phase tables.
//!
//! Everything here is `no_std` (with `alloc`); file formats, CLI and
//! parallel sweeps live in the companion `kclust-sim` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assign;
pub mod concentration;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod phase;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod thresholds;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Dataset, ModelParams, Partition};
