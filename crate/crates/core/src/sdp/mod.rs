//! Semidefinite relaxation of balanced kernel k-means, `inf -> 1` norm
//! oracles and the Grothendieck-type error certificate.

mod certificate;
mod norm;
mod solver;

pub use certificate::{
    elliptope_ascent, grothendieck_certificate, norm_with_mode, phi_correction_scale, phi_leading,
    random_feasible_psd, CertificateReport, NormMode, GROTHENDIECK_CONSTANT,
};
pub use norm::{alternating_ascent, inf_to_one_norm_exact, inf_to_one_norm_lower, sign_bilinear, NormEstimate, DEFAULT_NORM_CAP};
pub use solver::{feasibility, solve_sdp, Feasibility, SdpOptions, SdpSolution};
