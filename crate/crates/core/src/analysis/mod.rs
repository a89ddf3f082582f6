//! Reference solutions, rate certificates, contraction verification and
//! checks on mixing / U-V assignments.

mod certificate;
mod conditions;
mod contraction;
mod reference;
pub mod search;

pub use certificate::{
    delta_admm_branches, delta_branches, gamma_upper, lift, maximize_over_tau, mu_g, mu_g_branches,
    rate_certificate, rate_certificate_admm, rate_certificate_with, seminorm, GammaChoice,
    RateCertificate, LOG_TAU_RANGE, SEARCH_GRID,
};
pub use conditions::{
    check_mixing, check_uv_conditions, ConditionCheck, MixingReport, UvReport, CONDITION_TOL,
};
pub use contraction::{
    verify_contraction, ContractionMonitor, ContractionReport, DistanceNorm, Violation,
};
pub use reference::{
    minimize_sum, reference_solution, DualRecovery, ReferenceSolution, REFERENCE_TOL,
};
