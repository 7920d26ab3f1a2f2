//! Potential theory on star domains: closed-form ball potentials,
//! walk-on-spheres harmonic measure, the Poisson kernel, and the Green
//! function with its gradient.

mod ball;
mod constants;
mod identities;
mod kernel;
mod wos;

pub use ball::{
    ball_green, ball_green_gradient, ball_green_gradient_magnitude, ball_poisson_kernel, fundamental_solution,
};
pub use constants::DimensionConstants;
pub use identities::{
    flux_identity_check, growth_constant, min_resolvable_width, riesz_mean_identity_check,
    sup_gradient_near_boundary, GradientShellRow, GrowthConstant, IdentityCheck,
};
pub use kernel::{
    default_cap_radius, default_sites, estimate_poisson_kernel, KernelField, KernelSite, MIN_EXPECTED_EXITS,
    MIN_OBSERVED_EXITS,
};
pub use wos::{
    estimate_green, estimate_green_gradient, wos_harmonic_measure, ExitRecord, GreenSample,
    HarmonicMeasureEstimate, WosConfig, CENSOR_LIMIT,
};
