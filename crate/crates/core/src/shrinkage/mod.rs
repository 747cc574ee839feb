//! Low-rank shrinkage of group matrices: the rank-surrogate catalog, scalar
//! proximal maps, weighted singular-value thresholding and the reweighted
//! group denoiser built on top of them.

mod prox;
mod relaxation;
mod svt;

pub use prox::{
    half_threshold, half_threshold_level, half_threshold_with, lp_prox_numeric, scalar_objective, scalar_prox,
    soft_threshold, two_thirds_threshold, two_thirds_threshold_level, two_thirds_threshold_with,
    ClosedFormConstants, CLOSED_FORM_CONSTANTS,
};
pub use relaxation::{
    double_rho_penalty, rho_at, rho_eval, rho_supergradient, update_weights, RelaxationFamily, RelaxationSpec,
    DEFAULT_EPSILON,
};
pub use svt::{
    denoise_group, denoise_group_fast, inner_objectives, reweighted_shrink, shrink_values, surrogate_objective,
    weighted_sv_prox, GramSvd, GroupSvd, SingularSpectrum,
};
