//! Stochastic extension of the Euler sampler: a learned per-step standard
//! deviation turns each integration step into a Gaussian transition with a
//! tractable log-density.

mod sigma;
mod trace;

pub use sigma::{
    gaussian_entropy, policy_entropy, policy_entropy_grad, sigma_spec, sigma_to_preactivation,
    SigmaNet, DEFAULT_SIGMA_INIT, SIGMA_HIDDEN, SIGMA_SECTION,
};
pub use trace::{
    gaussian_logpdf, logprob_grad, logprob_under, policy_ratio, sample_sde, sample_sde_from,
    RolloutTrace, RATIO_MAX, RATIO_MIN,
};
