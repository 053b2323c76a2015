//! Conditioning encoder, flow-matching head and its pretraining objective,
//! and the deterministic Euler sampler.

mod flow;
mod nets;
mod sampling;
mod train;

pub use flow::{fm_loss_and_grad, fm_noise, interpolate, FmLoss, TimestepDistribution, TimestepKind};
pub use nets::{
    encoder_spec, flow_head_spec, PolicyNets, ENCODER_HIDDEN, ENCODER_OPT_SECTION, ENCODER_SECTION,
    FLOW_HEAD_OPT_SECTION, FLOW_HEAD_SECTION, FLOW_HIDDEN, LATENT_DIM, TIME_EMBED_DIM,
};
pub use sampling::{initial_noise, integrate_ode, sample_ode, OdePolicy, OdeSample, DEFAULT_ODE_STEPS};
pub use train::{
    heldout_fm_loss, policy_batch, policy_noise_seed, pretrain_policy, pretrain_step, PolicyTrainConfig,
};
