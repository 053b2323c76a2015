use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::flow::{fm_loss_and_grad, TimestepDistribution};
use super::nets::PolicyNets;
use crate::error::{Error, Result};
use crate::nn::AdamW;
use crate::rng;
use crate::toyworld::ChunkRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub ode_steps: usize,
    pub timestep: TimestepDistribution,
}

impl Default for PolicyTrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            batch_size: 64,
            steps: 6000,
            ode_steps: super::DEFAULT_ODE_STEPS,
            timestep: TimestepDistribution::uniform(),
        }
    }
}

impl PolicyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("policy lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("policy batch_size must be at least 1".into()));
        }
        if self.ode_steps == 0 {
            return Err(Error::Config("policy ode_steps must be at least 1".into()));
        }
        self.timestep.validate()
    }
}

/// Records drawn (with replacement) for pretraining step `step`.
pub fn policy_batch(records: &[ChunkRecord], batch_size: usize, seed: u64, step: u64) -> Vec<&ChunkRecord> {
    let mut r = rng::derived(seed, &[step, 0]);
    (0..batch_size)
        .map(|_| &records[r.random_range(0..records.len())])
        .collect()
}

/// Seed for the `(tau, eps)` draws of pretraining step `step`.
pub fn policy_noise_seed(seed: u64, step: u64) -> u64 {
    rng::derive_seed(seed, &[step, 1])
}

/// One AdamW update of encoder and flow head; returns the pre-update loss.
pub fn pretrain_step(
    nets: &mut PolicyNets,
    encoder_opt: &mut AdamW,
    flow_opt: &mut AdamW,
    batch: &[&ChunkRecord],
    dist: &TimestepDistribution,
    noise_seed: u64,
) -> Result<f64> {
    let out = fm_loss_and_grad(nets, batch, dist, noise_seed)?;
    encoder_opt.step(nets.encoder.params_mut(), &out.encoder_grad)?;
    flow_opt.step(nets.flow_head.params_mut(), &out.flow_grad)?;
    Ok(out.loss)
}

/// Runs pretraining steps `start_step..cfg.steps`. Every step's randomness is
/// derived from `(seed, step)`, so resuming at `start_step` with restored
/// parameters and optimizer state continues the exact same trajectory.
pub fn pretrain_policy<F>(
    nets: &mut PolicyNets,
    encoder_opt: &mut AdamW,
    flow_opt: &mut AdamW,
    records: &[ChunkRecord],
    cfg: &PolicyTrainConfig,
    seed: u64,
    start_step: usize,
    mut on_step: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &PolicyNets, &AdamW, &AdamW) -> Result<()>,
{
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::Config("policy training set is empty".into()));
    }
    for step in start_step..cfg.steps {
        let batch = policy_batch(records, cfg.batch_size, seed, step as u64);
        let loss = pretrain_step(
            nets,
            encoder_opt,
            flow_opt,
            &batch,
            &cfg.timestep,
            policy_noise_seed(seed, step as u64),
        )?;
        on_step(step, loss, nets, encoder_opt, flow_opt)?;
    }
    Ok(())
}

/// Mean flow-matching loss over all of `records` with a fixed noise seed.
pub fn heldout_fm_loss(
    nets: &PolicyNets,
    records: &[ChunkRecord],
    dist: &TimestepDistribution,
    seed: u64,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Config("held-out set is empty".into()));
    }
    let refs: Vec<&ChunkRecord> = records.iter().collect();
    Ok(fm_loss_and_grad(nets, &refs, dist, seed)?.loss)
}
