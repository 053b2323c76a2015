use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reward::RewardContext;
use crate::error::{Error, Result};
use crate::fm_policy::{fm_loss_and_grad, PolicyNets, TimestepDistribution};
use crate::nn::add_assign;
use crate::sde_policy::{logprob_grad, policy_entropy_grad, policy_ratio, RolloutTrace, SigmaNet};
use crate::toyworld::ChunkRecord;

/// Returns `(mean, rewards - mean)`. No variance normalization.
pub fn group_advantages(rewards: &[f64]) -> Result<(f64, Vec<f64>)> {
    if rewards.len() < 2 {
        return Err(Error::Config(format!(
            "a group needs at least 2 rollouts, got {}",
            rewards.len()
        )));
    }
    let baseline = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok((baseline, rewards.iter().map(|r| r - baseline).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipForm {
    /// `clip(r, 1 - eps, 1 + eps) * A`.
    PaperClipOnly,
    /// `min(r * A, clip(r, 1 - eps, 1 + eps) * A)`.
    PpoMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClipConfig {
    pub epsilon: f64,
    pub form: ClipForm,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            form: ClipForm::PaperClipOnly,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "clip epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn clip(&self, r: f64) -> f64 {
        r.clamp(1.0 - self.epsilon, 1.0 + self.epsilon)
    }

    pub fn is_clipped(&self, r: f64) -> bool {
        r < 1.0 - self.epsilon || r > 1.0 + self.epsilon
    }

    /// Surrogate value and its derivative with respect to `r`.
    pub fn surrogate(&self, r: f64, adv: f64) -> (f64, f64) {
        let clipped = self.clip(r) * adv;
        let d_clipped = if self.is_clipped(r) { 0.0 } else { adv };
        match self.form {
            ClipForm::PaperClipOnly => (clipped, d_clipped),
            ClipForm::PpoMin => {
                let raw = r * adv;
                if raw <= clipped {
                    (raw, adv)
                } else {
                    (clipped, d_clipped)
                }
            }
        }
    }
}

/// `N` rollouts from one context with their rewards and advantages.
#[derive(Debug, Clone)]
pub struct GroupBatch {
    pub context: RewardContext,
    pub traces: Vec<RolloutTrace>,
    pub rewards: Vec<f64>,
    pub baseline: f64,
    pub advantages: Vec<f64>,
}

impl GroupBatch {
    pub fn new(context: RewardContext, traces: Vec<RolloutTrace>, rewards: Vec<f64>) -> Result<Self> {
        if traces.len() != rewards.len() {
            return Err(Error::Shape(format!(
                "{} traces but {} rewards",
                traces.len(),
                rewards.len()
            )));
        }
        let (baseline, advantages) = group_advantages(&rewards)?;
        Ok(Self {
            context,
            traces,
            rewards,
            baseline,
            advantages,
        })
    }
}

/// Weights of the three objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoWeights {
    pub clip: ClipConfig,
    pub lambda_mse: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrpoLoss {
    /// `surrogate_loss + lambda_mse * aux_mse - entropy_coef * entropy`.
    pub total: f64,
    /// `-mean(surrogate)` over every trace of every group.
    pub surrogate_loss: f64,
    pub aux_mse: f64,
    /// Mean policy entropy over the groups' contexts.
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub flow_grad: Vec<f64>,
    pub sigma_grad: Vec<f64>,
}

/// The clipped group-relative objective plus auxiliary flow-matching loss
/// on `sft_batch` and an entropy bonus, with gradients for the flow head
/// and the sigma net. The encoder is treated as frozen: traces carry their
/// latents, and the auxiliary loss's encoder gradient is discarded.
pub fn grpo_loss_and_grad(
    nets: &PolicyNets,
    sigma_net: &SigmaNet,
    groups: &[GroupBatch],
    weights: &GrpoWeights,
    sft_batch: &[&ChunkRecord],
    timestep: &TimestepDistribution,
    fm_seed: u64,
) -> Result<GrpoLoss> {
    if groups.is_empty() {
        return Err(Error::Config("no rollout groups".into()));
    }
    let n_traces: usize = groups.iter().map(|g| g.traces.len()).sum();
    let inv_n = 1.0 / n_traces as f64;
    let n_flow = nets.flow_head.param_count();
    let n_sigma = sigma_net.net.param_count();

    let jobs: Vec<(&RolloutTrace, f64)> = groups
        .iter()
        .flat_map(|g| g.traces.iter().zip(g.advantages.iter().copied()))
        .collect();
    // Each trace: surrogate s(r) with r = exp(l - l_old); d s / d l = s'(r) * r.
    let per_trace: Vec<Result<(f64, f64, bool, Vec<f64>, Vec<f64>)>> = jobs
        .par_iter()
        .map(|&(trace, adv)| {
            let mut fg = vec![0.0; n_flow];
            let mut sg = vec![0.0; n_sigma];
            let new_logp = crate::sde_policy::logprob_under(nets, sigma_net, trace)?;
            let r = policy_ratio(new_logp, trace.mean_logp)?;
            let (value, d_r) = weights.clip.surrogate(r, adv);
            let w = -inv_n * d_r * r;
            if w != 0.0 {
                logprob_grad(nets, sigma_net, trace, w, &mut fg, &mut sg)?;
            }
            Ok((value, r, weights.clip.is_clipped(r), fg, sg))
        })
        .collect();

    let mut flow_grad = vec![0.0; n_flow];
    let mut sigma_grad = vec![0.0; n_sigma];
    let (mut surrogate, mut ratio_sum, mut clipped) = (0.0, 0.0, 0usize);
    for item in per_trace {
        let (value, r, c, fg, sg) = item?;
        surrogate += value;
        ratio_sum += r;
        clipped += c as usize;
        add_assign(&mut flow_grad, &fg);
        add_assign(&mut sigma_grad, &sg);
    }
    let surrogate_loss = -surrogate * inv_n;

    let k_steps = groups[0].traces.first().map(|t| t.k_steps()).unwrap_or(0);
    let inv_g = 1.0 / groups.len() as f64;
    let mut entropy = 0.0;
    for g in groups {
        let t = g
            .traces
            .first()
            .ok_or_else(|| Error::Config("empty rollout group".into()))?;
        entropy += policy_entropy_grad(
            sigma_net,
            &t.z,
            &t.s,
            k_steps,
            -weights.entropy_coef * inv_g,
            &mut sigma_grad,
        )?;
    }
    entropy *= inv_g;

    let mut aux_mse = 0.0;
    if weights.lambda_mse != 0.0 && !sft_batch.is_empty() {
        let fm = fm_loss_and_grad(nets, sft_batch, timestep, fm_seed)?;
        aux_mse = fm.loss;
        crate::nn::axpy(weights.lambda_mse, &fm.flow_grad, &mut flow_grad);
    }

    let total = surrogate_loss + weights.lambda_mse * aux_mse - weights.entropy_coef * entropy;
    if !total.is_finite() || flow_grad.iter().chain(&sigma_grad).any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("GRPO objective is not finite (total {total})")));
    }
    Ok(GrpoLoss {
        total,
        surrogate_loss,
        aux_mse,
        entropy,
        mean_ratio: ratio_sum * inv_n,
        clip_fraction: clipped as f64 * inv_n,
        flow_grad,
        sigma_grad,
    })
}
