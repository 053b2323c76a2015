use rand::distr::Open01;
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nets::{PolicyNets, LATENT_DIM};
use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::toyworld::ChunkRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestepKind {
    Uniform,
    Beta,
}

/// Distribution of the flow-matching time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimestepDistribution {
    pub kind: TimestepKind,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TimestepDistribution {
    fn default() -> Self {
        Self::uniform()
    }
}

impl TimestepDistribution {
    pub fn uniform() -> Self {
        Self {
            kind: TimestepKind::Uniform,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        let d = Self {
            kind: TimestepKind::Beta,
            alpha,
            beta,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "timestep distribution needs positive alpha and beta, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Draws `tau` in the open interval `(0, 1)`.
    pub fn sample(&self, rng: &mut Rng) -> Result<f64> {
        let tau: f64 = match self.kind {
            TimestepKind::Uniform => rng.sample(Open01),
            TimestepKind::Beta => {
                let d = Beta::new(self.alpha, self.beta)
                    .map_err(|e| Error::Config(format!("invalid beta distribution: {e}")))?;
                d.sample(rng)
            }
        };
        // Beta draws can round onto the endpoints for extreme parameters.
        Ok(tau.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
    }
}

/// Returns `(a_tau, u)` with `a_tau = tau * a + (1 - tau) * eps` and `u = a - eps`.
pub fn interpolate(a: &ActionChunk, eps: &ActionChunk, tau: f64) -> Result<(ActionChunk, ActionChunk)> {
    a.same_shape(eps)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
    }
    let (h, d) = (a.horizon(), a.action_dim());
    let a_tau = a
        .as_slice()
        .iter()
        .zip(eps.as_slice())
        .map(|(&x, &e)| tau * x + (1.0 - tau) * e)
        .collect();
    let u = a.as_slice().iter().zip(eps.as_slice()).map(|(&x, &e)| x - e).collect();
    Ok((ActionChunk::from_vec(h, d, a_tau)?, ActionChunk::from_vec(h, d, u)?))
}

/// Loss and gradients of one flow-matching evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FmLoss {
    pub loss: f64,
    pub encoder_grad: Vec<f64>,
    pub flow_grad: Vec<f64>,
}

/// The `(tau, eps)` draw used for record `index` of a batch under `seed`.
pub fn fm_noise(
    dist: &TimestepDistribution,
    width: usize,
    seed: u64,
    index: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut r = rng::derived(seed, &[index as u64]);
    let tau = dist.sample(&mut r)?;
    let eps = rng::standard_normals(&mut r, width);
    Ok((tau, eps))
}

/// Mean squared flow-matching error over the batch and all chunk entries,
/// with gradients for both networks. Record `i` draws its `(tau, eps)` from
/// `seed` and `i` only.
pub fn fm_loss_and_grad(
    nets: &PolicyNets,
    batch: &[&ChunkRecord],
    dist: &TimestepDistribution,
    seed: u64,
) -> Result<FmLoss> {
    if batch.is_empty() {
        return Err(Error::Config("flow-matching batch is empty".into()));
    }
    let width = nets.chunk_width();
    let scale = 1.0 / (batch.len() * width) as f64;
    let per_record: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let (tau, eps) = fm_noise(dist, width, seed, i)?;
            let eps = ActionChunk::from_vec(nets.horizon(), nets.action_dim(), eps)?;
            let (a_tau, u) = interpolate(&rec.actions, &eps, tau)?;
            let z_tape = nets.encode_tape(&rec.observation())?;
            let v_tape = nets.velocity_tape(z_tape.output(), &rec.state, a_tau.as_slice(), tau)?;
            let resid: Vec<f64> = v_tape
                .output()
                .iter()
                .zip(u.as_slice())
                .map(|(v, u)| v - u)
                .collect();
            let loss: f64 = resid.iter().map(|r| r * r).sum();
            let out_grad: Vec<f64> = resid.iter().map(|r| 2.0 * r * scale).collect();
            let mut flow_grad = vec![0.0; nets.flow_head.param_count()];
            let in_grad = nets.flow_head.backward_tape(&v_tape, &out_grad, &mut flow_grad)?;
            let mut encoder_grad = vec![0.0; nets.encoder.param_count()];
            nets.encoder
                .backward_tape(&z_tape, &in_grad[..LATENT_DIM], &mut encoder_grad)?;
            Ok((loss, encoder_grad, flow_grad))
        })
        .collect();

    let mut out = FmLoss {
        loss: 0.0,
        encoder_grad: vec![0.0; nets.encoder.param_count()],
        flow_grad: vec![0.0; nets.flow_head.param_count()],
    };
    for r in per_record {
        let (l, eg, fg) = r?;
        out.loss += l;
        crate::nn::add_assign(&mut out.encoder_grad, &eg);
        crate::nn::add_assign(&mut out.flow_grad, &fg);
    }
    out.loss *= scale;
    if !out.loss.is_finite() {
        return Err(Error::Numeric(format!("flow-matching loss is {}", out.loss)));
    }
    Ok(out)
}
