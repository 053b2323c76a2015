use super::sigma::SigmaNet;
use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::fm_policy::{initial_noise, PolicyNets};
use crate::nn::SIGMA_FLOOR;
use crate::rng;
use crate::toyworld::Observation;

/// `0.5 * ln(2 * pi)`.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

pub const RATIO_MIN: f64 = 1e-6;
pub const RATIO_MAX: f64 = 1e6;

/// Everything needed to re-score one stochastic rollout later.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    /// `a^0 .. a^K`, unclamped.
    pub states: Vec<ActionChunk>,
    /// `mu_0 .. mu_{K-1}`; `states[k + 1]` was drawn around `means[k]`.
    pub means: Vec<ActionChunk>,
    pub sigmas: Vec<ActionChunk>,
    pub step_logps: Vec<f64>,
    /// Average of `step_logps`; `a^0` contributes no term.
    pub mean_logp: f64,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub context: u64,
}

impl RolloutTrace {
    pub fn k_steps(&self) -> usize {
        self.step_logps.len()
    }

    /// Final state clamped to the action bounds, as executed.
    pub fn executed_chunk(&self) -> ActionChunk {
        self.states.last().expect("trace has states").clamped()
    }
}

/// Log-density of `x` under `N(mu, diag(sigma^2))`.
pub fn gaussian_logpdf(x: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    x.iter()
        .zip(mu)
        .zip(sigma)
        .map(|((x, m), s)| {
            let d = (x - m) / s;
            -HALF_LN_2PI - s.ln() - 0.5 * d * d
        })
        .sum()
}

fn check_sigmas(sigma: &[f64]) -> Result<()> {
    // The softplus output is >= SIGMA_FLOOR in exact arithmetic; allow for
    // the rounding of `softplus(x) + floor` when softplus underflows.
    match sigma.iter().find(|&&s| !(s >= SIGMA_FLOOR * (1.0 - 1e-12))) {
        Some(s) => Err(Error::Invariant(format!("sigma {s} below floor {SIGMA_FLOOR}"))),
        None => Ok(()),
    }
}

/// Stochastic Euler sampler: `a^{k+1} ~ N(a^k + delta * v(z, s, a^k, k delta), diag(sigma_k^2))`.
///
/// `a^0` is drawn exactly as in the ODE sampler for the same seed; the noise
/// of step `k` comes from a stream derived from `(seed, k + 1)`.
pub fn sample_sde(
    nets: &PolicyNets,
    sigma_net: &SigmaNet,
    obs: &Observation,
    k_steps: usize,
    seed: u64,
    context: u64,
) -> Result<RolloutTrace> {
    let z = nets.encode(obs)?;
    sample_sde_from(nets, sigma_net, z, obs.state.to_vec(), k_steps, seed, context)
}

/// [`sample_sde`] with a precomputed latent.
pub fn sample_sde_from(
    nets: &PolicyNets,
    sigma_net: &SigmaNet,
    z: Vec<f64>,
    s: Vec<f64>,
    k_steps: usize,
    seed: u64,
    context: u64,
) -> Result<RolloutTrace> {
    if k_steps == 0 {
        return Err(Error::Config("SDE sampler needs at least one step".into()));
    }
    let (h, d) = (nets.horizon(), nets.action_dim());
    let delta = 1.0 / k_steps as f64;
    let mut states = vec![initial_noise(nets, seed)];
    let mut means = Vec::with_capacity(k_steps);
    let mut sigmas = Vec::with_capacity(k_steps);
    let mut step_logps = Vec::with_capacity(k_steps);
    for k in 0..k_steps {
        let a = states.last().unwrap();
        let v = nets.velocity(&z, &s, a.as_slice(), k as f64 * delta)?;
        let mu: Vec<f64> = a.as_slice().iter().zip(&v).map(|(a, v)| a + delta * v).collect();
        let sigma = sigma_net.sigma(&z, &s, k, k_steps)?;
        check_sigmas(&sigma)?;
        let mut r = rng::derived(seed, &[k as u64 + 1]);
        let noise = rng::standard_normals(&mut r, mu.len());
        let next: Vec<f64> = mu
            .iter()
            .zip(&sigma)
            .zip(&noise)
            .map(|((m, s), e)| m + s * e)
            .collect();
        step_logps.push(gaussian_logpdf(&next, &mu, &sigma));
        states.push(ActionChunk::from_vec(h, d, next)?);
        means.push(ActionChunk::from_vec(h, d, mu)?);
        sigmas.push(ActionChunk::from_vec(h, d, sigma)?);
    }
    let mean_logp = step_logps.iter().sum::<f64>() / k_steps as f64;
    Ok(RolloutTrace {
        states,
        means,
        sigmas,
        step_logps,
        mean_logp,
        z,
        s,
        context,
    })
}

fn check_trace(nets: &PolicyNets, trace: &RolloutTrace) -> Result<usize> {
    let k_steps = trace.k_steps();
    if k_steps == 0 || trace.states.len() != k_steps + 1 {
        return Err(Error::Shape(format!(
            "trace has {} states for {} steps",
            trace.states.len(),
            k_steps
        )));
    }
    for st in &trace.states {
        crate::error::shape_check("trace state", nets.chunk_width(), st.len())?;
    }
    Ok(k_steps)
}

/// Mean per-step log-probability of the recorded states under the current
/// parameters, at the trace's recorded latent and state.
pub fn logprob_under(nets: &PolicyNets, sigma_net: &SigmaNet, trace: &RolloutTrace) -> Result<f64> {
    let k_steps = check_trace(nets, trace)?;
    let delta = 1.0 / k_steps as f64;
    let mut total = 0.0;
    for k in 0..k_steps {
        let a = trace.states[k].as_slice();
        let v = nets.velocity(&trace.z, &trace.s, a, k as f64 * delta)?;
        let mu: Vec<f64> = a.iter().zip(&v).map(|(a, v)| a + delta * v).collect();
        let sigma = sigma_net.sigma(&trace.z, &trace.s, k, k_steps)?;
        total += gaussian_logpdf(trace.states[k + 1].as_slice(), &mu, &sigma);
    }
    Ok(total / k_steps as f64)
}

/// Adds `weight * d(mean_logp)/d(theta)` into `flow_grad` and the matching
/// sigma-net gradient into `sigma_grad`; returns `mean_logp`.
pub fn logprob_grad(
    nets: &PolicyNets,
    sigma_net: &SigmaNet,
    trace: &RolloutTrace,
    weight: f64,
    flow_grad: &mut [f64],
    sigma_grad: &mut [f64],
) -> Result<f64> {
    let k_steps = check_trace(nets, trace)?;
    let delta = 1.0 / k_steps as f64;
    let w = weight / k_steps as f64;
    let mut total = 0.0;
    for k in 0..k_steps {
        let a = trace.states[k].as_slice();
        let x = trace.states[k + 1].as_slice();
        let v_tape = nets.velocity_tape(&trace.z, &trace.s, a, k as f64 * delta)?;
        let s_tape = sigma_net.sigma_tape(&trace.z, &trace.s, k, k_steps)?;
        let sigma = s_tape.output();
        let mut g_v = Vec::with_capacity(x.len());
        let mut g_s = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mu = a[i] + delta * v_tape.output()[i];
            let (r, s) = (x[i] - mu, sigma[i]);
            let d = r / s;
            total += -HALF_LN_2PI - s.ln() - 0.5 * d * d;
            g_v.push(w * delta * r / (s * s));
            g_s.push(w * (d * d - 1.0) / s);
        }
        nets.flow_head.backward_tape(&v_tape, &g_v, flow_grad)?;
        sigma_net.net.backward_tape(&s_tape, &g_s, sigma_grad)?;
    }
    Ok(total / k_steps as f64)
}

/// `exp(new - old)`, clamped to `[RATIO_MIN, RATIO_MAX]`.
pub fn policy_ratio(new_logp: f64, old_logp: f64) -> Result<f64> {
    if !new_logp.is_finite() || !old_logp.is_finite() {
        return Err(Error::Numeric(format!(
            "log-probabilities must be finite (new {new_logp}, old {old_logp})"
        )));
    }
    Ok((new_logp - old_logp).exp().clamp(RATIO_MIN, RATIO_MAX))
}
