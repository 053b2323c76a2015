use super::nets::PolicyNets;
use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::rng;
use crate::toyworld::{ChunkPolicy, Observation};

pub const DEFAULT_ODE_STEPS: usize = 10;

/// Result of deterministic Euler integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    /// Final chunk clamped to `[-1, 1]`, ready for execution.
    pub chunk: ActionChunk,
    /// Final integration state before clamping.
    pub raw: ActionChunk,
}

/// Initial noise `a^0 ~ N(0, I)` for a given seed.
pub fn initial_noise(nets: &PolicyNets, seed: u64) -> ActionChunk {
    let mut r = rng::seeded(seed);
    let v = rng::standard_normals(&mut r, nets.chunk_width());
    ActionChunk::from_vec(nets.horizon(), nets.action_dim(), v).expect("width matches")
}

/// Forward Euler from `a0` over `k_steps` steps of size `1 / k_steps`.
pub fn integrate_ode(
    nets: &PolicyNets,
    z: &[f64],
    s: &[f64],
    a0: &ActionChunk,
    k_steps: usize,
) -> Result<ActionChunk> {
    if k_steps == 0 {
        return Err(Error::Config("ODE sampler needs at least one step".into()));
    }
    let delta = 1.0 / k_steps as f64;
    let mut a = a0.clone();
    for k in 0..k_steps {
        let v = nets.velocity(z, s, a.as_slice(), k as f64 * delta)?;
        for (x, dv) in a.as_mut_slice().iter_mut().zip(&v) {
            *x += delta * dv;
        }
    }
    Ok(a)
}

pub fn sample_ode(nets: &PolicyNets, obs: &Observation, k_steps: usize, seed: u64) -> Result<OdeSample> {
    let z = nets.encode(obs)?;
    let raw = integrate_ode(nets, &z, &obs.state, &initial_noise(nets, seed), k_steps)?;
    Ok(OdeSample {
        chunk: raw.clamped(),
        raw,
    })
}

/// The deterministic ODE sampler as an evaluation policy.
#[derive(Debug, Clone, Copy)]
pub struct OdePolicy<'a> {
    pub nets: &'a PolicyNets,
    pub k_steps: usize,
}

impl ChunkPolicy for OdePolicy<'_> {
    fn sample_chunk(&self, obs: &Observation, seed: u64) -> Result<ActionChunk> {
        Ok(sample_ode(self.nets, obs, self.k_steps, seed)?.chunk)
    }
}
