use rand::Rng as _;
use rayon::prelude::*;

use super::config::EnvConfig;
use super::dataset::Observation;
use super::env::{reset, step, EnvState, Instruction, PerturbSpec};
use super::expert::expert_action;
use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::rng;

/// Anything that maps an observation to an action chunk. `seed` is derived
/// per (episode, query) so stochastic samplers stay reproducible.
pub trait ChunkPolicy: Sync {
    fn sample_chunk(&self, obs: &Observation, seed: u64) -> Result<ActionChunk>;
}

impl<F> ChunkPolicy for F
where
    F: Fn(&Observation, u64) -> Result<ActionChunk> + Sync,
{
    fn sample_chunk(&self, obs: &Observation, seed: u64) -> Result<ActionChunk> {
        self(obs, seed)
    }
}

/// Plans a chunk by simulating the scripted expert forward from the
/// observed state, with the goal taken as the instruction's nominal goal.
#[derive(Debug, Clone)]
pub struct ExpertChunkPolicy {
    pub cfg: EnvConfig,
}

impl ChunkPolicy for ExpertChunkPolicy {
    fn sample_chunk(&self, obs: &Observation, _seed: u64) -> Result<ActionChunk> {
        let mut s = EnvState::from_state_vector(&obs.state, obs.instruction.nominal_goal())?;
        let mut rows = Vec::with_capacity(self.cfg.chunk_len);
        for _ in 0..self.cfg.chunk_len {
            let a = expert_action(&self.cfg, &s);
            s = step(&self.cfg, &s, &a);
            rows.push(a.to_vec());
        }
        ActionChunk::from_rows(&rows)
    }
}

/// Uniform actions in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct RandomChunkPolicy {
    pub cfg: EnvConfig,
}

impl ChunkPolicy for RandomChunkPolicy {
    fn sample_chunk(&self, _obs: &Observation, seed: u64) -> Result<ActionChunk> {
        let mut r = rng::seeded(seed);
        let values = (0..self.cfg.chunk_width())
            .map(|_| r.random_range(-1.0..=1.0))
            .collect();
        ActionChunk::from_vec(self.cfg.chunk_len, self.cfg.action_dim, values)
    }
}

/// Runs one episode with chunked open-loop execution; returns whether it
/// succeeded.
pub fn run_episode(
    policy: &dyn ChunkPolicy,
    cfg: &EnvConfig,
    perturb: &PerturbSpec,
    episode: usize,
    seed: u64,
) -> Result<bool> {
    let instruction = Instruction::for_index(episode);
    let mut state = reset(cfg, instruction, perturb, rng::derive_seed(seed, &[episode as u64]));
    let mut query = 0u64;
    while state.step_index < cfg.max_episode_steps {
        let obs = Observation::of(&state, instruction, cfg);
        let chunk = policy
            .sample_chunk(&obs, rng::derive_seed(seed, &[episode as u64, query + 1]))?
            .clamped();
        query += 1;
        for a in chunk.rows().take(cfg.chunk_len) {
            state = step(cfg, &state, a);
            if state.is_success(cfg) {
                return Ok(true);
            }
            if state.step_index >= cfg.max_episode_steps {
                break;
            }
        }
    }
    Ok(false)
}

/// Fraction of `n_episodes` that succeed. Episode `e` runs instruction
/// `e mod 2`, so both tasks are pooled.
pub fn evaluate_success(
    policy: &dyn ChunkPolicy,
    cfg: &EnvConfig,
    perturb: &PerturbSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<f64> {
    if n_episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let outcomes = (0..n_episodes)
        .into_par_iter()
        .map(|e| run_episode(policy, cfg, perturb, e, seed))
        .collect::<Result<Vec<bool>>>()?;
    Ok(outcomes.iter().filter(|&&ok| ok).count() as f64 / n_episodes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toyworld::env::{Magnitude, PerturbMode};

    #[test]
    fn expert_chunks_solve_unperturbed_tasks() {
        let cfg = EnvConfig::default();
        let sr = evaluate_success(&ExpertChunkPolicy { cfg: cfg.clone() }, &cfg, &PerturbSpec::none(), 20, 3).unwrap();
        assert_eq!(sr, 1.0);
    }

    #[test]
    fn random_policy_rarely_succeeds() {
        let cfg = EnvConfig::default();
        let sr = evaluate_success(&RandomChunkPolicy { cfg: cfg.clone() }, &cfg, &PerturbSpec::none(), 50, 3).unwrap();
        assert!(sr < 0.2, "{sr}");
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        let cfg = EnvConfig::default();
        let p = RandomChunkPolicy { cfg: cfg.clone() };
        assert!(evaluate_success(&p, &cfg, &PerturbSpec::none(), 0, 0).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = EnvConfig::default();
        let p = RandomChunkPolicy { cfg: cfg.clone() };
        let perturb = PerturbSpec::preset(PerturbMode::Combined, Magnitude::Major);
        let a = evaluate_success(&p, &cfg, &perturb, 30, 8).unwrap();
        let b = evaluate_success(&p, &cfg, &perturb, 30, 8).unwrap();
        assert_eq!(a, b);
    }
}
