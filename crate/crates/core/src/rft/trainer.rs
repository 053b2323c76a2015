use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grpo::{grpo_loss_and_grad, ClipConfig, GroupBatch, GrpoWeights};
use super::reward::{verified_reward, RewardConfig, RewardContext};
use crate::error::{Error, Result};
use crate::fm_policy::{OdePolicy, PolicyNets, TimestepDistribution, DEFAULT_ODE_STEPS};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{AdamW, AdamWConfig};
use crate::rng;
use crate::sde_policy::{sample_sde_from, RolloutTrace, SigmaNet, DEFAULT_SIGMA_INIT};
use crate::toyworld::{evaluate_success, ChunkRecord, EnvConfig, Magnitude, PerturbMode, PerturbSpec};
use crate::world_model::{PerceptualProxy, WorldModel};

pub const FLOW_OPT_SECTION: &str = "flow_head_rft_opt";
pub const SIGMA_OPT_SECTION: &str = "sigma_opt";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RftConfig {
    pub group_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub sigma_lr: f64,
    pub lambda_mse: f64,
    pub entropy_coef: f64,
    pub clip: ClipConfig,
    pub batch_contexts: usize,
    /// Euler steps `K` of the stochastic sampler.
    pub k_steps: usize,
    /// Initial standard deviation of a newly created sigma net.
    pub sigma_init: f64,
    /// Unperturbed success rate is measured every `eval_every` steps (0 = never).
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// Adds elapsed wall-clock milliseconds to each metrics row. Off by
    /// default so metrics files are reproducible byte for byte.
    pub log_wall_time: bool,
}

impl Default for RftConfig {
    fn default() -> Self {
        Self {
            group_size: 16,
            steps: 400,
            lr: 1e-4,
            sigma_lr: 1e-3,
            lambda_mse: 0.01,
            entropy_coef: 0.003,
            clip: ClipConfig::default(),
            batch_contexts: 16,
            k_steps: DEFAULT_ODE_STEPS,
            sigma_init: DEFAULT_SIGMA_INIT,
            eval_every: 50,
            eval_episodes: 100,
            eval_seed: 2024,
            log_wall_time: false,
        }
    }
}

impl RftConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.group_size < 2 {
            return bad(format!("rft.group_size must be at least 2, got {}", self.group_size));
        }
        if self.batch_contexts == 0 {
            return bad("rft.batch_contexts must be at least 1".into());
        }
        if self.k_steps == 0 {
            return bad("rft.k_steps must be at least 1".into());
        }
        if self.eval_episodes == 0 {
            return bad("rft.eval_episodes must be at least 1".into());
        }
        for (name, v) in [
            ("lr", self.lr),
            ("sigma_lr", self.sigma_lr),
            ("lambda_mse", self.lambda_mse),
            ("entropy_coef", self.entropy_coef),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("rft.{name} must be >= 0, got {v}"));
            }
        }
        if !(self.sigma_init > crate::nn::SIGMA_FLOOR && self.sigma_init.is_finite()) {
            return bad(format!("rft.sigma_init must exceed the sigma floor, got {}", self.sigma_init));
        }
        self.clip.validate()
    }

    pub fn weights(&self) -> GrpoWeights {
        GrpoWeights {
            clip: self.clip,
            lambda_mse: self.lambda_mse,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Trainable Stage-II state. The encoder inside `nets` is never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct RftState {
    pub nets: PolicyNets,
    pub sigma: SigmaNet,
    pub flow_opt: AdamW,
    pub sigma_opt: AdamW,
}

impl RftState {
    /// Starts Stage II from pretrained nets with a fresh sigma net.
    pub fn new(nets: PolicyNets, env: &EnvConfig, cfg: &RftConfig, seed: u64) -> Result<Self> {
        let sigma = SigmaNet::new(env, rng::derive_seed(seed, &[0x5157]), cfg.sigma_init)?;
        Ok(Self::with_sigma(nets, sigma, cfg))
    }

    pub fn with_sigma(nets: PolicyNets, sigma: SigmaNet, cfg: &RftConfig) -> Self {
        let flow_opt = AdamW::new(nets.flow_head.param_count(), AdamWConfig::with_lr(cfg.lr));
        let sigma_opt = AdamW::new(sigma.net.param_count(), AdamWConfig::with_lr(cfg.sigma_lr));
        Self {
            nets,
            sigma,
            flow_opt,
            sigma_opt,
        }
    }

    /// Loads a policy checkpoint; a missing sigma section means a Stage-I
    /// checkpoint, for which a fresh sigma net is created.
    pub fn from_checkpoint(ckpt: &Checkpoint, env: &EnvConfig, cfg: &RftConfig, seed: u64) -> Result<Self> {
        let nets = PolicyNets::from_checkpoint(ckpt, env)?;
        match SigmaNet::from_checkpoint(ckpt, env)? {
            Some(sigma) => Ok(Self::with_sigma(nets, sigma, cfg)),
            None => Self::new(nets, env, cfg, seed),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let ckpt = self.nets.write_into(Checkpoint::new());
        self.sigma
            .write_into(ckpt)
            .with_optimizer(FLOW_OPT_SECTION, &self.flow_opt)
            .with_optimizer(SIGMA_OPT_SECTION, &self.sigma_opt)
    }
}

/// One row of the Stage-II metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_advantage_abs: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub aux_mse: f64,
    pub surrogate_loss: f64,
    pub total_loss: f64,
    pub mean_sigma: f64,
    pub success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<u64>,
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Seed for everything random in step `step`.
pub fn step_seed(seed: u64, step: usize) -> u64 {
    rng::derive_seed(seed, &[step as u64])
}

/// Context indices drawn (with replacement) for a step.
pub fn sample_contexts(pool_len: usize, n: usize, step_seed: u64, stream: u64) -> Vec<usize> {
    let mut r = rng::derived(step_seed, &[stream]);
    (0..n).map(|_| r.random_range(0..pool_len)).collect()
}

/// Rollout seed for rollout `n` of context `c` within a step.
pub fn rollout_seed(step_seed: u64, c: usize, n: usize) -> u64 {
    rng::derive_seed(step_seed, &[1, c as u64, n as u64])
}

/// Samples `group_size` traces for each context and scores them.
pub fn collect_groups(
    state: &RftState,
    wm: Option<&WorldModel>,
    proxy: &PerceptualProxy,
    contexts: &[&ChunkRecord],
    cfg: &RftConfig,
    reward: &RewardConfig,
    step_seed: u64,
) -> Result<Vec<GroupBatch>> {
    let prepared: Vec<(RewardContext, Vec<f64>)> = contexts
        .par_iter()
        .map(|rec| {
            let ctx = RewardContext::from_record(rec, reward.kind, wm)?;
            let z = state.nets.encode(&ctx.obs)?;
            Ok((ctx, z))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|c| (0..cfg.group_size).map(move |n| (c, n)))
        .collect();
    let rollouts: Vec<(RolloutTrace, f64)> = jobs
        .par_iter()
        .map(|&(c, n)| {
            let (ctx, z) = &prepared[c];
            let trace = sample_sde_from(
                &state.nets,
                &state.sigma,
                z.clone(),
                ctx.obs.state.to_vec(),
                cfg.k_steps,
                rollout_seed(step_seed, c, n),
                c as u64,
            )?;
            let r = verified_reward(reward, wm, proxy, ctx, &trace.executed_chunk())?;
            Ok((trace, r))
        })
        .collect::<Result<_>>()?;

    let mut it = rollouts.into_iter();
    prepared
        .into_iter()
        .map(|(ctx, _)| {
            let (traces, rewards): (Vec<_>, Vec<_>) = it.by_ref().take(cfg.group_size).unzip();
            GroupBatch::new(ctx, traces, rewards)
        })
        .collect()
}

/// One Stage-II iteration: rollouts, rewards, advantages and a single
/// optimizer update of the flow head and sigma net. A non-finite objective
/// skips the update and is reported in the returned record.
#[allow(clippy::too_many_arguments)]
pub fn rft_step(
    state: &mut RftState,
    wm: Option<&WorldModel>,
    proxy: &PerceptualProxy,
    pool: &[ChunkRecord],
    cfg: &RftConfig,
    reward: &RewardConfig,
    timestep: &TimestepDistribution,
    seed: u64,
    step: usize,
) -> Result<MetricsRecord> {
    if pool.is_empty() {
        return Err(Error::Config("context pool is empty".into()));
    }
    let t0 = Instant::now();
    let ss = step_seed(seed, step);
    let contexts: Vec<&ChunkRecord> = sample_contexts(pool.len(), cfg.batch_contexts, ss, 0)
        .into_iter()
        .map(|i| &pool[i])
        .collect();
    let groups = collect_groups(state, wm, proxy, &contexts, cfg, reward, ss)?;
    let sft: Vec<&ChunkRecord> = sample_contexts(pool.len(), cfg.batch_contexts, ss, 2)
        .into_iter()
        .map(|i| &pool[i])
        .collect();

    let n = (groups.len() * cfg.group_size) as f64;
    let mean_reward = groups.iter().flat_map(|g| &g.rewards).sum::<f64>() / n;
    let mean_advantage_abs = groups.iter().flat_map(|g| &g.advantages).map(|a| a.abs()).sum::<f64>() / n;
    let mean_sigma = groups
        .iter()
        .flat_map(|g| &g.traces)
        .map(|t| t.sigmas.iter().flat_map(|s| s.as_slice()).sum::<f64>() / (t.k_steps() * t.sigmas[0].len()) as f64)
        .sum::<f64>()
        / n;

    let mut rec = MetricsRecord {
        step,
        mean_reward,
        mean_advantage_abs,
        mean_ratio: f64::NAN,
        clip_fraction: f64::NAN,
        entropy: f64::NAN,
        aux_mse: f64::NAN,
        surrogate_loss: f64::NAN,
        total_loss: f64::NAN,
        mean_sigma,
        success_rate: None,
        wall_ms: None,
        skipped: false,
        error: None,
    };
    let loss = grpo_loss_and_grad(
        &state.nets,
        &state.sigma,
        &groups,
        &cfg.weights(),
        &sft,
        timestep,
        rng::derive_seed(ss, &[3]),
    );
    let applied = loss.and_then(|l| {
        // Validate both updates before touching either parameter set.
        let mut flow = state.nets.flow_head.params().as_slice().to_vec();
        let mut sigma = state.sigma.net.params().as_slice().to_vec();
        let (mut fo, mut so) = (state.flow_opt.clone(), state.sigma_opt.clone());
        fo.step(&mut flow, &l.flow_grad)?;
        so.step(&mut sigma, &l.sigma_grad)?;
        if flow.iter().chain(&sigma).any(|p| !p.is_finite()) {
            return Err(Error::Numeric("update produced non-finite parameters".into()));
        }
        state.nets.flow_head.params_mut().copy_from_slice(&flow);
        state.sigma.net.params_mut().copy_from_slice(&sigma);
        state.flow_opt = fo;
        state.sigma_opt = so;
        Ok(l)
    });
    match applied {
        Ok(l) => {
            rec.mean_ratio = l.mean_ratio;
            rec.clip_fraction = l.clip_fraction;
            rec.entropy = l.entropy;
            rec.aux_mse = l.aux_mse;
            rec.surrogate_loss = l.surrogate_loss;
            rec.total_loss = l.total;
        }
        Err(Error::Numeric(msg)) => {
            rec.skipped = true;
            rec.error = Some(msg);
        }
        Err(e) => return Err(e),
    }
    if cfg.log_wall_time {
        rec.wall_ms = Some(t0.elapsed().as_millis() as u64);
    }
    Ok(rec)
}

/// Every evaluation suite: unperturbed plus each family at both magnitudes.
pub fn standard_suites() -> Vec<PerturbSpec> {
    let mut v = vec![PerturbSpec::none()];
    for mag in [Magnitude::Minor, Magnitude::Major] {
        for mode in PerturbMode::FAMILIES {
            v.push(PerturbSpec::preset(mode, mag));
        }
    }
    v
}

/// Success rate of the deterministic sampler on each suite.
pub fn evaluate_suites(
    nets: &PolicyNets,
    env: &EnvConfig,
    suites: &[PerturbSpec],
    k_steps: usize,
    episodes: usize,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let policy = OdePolicy { nets, k_steps };
    suites
        .iter()
        .map(|p| Ok((p.suite_name(), evaluate_success(&policy, env, p, episodes, seed)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub pre_sr: f64,
    pub post_sr: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RftSummary {
    pub steps: usize,
    pub skipped_steps: usize,
    pub episodes: usize,
    pub eval_seed: u64,
    pub reward: String,
    pub suites: BTreeMap<String, SuiteResult>,
}

/// Pre-evaluation, `cfg.steps` Stage-II steps with periodic unperturbed
/// evaluation, and post-evaluation on every suite. `on_record` sees each
/// metrics row together with the state after that step.
#[allow(clippy::too_many_arguments)]
pub fn run_rft<F>(
    state: &mut RftState,
    wm: Option<&WorldModel>,
    proxy: &PerceptualProxy,
    pool: &[ChunkRecord],
    env: &EnvConfig,
    cfg: &RftConfig,
    reward: &RewardConfig,
    timestep: &TimestepDistribution,
    seed: u64,
    mut on_record: F,
) -> Result<RftSummary>
where
    F: FnMut(&MetricsRecord, &RftState) -> Result<()>,
{
    cfg.validate()?;
    reward.validate()?;
    if reward.kind.uses_world_model() && wm.is_none() {
        return Err(Error::Config(format!("reward {} needs a world model", reward.kind.name())));
    }
    let suites = standard_suites();
    let pre = evaluate_suites(&state.nets, env, &suites, cfg.k_steps, cfg.eval_episodes, cfg.eval_seed)?;
    let unperturbed = [PerturbSpec::none()];
    let mut skipped_steps = 0;
    for step in 0..cfg.steps {
        let mut rec = rft_step(state, wm, proxy, pool, cfg, reward, timestep, seed, step)?;
        skipped_steps += rec.skipped as usize;
        if cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 {
            let sr = evaluate_suites(&state.nets, env, &unperturbed, cfg.k_steps, cfg.eval_episodes, cfg.eval_seed)?;
            rec.success_rate = sr.values().next().copied();
        }
        on_record(&rec, state)?;
    }
    let post = evaluate_suites(&state.nets, env, &suites, cfg.k_steps, cfg.eval_episodes, cfg.eval_seed)?;
    let suites = pre
        .into_iter()
        .map(|(name, pre_sr)| {
            let post_sr = post[&name];
            (
                name,
                SuiteResult {
                    pre_sr,
                    post_sr,
                    delta: post_sr - pre_sr,
                },
            )
        })
        .collect();
    Ok(RftSummary {
        steps: cfg.steps,
        skipped_steps,
        episodes: cfg.eval_episodes,
        eval_seed: cfg.eval_seed,
        reward: reward.kind.name().into(),
        suites,
    })
}
