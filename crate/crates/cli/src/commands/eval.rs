use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wmrft_core::fm_policy::{OdePolicy, PolicyNets};
use wmrft_core::toyworld::{
    evaluate_success, ChunkPolicy, ExpertChunkPolicy, Magnitude, PerturbMode, PerturbSpec, RandomChunkPolicy,
};

use super::load_checkpoint;
use crate::artifacts::write_json;
use crate::config::{resolve_seed, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("agent").required(true).args(["policy", "expert", "random"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Policy checkpoint, sampled with the deterministic ODE sampler.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Evaluate the built-in scripted expert instead of a checkpoint.
    #[arg(long)]
    pub expert: bool,
    /// Evaluate uniformly random action chunks.
    #[arg(long)]
    pub random: bool,
    /// One of none, object, goal, robot_state, combined.
    #[arg(long, default_value = "none")]
    pub perturb: String,
    /// minor or major.
    #[arg(long, default_value = "minor")]
    pub magnitude: String,
    #[arg(long, default_value_t = 50)]
    pub episodes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EvalResult {
    agent: String,
    suite: String,
    episodes: usize,
    seed: u64,
    successes: usize,
    success_rate: f64,
}

fn parse_perturb(mode: &str, magnitude: &str) -> CliResult<PerturbSpec> {
    let m = PerturbMode::parse(mode).ok_or_else(|| {
        let valid: Vec<&str> = PerturbMode::ALL.iter().map(|m| m.name()).collect();
        CliError::Usage(format!("unknown perturbation mode {mode:?}; valid: {}", valid.join(", ")))
    })?;
    let g = Magnitude::parse(magnitude).ok_or_else(|| {
        CliError::Usage(format!("unknown magnitude {magnitude:?}; valid: minor, major"))
    })?;
    Ok(PerturbSpec::preset(m, g))
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let perturb = parse_perturb(&args.perturb, &args.magnitude)?;
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let seed = resolve_seed(args.seed, cfg.seed)?;
    let env = &cfg.env;

    let nets;
    let expert = ExpertChunkPolicy { cfg: env.clone() };
    let random = RandomChunkPolicy { cfg: env.clone() };
    let ode;
    let (agent, policy): (String, &dyn ChunkPolicy) = if args.expert {
        ("expert".into(), &expert)
    } else if args.random {
        ("random".into(), &random)
    } else {
        let path = args.policy.as_ref().expect("clap enforces one agent");
        nets = PolicyNets::from_checkpoint(&load_checkpoint(path, "policy")?, env)?;
        ode = OdePolicy {
            nets: &nets,
            k_steps: cfg.policy.ode_steps,
        };
        (path.display().to_string(), &ode)
    };

    let sr = evaluate_success(policy, env, &perturb, args.episodes, seed)?;
    let result = EvalResult {
        agent,
        suite: perturb.suite_name(),
        episodes: args.episodes,
        seed,
        successes: (sr * args.episodes as f64).round() as usize,
        success_rate: sr,
    };
    println!(
        "SR {:.3} ({}/{} episodes, suite {}, seed {})",
        result.success_rate, result.successes, result.episodes, result.suite, result.seed
    );
    if let Some(out) = &args.out {
        write_json(out, &result)?;
    }
    Ok(())
}
