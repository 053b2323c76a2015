use std::path::PathBuf;

use clap::Args;
use wmrft_core::rft::{run_rft, RewardKind, RftState};
use wmrft_core::rng::derive_seed;
use wmrft_core::world_model::{PerceptualProxy, PerceptualProxyConfig, WorldModel};

use super::{load_checkpoint, metrics_path, read_records, split_heldout};
use crate::artifacts::{sibling, write_json, MetricsLog, Run};
use crate::config::{resolve_seed, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct RftArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset whose training split supplies the rollout contexts.
    #[arg(long)]
    pub data: PathBuf,
    /// World-model checkpoint; required by the world-model rewards.
    #[arg(long)]
    pub wm: Option<PathBuf>,
    /// Pretrained (or previously fine-tuned) policy checkpoint.
    #[arg(long)]
    pub policy: PathBuf,
    /// Output checkpoint; metrics and summary are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `rft.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides `reward.kind`.
    #[arg(long)]
    pub reward: Option<String>,
}

pub fn rft(args: RftArgs, threads: usize) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(n) = args.steps {
        cfg.rft.steps = n;
    }
    if let Some(name) = &args.reward {
        cfg.reward.kind = RewardKind::parse(name).ok_or_else(|| {
            let valid: Vec<&str> = RewardKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Usage(format!("unknown reward {name:?}; valid: {}", valid.join(", ")))
        })?;
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = seed;

    let records = read_records(&args.data, &cfg.env)?;
    let (pool, _) = split_heldout(&records, cfg.data.heldout_fraction);
    let wm = match (&args.wm, cfg.reward.kind.uses_world_model()) {
        (Some(path), _) => Some(WorldModel::from_checkpoint(&load_checkpoint(path, "world-model")?, &cfg.env)?),
        (None, true) => {
            return Err(CliError::Usage(format!(
                "reward {} needs --wm",
                cfg.reward.kind.name()
            )))
        }
        (None, false) => None,
    };
    let policy_ckpt = load_checkpoint(&args.policy, "policy")?;
    let mut state = RftState::from_checkpoint(&policy_ckpt, &cfg.env, &cfg.rft, derive_seed(seed, &[0]))?;
    let proxy = PerceptualProxy::new(&PerceptualProxyConfig::default())?;

    let metrics_file = metrics_path(&args.out);
    let summary_file = sibling(&args.out, ".summary.json");
    let mut inputs = vec![("dataset", args.data.as_path()), ("policy_in", args.policy.as_path())];
    if let Some(p) = &args.wm {
        inputs.push(("world_model", p.as_path()));
    }
    inputs.extend([
        ("checkpoint", args.out.as_path()),
        ("metrics", metrics_file.as_path()),
        ("summary", summary_file.as_path()),
    ]);
    let run = Run::start("rft", &args.out, "", &inputs, &cfg, seed, threads)?;
    state.to_checkpoint().save(&args.out)?;
    let mut log = MetricsLog::new(&metrics_file);

    let result = run_rft(
        &mut state,
        wm.as_ref(),
        &proxy,
        pool,
        &cfg.env,
        &cfg.rft,
        &cfg.reward,
        &cfg.policy.timestep,
        derive_seed(seed, &[1]),
        |rec, _| {
            if let Some(sr) = rec.success_rate {
                println!(
                    "step {:>4} reward {:.4} sigma {:.4} unperturbed SR {sr:.2}",
                    rec.step + 1,
                    rec.mean_reward,
                    rec.mean_sigma
                );
            }
            if let Some(e) = &rec.error {
                eprintln!("step {}: update skipped ({e})", rec.step + 1);
            }
            log.push(rec)?;
            log.flush()
        },
    );
    log.flush()?;
    let summary = result?;
    state.to_checkpoint().save(&args.out)?;
    write_json(&summary_file, &summary)?;
    for (name, s) in &summary.suites {
        println!("{name:<18} pre {:.2} post {:.2} delta {:+.2}", s.pre_sr, s.post_sr, s.delta);
    }
    run.finish()
}
