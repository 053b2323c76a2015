use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wmrft_core::fm_policy::{
    heldout_fm_loss, pretrain_policy as train, PolicyNets, ENCODER_OPT_SECTION, FLOW_HEAD_OPT_SECTION,
};
use wmrft_core::nn::checkpoint::Checkpoint;
use wmrft_core::nn::{AdamW, AdamWConfig};
use wmrft_core::rng::derive_seed;

use super::{is_due, load_checkpoint, metrics_path, read_records, segment_tag, split_heldout};
use crate::artifacts::{MetricsLog, Run};
use crate::config::{resolve_seed, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path; metrics go to `<out>.metrics.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `policy.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Continue from the checkpoint at `--out`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Serialize)]
struct PolicyRow {
    step: usize,
    loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heldout_loss: Option<f64>,
}

fn checkpoint(nets: &PolicyNets, enc: &AdamW, flow: &AdamW) -> Checkpoint {
    nets.write_into(Checkpoint::new())
        .with_optimizer(ENCODER_OPT_SECTION, enc)
        .with_optimizer(FLOW_HEAD_OPT_SECTION, flow)
}

pub fn pretrain_policy(args: PretrainArgs, threads: usize) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(n) = args.steps {
        cfg.policy.steps = n;
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = seed;
    let records = read_records(&args.data, &cfg.env)?;
    let (train_set, held) = split_heldout(&records, cfg.data.heldout_fraction);

    let (mut nets, mut enc_opt, mut flow_opt, start) = if args.resume {
        let ckpt = load_checkpoint(&args.out, "policy")?;
        let enc_opt = ckpt.optimizer(ENCODER_OPT_SECTION)?.clone();
        let flow_opt = ckpt.optimizer(FLOW_HEAD_OPT_SECTION)?.clone();
        let start = flow_opt.step_count() as usize;
        (PolicyNets::from_checkpoint(&ckpt, &cfg.env)?, enc_opt, flow_opt, start)
    } else {
        let nets = PolicyNets::new(&cfg.env, derive_seed(seed, &[0]))?;
        let opt_cfg = AdamWConfig::with_lr(cfg.policy.lr);
        let enc_opt = AdamW::new(nets.encoder.param_count(), opt_cfg);
        let flow_opt = AdamW::new(nets.flow_head.param_count(), opt_cfg);
        (nets, enc_opt, flow_opt, 0)
    };
    let metrics_file = metrics_path(&args.out);
    let run = Run::start(
        "pretrain-policy",
        &args.out,
        &segment_tag(start),
        &[("dataset", &args.data), ("checkpoint", &args.out), ("metrics", &metrics_file)],
        &cfg,
        seed,
        threads,
    )?;
    let mut log = if args.resume {
        MetricsLog::resume(&metrics_file, start)?
    } else {
        checkpoint(&nets, &enc_opt, &flow_opt).save(&args.out)?;
        MetricsLog::new(&metrics_file)
    };

    let pc = cfg.policy;
    let heldout_seed = derive_seed(seed, &[2]);
    let result = train(
        &mut nets,
        &mut enc_opt,
        &mut flow_opt,
        train_set,
        &pc.train_config(),
        derive_seed(seed, &[1]),
        start,
        |step, loss, n, eo, fo| {
            let heldout_loss = if !held.is_empty() && is_due(step, pc.eval_every, pc.steps) {
                Some(heldout_fm_loss(n, held, &pc.timestep, heldout_seed)?)
            } else {
                None
            };
            if let Some(h) = heldout_loss {
                println!("step {:>6} loss {loss:.6} heldout {h:.6}", step + 1);
            }
            log.push(&PolicyRow { step, loss, heldout_loss })?;
            if is_due(step, pc.checkpoint_every, pc.steps) {
                checkpoint(n, eo, fo).save(&args.out)?;
                log.flush()?;
            }
            Ok(())
        },
    );
    log.flush()?;
    result?;
    run.finish()
}
