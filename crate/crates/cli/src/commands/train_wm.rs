use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wmrft_core::nn::checkpoint::Checkpoint;
use wmrft_core::nn::{AdamW, AdamWConfig};
use wmrft_core::rng::derive_seed;
use wmrft_core::world_model::{
    train_world_model, wm_eval_metrics, PerceptualProxy, PerceptualProxyConfig, WmMetrics, WorldModel,
    WM_OPT_SECTION,
};

use super::{is_due, load_checkpoint, metrics_path, read_records, segment_tag, split_heldout};
use crate::artifacts::{MetricsLog, Run};
use crate::config::{resolve_seed, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct TrainWmArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path; metrics go to `<out>.metrics.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `wm.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Continue from the checkpoint at `--out`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Serialize)]
struct WmRow {
    step: usize,
    loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heldout: Option<WmMetrics>,
}

fn checkpoint(model: &WorldModel, opt: &AdamW) -> Checkpoint {
    model.write_into(Checkpoint::new()).with_optimizer(WM_OPT_SECTION, opt)
}

pub fn train_wm(args: TrainWmArgs, threads: usize) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(n) = args.steps {
        cfg.wm.steps = n;
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = seed;
    let records = read_records(&args.data, &cfg.env)?;
    let (train, held) = split_heldout(&records, cfg.data.heldout_fraction);
    let proxy = PerceptualProxy::new(&PerceptualProxyConfig::default())?;

    let (mut model, mut opt, start) = if args.resume {
        let ckpt = load_checkpoint(&args.out, "world-model")?;
        let opt = ckpt.optimizer(WM_OPT_SECTION)?.clone();
        let start = opt.step_count() as usize;
        (WorldModel::from_checkpoint(&ckpt, &cfg.env)?, opt, start)
    } else {
        let model = WorldModel::new(&cfg.env, derive_seed(seed, &[0]))?;
        let opt = AdamW::new(model.net().param_count(), AdamWConfig::with_lr(cfg.wm.lr));
        (model, opt, 0)
    };
    let metrics_file = metrics_path(&args.out);
    let run = Run::start(
        "train-wm",
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
        checkpoint(&model, &opt).save(&args.out)?;
        MetricsLog::new(&metrics_file)
    };

    let wm = cfg.wm;
    let result = train_world_model(
        &mut model,
        &mut opt,
        train,
        &wm.train_config(),
        derive_seed(seed, &[1]),
        start,
        |step, loss, m, o| {
            let heldout = if !held.is_empty() && is_due(step, wm.eval_every, wm.steps) {
                Some(wm_eval_metrics(m, held, &proxy)?)
            } else {
                None
            };
            if let Some(h) = &heldout {
                println!(
                    "step {:>6} loss {loss:.6} heldout mse {:.5} psnr {:.2} dB",
                    step + 1,
                    h.mse,
                    h.psnr_db
                );
            }
            log.push(&WmRow { step, loss, heldout })?;
            if is_due(step, wm.checkpoint_every, wm.steps) {
                checkpoint(m, o).save(&args.out)?;
                log.flush()?;
            }
            Ok(())
        },
    );
    log.flush()?;
    result?;
    run.finish()
}
