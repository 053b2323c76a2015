use std::path::PathBuf;

use clap::Args;
use wmrft_core::toyworld::{generate_dataset, write_dataset, DatasetHeader};

use crate::artifacts::Run;
use crate::config::{resolve_seed, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `data.episodes`.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn gen_data(args: GenDataArgs, threads: usize) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(n) = args.episodes {
        cfg.data.episodes = n;
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = seed;
    let run = Run::start("gen-data", &args.out, "", &[("dataset", &args.out)], &cfg, seed, threads)?;
    let records = generate_dataset(&cfg.env, cfg.data.episodes, &cfg.perturb.spec(), cfg.data.noise_std, seed)?;
    write_dataset(&args.out, DatasetHeader::of(&cfg.env), &records)?;
    println!(
        "wrote {} records from {} episodes to {}",
        records.len(),
        cfg.data.episodes,
        args.out.display()
    );
    run.finish()
}
