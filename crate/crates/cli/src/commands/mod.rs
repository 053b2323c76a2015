mod eval;
mod gen_data;
mod pretrain;
mod rft;
mod train_wm;

use std::path::{Path, PathBuf};

use wmrft_core::nn::checkpoint::Checkpoint;
use wmrft_core::toyworld::{read_dataset, ChunkRecord, EnvConfig};

use crate::error::{CliError, CliResult};

pub use eval::{eval, EvalArgs};
pub use gen_data::{gen_data, GenDataArgs};
pub use pretrain::{pretrain_policy, PretrainArgs};
pub use rft::{rft, RftArgs};
pub use train_wm::{train_wm, TrainWmArgs};

pub(crate) fn read_records(path: &Path, env: &EnvConfig) -> CliResult<Vec<ChunkRecord>> {
    if !path.exists() {
        return Err(CliError::Io(format!("dataset not found: {}", path.display())));
    }
    let ds = read_dataset(path)?;
    ds.header.check_matches(env)?;
    if ds.records.is_empty() {
        return Err(CliError::Config(format!("dataset {} has no records", path.display())));
    }
    Ok(ds.records)
}

pub(crate) fn load_checkpoint(path: &Path, what: &str) -> CliResult<Checkpoint> {
    if !path.exists() {
        return Err(CliError::Io(format!("{what} checkpoint not found: {}", path.display())));
    }
    Ok(Checkpoint::load(path)?)
}

/// Splits off the trailing `fraction` of records as the held-out set.
pub(crate) fn split_heldout(records: &[ChunkRecord], fraction: f64) -> (&[ChunkRecord], &[ChunkRecord]) {
    let held = ((records.len() as f64) * fraction).floor() as usize;
    let held = held.min(records.len().saturating_sub(1));
    records.split_at(records.len() - held)
}

pub(crate) fn is_due(step: usize, every: usize, total: usize) -> bool {
    step + 1 == total || (every > 0 && (step + 1).is_multiple_of(every))
}

/// Manifest tag for a resumed segment starting at `start`.
pub(crate) fn segment_tag(start: usize) -> String {
    if start == 0 {
        String::new()
    } else {
        format!(".resume{start}")
    }
}

pub(crate) fn metrics_path(out: &Path) -> PathBuf {
    crate::artifacts::sibling(out, ".metrics.jsonl")
}
