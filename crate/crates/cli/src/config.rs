use std::path::Path;

use serde::{Deserialize, Serialize};
use wmrft_core::fm_policy::{PolicyTrainConfig, TimestepDistribution};
use wmrft_core::rft::{RewardConfig, RftConfig};
use wmrft_core::toyworld::{EnvConfig, Magnitude, PerturbMode, PerturbSpec};
use wmrft_core::world_model::WmTrainConfig;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "WMRFT_SEED";

/// Offline dataset generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub episodes: usize,
    /// Standard deviation of Gaussian noise added to expert actions.
    pub noise_std: f64,
    /// Trailing fraction of records held out for validation losses.
    pub heldout_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            noise_std: 0.02,
            heldout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmSection {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// Held-out rollout metrics are logged every `eval_every` steps.
    pub eval_every: usize,
    pub checkpoint_every: usize,
}

impl Default for WmSection {
    fn default() -> Self {
        let d = WmTrainConfig::default();
        Self {
            lr: d.lr,
            batch_size: d.batch_size,
            steps: d.steps,
            eval_every: 500,
            checkpoint_every: 500,
        }
    }
}

impl WmSection {
    pub fn train_config(&self) -> WmTrainConfig {
        WmTrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub ode_steps: usize,
    pub timestep: TimestepDistribution,
    pub eval_every: usize,
    pub checkpoint_every: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        let d = PolicyTrainConfig::default();
        Self {
            lr: d.lr,
            batch_size: d.batch_size,
            steps: d.steps,
            ode_steps: d.ode_steps,
            timestep: d.timestep,
            eval_every: 500,
            checkpoint_every: 500,
        }
    }
}

impl PolicySection {
    pub fn train_config(&self) -> PolicyTrainConfig {
        PolicyTrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            steps: self.steps,
            ode_steps: self.ode_steps,
            timestep: self.timestep,
        }
    }
}

/// Perturbation applied when generating data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub mode: PerturbMode,
    pub magnitude: Magnitude,
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self {
            mode: PerturbMode::None,
            magnitude: Magnitude::Minor,
        }
    }
}

impl PerturbSection {
    pub fn spec(&self) -> PerturbSpec {
        PerturbSpec::preset(self.mode, self.magnitude)
    }
}

/// Everything a run reads from its config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub data: DataConfig,
    pub perturb: PerturbSection,
    pub wm: WmSection,
    pub policy: PolicySection,
    pub rft: RftConfig,
    pub reward: RewardConfig,
}

impl RunConfig {
    /// Parses TOML text; errors carry the offending line and column.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.env.validate()?;
        if self.data.episodes == 0 {
            return Err(CliError::Config("data.episodes must be at least 1".into()));
        }
        if !(self.data.noise_std >= 0.0 && self.data.noise_std.is_finite()) {
            return Err(CliError::Config(format!(
                "data.noise_std must be >= 0, got {}",
                self.data.noise_std
            )));
        }
        if !(0.0..1.0).contains(&self.data.heldout_fraction) {
            return Err(CliError::Config(format!(
                "data.heldout_fraction must lie in [0, 1), got {}",
                self.data.heldout_fraction
            )));
        }
        self.wm.train_config().validate()?;
        self.policy.train_config().validate()?;
        self.rft.validate()?;
        self.reward.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Seed precedence: command-line flag, then environment, then config.
pub fn resolve_seed(flag: Option<u64>, config_seed: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(config_seed),
    }
}
