use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of entries in the proprioceptive state vector:
/// agent x, agent y, object x, object y, grasped (0/1).
pub const STATE_DIM: usize = 5;
/// Number of instructions (one-hot width).
pub const N_TASKS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub frame_size: usize,
    /// dx, dy, grasp.
    pub action_dim: usize,
    pub chunk_len: usize,
    pub max_episode_steps: usize,
    pub success_radius: f64,
    pub grasp_radius: f64,
    /// Largest displacement per step, in unit-square coordinates.
    pub step_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            frame_size: 16,
            action_dim: 3,
            chunk_len: 8,
            max_episode_steps: 80,
            success_radius: 0.05,
            grasp_radius: 0.08,
            step_scale: 0.05,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.frame_size < 8 {
            return err(format!("env.frame_size must be >= 8, got {}", self.frame_size));
        }
        if self.action_dim != 3 {
            return err(format!(
                "env.action_dim must be 3 (dx, dy, grasp), got {}",
                self.action_dim
            ));
        }
        if self.chunk_len < 1 {
            return err("env.chunk_len must be >= 1".into());
        }
        if self.max_episode_steps < 1 {
            return err("env.max_episode_steps must be >= 1".into());
        }
        for (name, r) in [
            ("success_radius", self.success_radius),
            ("grasp_radius", self.grasp_radius),
        ] {
            if !(r > 0.0 && r < 0.5) {
                return err(format!("env.{name} must lie in (0, 0.5), got {r}"));
            }
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 0.2) {
            return err(format!(
                "env.step_scale must lie in (0, 0.2], got {}",
                self.step_scale
            ));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.frame_size * self.frame_size
    }

    /// Flattened chunk width `T * A`.
    pub fn chunk_width(&self) -> usize {
        self.chunk_len * self.action_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EnvConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let bad = [
            EnvConfig { frame_size: 4, ..Default::default() },
            EnvConfig { chunk_len: 0, ..Default::default() },
            EnvConfig { success_radius: 0.5, ..Default::default() },
            EnvConfig { grasp_radius: 0.0, ..Default::default() },
            EnvConfig { step_scale: 0.3, ..Default::default() },
            EnvConfig { action_dim: 7, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
