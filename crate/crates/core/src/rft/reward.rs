use serde::{Deserialize, Serialize};

use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::toyworld::{ChunkRecord, Frame, Observation};
use crate::world_model::{l1, PerceptualProxy, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Negative mean absolute difference to the reference actions.
    #[serde(rename = "r1_action_l1")]
    ActionL1,
    /// World-model rollout of the policy chunk against the recorded frames.
    #[serde(rename = "r2_wm_vs_dataset")]
    WmVsDataset,
    /// World-model rollouts of the policy chunk and of the reference chunk.
    #[serde(rename = "r3_wm_vs_wm")]
    WmVsWm,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::ActionL1, RewardKind::WmVsDataset, RewardKind::WmVsWm];

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::ActionL1 => "r1_action_l1",
            RewardKind::WmVsDataset => "r2_wm_vs_dataset",
            RewardKind::WmVsWm => "r3_wm_vs_wm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn uses_world_model(self) -> bool {
        !matches!(self, RewardKind::ActionL1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub kind: RewardKind,
    /// Weight of the per-frame L1 reconstruction term. Frame terms run about
    /// ten times smaller than action errors; the default of 10 puts the
    /// world-model rewards on the action-reward scale.
    pub lambda_1: f64,
    /// Weight of the per-frame perceptual term.
    pub lambda_lp: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            kind: RewardKind::WmVsWm,
            lambda_1: 10.0,
            lambda_lp: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_1", self.lambda_1), ("lambda_lp", self.lambda_lp)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("reward.{name} must be >= 0, got {v}")));
            }
        }
        if self.kind.uses_world_model() && self.lambda_1 == 0.0 && self.lambda_lp == 0.0 {
            return Err(Error::Config(format!(
                "reward kind {} needs lambda_1 or lambda_lp to be positive",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// One decision point with its reference behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardContext {
    pub obs: Observation,
    pub reference: ActionChunk,
    /// Frames recorded after executing `reference`.
    pub reference_frames: Option<Vec<Frame>>,
    /// World-model rollout of `reference`.
    pub reference_rollout: Option<Vec<Frame>>,
}

impl RewardContext {
    /// Builds the context for `kind`, rolling out the reference chunk through
    /// `wm` when the reward needs it.
    pub fn from_record(rec: &ChunkRecord, kind: RewardKind, wm: Option<&WorldModel>) -> Result<Self> {
        let reference_rollout = match kind {
            RewardKind::WmVsWm => {
                let wm = wm.ok_or_else(|| Error::Config("reward r3_wm_vs_wm needs a world model".into()))?;
                Some(wm.rollout(&rec.frame, &rec.actions)?)
            }
            _ => None,
        };
        Ok(Self {
            obs: rec.observation(),
            reference: rec.actions.clone(),
            reference_frames: Some(rec.future_frames.clone()),
            reference_rollout,
        })
    }
}

/// `-sum_t [lambda_1 * L1(a_t, b_t) + lambda_lp * pdist(a_t, b_t)]`.
pub fn trajectory_penalty(
    generated: &[Frame],
    target: &[Frame],
    cfg: &RewardConfig,
    proxy: &PerceptualProxy,
) -> Result<f64> {
    if generated.len() != target.len() {
        return Err(Error::Shape(format!(
            "trajectory lengths differ: {} vs {}",
            generated.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (g, t) in generated.iter().zip(target) {
        if cfg.lambda_1 != 0.0 {
            total += cfg.lambda_1 * l1(g, t);
        }
        if cfg.lambda_lp != 0.0 {
            total += cfg.lambda_lp * proxy.distance(g, t)?;
        }
    }
    Ok(-total)
}

/// Scores an executed (clamped) policy chunk against the context's reference.
pub fn verified_reward(
    cfg: &RewardConfig,
    wm: Option<&WorldModel>,
    proxy: &PerceptualProxy,
    ctx: &RewardContext,
    chunk: &ActionChunk,
) -> Result<f64> {
    let missing = |what: &str| Error::Config(format!("reward {} needs {what}", cfg.kind.name()));
    match cfg.kind {
        RewardKind::ActionL1 => {
            chunk.same_shape(&ctx.reference)?;
            let n = chunk.len() as f64;
            let sum: f64 = chunk
                .as_slice()
                .iter()
                .zip(ctx.reference.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            Ok(-sum / n)
        }
        RewardKind::WmVsDataset => {
            let wm = wm.ok_or_else(|| missing("a world model"))?;
            let target = ctx.reference_frames.as_ref().ok_or_else(|| missing("recorded frames"))?;
            let generated = wm.rollout(&ctx.obs.frame, chunk)?;
            trajectory_penalty(&generated, target, cfg, proxy)
        }
        RewardKind::WmVsWm => {
            let wm = wm.ok_or_else(|| missing("a world model"))?;
            let target = ctx
                .reference_rollout
                .as_ref()
                .ok_or_else(|| missing("a reference rollout"))?;
            let generated = wm.rollout(&ctx.obs.frame, chunk)?;
            trajectory_penalty(&generated, target, cfg, proxy)
        }
    }
}
