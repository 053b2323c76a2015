//! Stage II: verified rewards from the world model, group-relative
//! advantages, the clipped policy objective and the training loop.

mod grpo;
mod reward;
mod trainer;

pub use grpo::{group_advantages, grpo_loss_and_grad, ClipConfig, ClipForm, GroupBatch, GrpoLoss, GrpoWeights};
pub use reward::{trajectory_penalty, verified_reward, RewardConfig, RewardContext, RewardKind};
pub use trainer::{
    collect_groups, evaluate_suites, rft_step, rollout_seed, run_rft, sample_contexts, standard_suites, step_seed,
    MetricsRecord, RftConfig, RftState, RftSummary, SuiteResult, FLOW_OPT_SECTION, SIGMA_OPT_SECTION,
};
