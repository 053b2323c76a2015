//! Deterministic 2-D push environment: one agent, one object, one goal.
//!
//! The agent moves in the unit square, can grasp the object when within
//! `grasp_radius`, and succeeds when the object sits within `success_radius`
//! of the instructed goal. Observations are low-resolution grayscale frames.

mod config;
pub mod dataset;
mod env;
mod eval;
mod expert;
mod render;

pub use config::{EnvConfig, N_TASKS, STATE_DIM};
pub use dataset::{
    generate_dataset, read_dataset, write_dataset, ChunkRecord, Dataset, DatasetHeader, Observation,
};
pub use env::{
    reset, step, EnvState, Instruction, Magnitude, PerturbMode, PerturbSpec, Vec2, AGENT_START, GOAL_A,
    GOAL_B, OBJECT_START,
};
pub use eval::{evaluate_success, run_episode, ChunkPolicy, ExpertChunkPolicy, RandomChunkPolicy};
pub use expert::expert_action;
pub use render::{blob_center, render, Frame, AGENT_INTENSITY, GOAL_INTENSITY, OBJECT_INTENSITY};
