//! Minimal feedforward-network substrate.
//!
//! Every learned component (world model, encoder, flow head, sigma net) is a
//! fully connected [`Mlp`] over `f64`. Parameters live in one flat vector with
//! a layer-major layout: for each layer, the weight matrix in row-major order
//! (`fan_out` rows of `fan_in` columns), followed by the bias vector. The same
//! layout is used on disk, so checkpoints are portable.

mod adamw;
pub mod checkpoint;
mod gradcheck;
mod kernels;
mod mlp;

pub use adamw::{AdamW, AdamWConfig};
pub use kernels::{add_assign, axpy};
pub use gradcheck::{central_difference, gradient_check, GradCheckOptions};
pub use mlp::{
    backward, forward, seeded_init, Activation, Mlp, NetworkSpec, OutputActivation, ParamVector,
    Tape, SIGMA_FLOOR,
};
