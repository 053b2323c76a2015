pub mod chunk;
pub mod error;
pub mod fm_policy;
pub mod io;
pub mod nn;
pub mod rft;
pub mod rng;
pub mod sde_policy;
pub mod toyworld;
pub mod world_model;

pub use chunk::ActionChunk;
pub use error::{Error, Result};
