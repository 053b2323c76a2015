use crate::error::{shape_check, Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{Activation, Mlp, NetworkSpec, OutputActivation, Tape};
use crate::toyworld::{EnvConfig, Observation, N_TASKS, STATE_DIM};

pub const LATENT_DIM: usize = 64;
pub const ENCODER_HIDDEN: [usize; 1] = [128];
pub const FLOW_HIDDEN: [usize; 2] = [256, 256];
/// Width of the `(tau, 1 - tau)` timestep embedding.
pub const TIME_EMBED_DIM: usize = 2;

pub const ENCODER_SECTION: &str = "encoder";
pub const FLOW_HEAD_SECTION: &str = "flow_head";
pub const ENCODER_OPT_SECTION: &str = "encoder_opt";
pub const FLOW_HEAD_OPT_SECTION: &str = "flow_head_opt";

/// Conditioning encoder plus flow head `v(z, s, a_tau, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNets {
    pub encoder: Mlp,
    pub flow_head: Mlp,
    horizon: usize,
    action_dim: usize,
}

pub fn encoder_spec(cfg: &EnvConfig) -> Result<NetworkSpec> {
    NetworkSpec::with_hidden(
        cfg.pixels() + N_TASKS + STATE_DIM,
        &ENCODER_HIDDEN,
        LATENT_DIM,
        Activation::Tanh,
        OutputActivation::Identity,
    )
}

pub fn flow_head_spec(cfg: &EnvConfig) -> Result<NetworkSpec> {
    NetworkSpec::with_hidden(
        LATENT_DIM + STATE_DIM + cfg.chunk_width() + TIME_EMBED_DIM,
        &FLOW_HIDDEN,
        cfg.chunk_width(),
        Activation::Tanh,
        OutputActivation::Identity,
    )
}

fn check_spec(what: &str, net: &Mlp, expected: &NetworkSpec) -> Result<()> {
    if net.spec() == expected {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} layers {:?} do not match config (expected {:?})",
            net.spec().layer_sizes(),
            expected.layer_sizes()
        )))
    }
}

impl PolicyNets {
    /// Seeded initialization; the two networks draw from independent seeds.
    pub fn new(cfg: &EnvConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            encoder: Mlp::seeded(encoder_spec(cfg)?, crate::rng::derive_seed(seed, &[0])),
            flow_head: Mlp::seeded(flow_head_spec(cfg)?, crate::rng::derive_seed(seed, &[1])),
            horizon: cfg.chunk_len,
            action_dim: cfg.action_dim,
        })
    }

    pub fn zeros(cfg: &EnvConfig) -> Result<Self> {
        Ok(Self {
            encoder: Mlp::zeros(encoder_spec(cfg)?),
            flow_head: Mlp::zeros(flow_head_spec(cfg)?),
            horizon: cfg.chunk_len,
            action_dim: cfg.action_dim,
        })
    }

    pub fn from_nets(encoder: Mlp, flow_head: Mlp, cfg: &EnvConfig) -> Result<Self> {
        check_spec("encoder", &encoder, &encoder_spec(cfg)?)?;
        check_spec("flow head", &flow_head, &flow_head_spec(cfg)?)?;
        Ok(Self {
            encoder,
            flow_head,
            horizon: cfg.chunk_len,
            action_dim: cfg.action_dim,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &EnvConfig) -> Result<Self> {
        Self::from_nets(
            ckpt.network(ENCODER_SECTION)?.clone(),
            ckpt.network(FLOW_HEAD_SECTION)?.clone(),
            cfg,
        )
    }

    /// Adds the encoder and flow head sections to `ckpt`.
    pub fn write_into(&self, ckpt: Checkpoint) -> Checkpoint {
        ckpt.with_network(ENCODER_SECTION, &self.encoder)
            .with_network(FLOW_HEAD_SECTION, &self.flow_head)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// `T * A`.
    pub fn chunk_width(&self) -> usize {
        self.horizon * self.action_dim
    }

    fn encoder_input(obs: &Observation) -> Vec<f64> {
        let mut x = Vec::with_capacity(obs.frame.pixels().len() + N_TASKS + STATE_DIM);
        x.extend_from_slice(obs.frame.pixels());
        x.extend_from_slice(&obs.instruction.one_hot());
        x.extend_from_slice(&obs.state);
        x
    }

    /// Latent `z` for an observation.
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.encoder.forward(&Self::encoder_input(obs))
    }

    pub fn encode_tape(&self, obs: &Observation) -> Result<Tape> {
        self.encoder.forward_tape(&Self::encoder_input(obs))
    }

    fn flow_input(&self, z: &[f64], s: &[f64], a: &[f64], tau: f64) -> Result<Vec<f64>> {
        shape_check("latent", LATENT_DIM, z.len())?;
        shape_check("state", STATE_DIM, s.len())?;
        shape_check("noisy chunk", self.chunk_width(), a.len())?;
        let mut x = Vec::with_capacity(LATENT_DIM + STATE_DIM + a.len() + TIME_EMBED_DIM);
        x.extend_from_slice(z);
        x.extend_from_slice(s);
        x.extend_from_slice(a);
        x.push(tau);
        x.push(1.0 - tau);
        Ok(x)
    }

    /// Velocity `v(z, s, a, tau)`.
    pub fn velocity(&self, z: &[f64], s: &[f64], a: &[f64], tau: f64) -> Result<Vec<f64>> {
        self.flow_head.forward(&self.flow_input(z, s, a, tau)?)
    }

    pub fn velocity_tape(&self, z: &[f64], s: &[f64], a: &[f64], tau: f64) -> Result<Tape> {
        self.flow_head.forward_tape(&self.flow_input(z, s, a, tau)?)
    }
}
