use crate::error::{shape_check, Error, Result};
use crate::fm_policy::LATENT_DIM;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{Activation, Mlp, NetworkSpec, OutputActivation, Tape, SIGMA_FLOOR};
use crate::toyworld::{EnvConfig, STATE_DIM};

pub const SIGMA_HIDDEN: [usize; 1] = [128];
pub const SIGMA_SECTION: &str = "sigma";
/// Initial per-dimension standard deviation of a freshly created sigma net.
pub const DEFAULT_SIGMA_INIT: f64 = 0.05;

/// Step-dependent standard deviations `sigma(z, s, k)`.
///
/// The net sees the latent, the proprioceptive state and the step embedding
/// `(k / K, 1 - k / K)`; it does not see the current intermediate action.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaNet {
    pub net: Mlp,
}

pub fn sigma_spec(cfg: &EnvConfig) -> Result<NetworkSpec> {
    NetworkSpec::with_hidden(
        LATENT_DIM + STATE_DIM + 2,
        &SIGMA_HIDDEN,
        cfg.chunk_width(),
        Activation::Tanh,
        OutputActivation::SoftplusFloored,
    )
}

/// Inverse of `x -> softplus(x) + SIGMA_FLOOR`.
pub fn sigma_to_preactivation(sigma: f64) -> Result<f64> {
    let y = sigma - SIGMA_FLOOR;
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must exceed the floor {SIGMA_FLOOR}, got {sigma}"
        )));
    }
    // log(exp(y) - 1), written to stay accurate for small and large y.
    Ok(if y > 30.0 { y } else { y.exp_m1().ln() })
}

impl SigmaNet {
    /// Seeded hidden layer; output weights zeroed and output bias set so that
    /// every initial sigma equals `sigma_init`.
    pub fn new(cfg: &EnvConfig, seed: u64, sigma_init: f64) -> Result<Self> {
        let mut net = Mlp::seeded(sigma_spec(cfg)?, seed);
        net.zero_output_weights();
        net.set_output_bias(sigma_to_preactivation(sigma_init)?);
        Ok(Self { net })
    }

    /// All-zero weights with a constant output `sigma`.
    pub fn constant(cfg: &EnvConfig, sigma: f64) -> Result<Self> {
        let mut net = Mlp::zeros(sigma_spec(cfg)?);
        net.set_output_bias(sigma_to_preactivation(sigma)?);
        Ok(Self { net })
    }

    pub fn from_net(net: Mlp, cfg: &EnvConfig) -> Result<Self> {
        let expected = sigma_spec(cfg)?;
        if net.spec() != &expected {
            return Err(Error::Shape(format!(
                "sigma net layers {:?} do not match config (expected {:?})",
                net.spec().layer_sizes(),
                expected.layer_sizes()
            )));
        }
        Ok(Self { net })
    }

    /// Loads the sigma section, or `None` for a Stage-I checkpoint without one.
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &EnvConfig) -> Result<Option<Self>> {
        if !ckpt.contains(SIGMA_SECTION) {
            return Ok(None);
        }
        Self::from_net(ckpt.network(SIGMA_SECTION)?.clone(), cfg).map(Some)
    }

    pub fn write_into(&self, ckpt: Checkpoint) -> Checkpoint {
        ckpt.with_network(SIGMA_SECTION, &self.net)
    }

    fn input(z: &[f64], s: &[f64], k: usize, k_steps: usize) -> Result<Vec<f64>> {
        shape_check("latent", LATENT_DIM, z.len())?;
        shape_check("state", STATE_DIM, s.len())?;
        if k >= k_steps {
            return Err(Error::Domain(format!("step {k} outside 0..{k_steps}")));
        }
        let f = k as f64 / k_steps as f64;
        let mut x = Vec::with_capacity(LATENT_DIM + STATE_DIM + 2);
        x.extend_from_slice(z);
        x.extend_from_slice(s);
        x.push(f);
        x.push(1.0 - f);
        Ok(x)
    }

    pub fn sigma(&self, z: &[f64], s: &[f64], k: usize, k_steps: usize) -> Result<Vec<f64>> {
        self.net.forward(&Self::input(z, s, k, k_steps)?)
    }

    pub fn sigma_tape(&self, z: &[f64], s: &[f64], k: usize, k_steps: usize) -> Result<Tape> {
        self.net.forward_tape(&Self::input(z, s, k, k_steps)?)
    }

    /// Sigma for each of the `k_steps` steps.
    pub fn all_sigmas(&self, z: &[f64], s: &[f64], k_steps: usize) -> Result<Vec<Vec<f64>>> {
        (0..k_steps).map(|k| self.sigma(z, s, k, k_steps)).collect()
    }
}

/// `0.5 * ln(2 * pi * e)`: entropy of a unit normal.
pub(crate) const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// Diagonal-Gaussian entropy `sum_d 0.5 ln(2 pi e sigma_d^2)`.
pub fn gaussian_entropy(sigma: &[f64]) -> f64 {
    sigma.iter().map(|s| HALF_LN_2PI_E + s.ln()).sum()
}

/// Mean over the `K` steps of the per-step Gaussian entropy.
pub fn policy_entropy(sigma_net: &SigmaNet, z: &[f64], s: &[f64], k_steps: usize) -> Result<f64> {
    if k_steps == 0 {
        return Err(Error::Config("entropy needs at least one step".into()));
    }
    let mut total = 0.0;
    for k in 0..k_steps {
        total += gaussian_entropy(&sigma_net.sigma(z, s, k, k_steps)?);
    }
    Ok(total / k_steps as f64)
}

/// Adds `weight * d(policy_entropy)/d(psi)` into `grad`; returns the entropy.
pub fn policy_entropy_grad(
    sigma_net: &SigmaNet,
    z: &[f64],
    s: &[f64],
    k_steps: usize,
    weight: f64,
    grad: &mut [f64],
) -> Result<f64> {
    if k_steps == 0 {
        return Err(Error::Config("entropy needs at least one step".into()));
    }
    let inv_k = 1.0 / k_steps as f64;
    let mut total = 0.0;
    for k in 0..k_steps {
        let tape = sigma_net.sigma_tape(z, s, k, k_steps)?;
        total += gaussian_entropy(tape.output());
        let g: Vec<f64> = tape.output().iter().map(|s| weight * inv_k / s).collect();
        sigma_net.net.backward_tape(&tape, &g, grad)?;
    }
    Ok(total * inv_k)
}
