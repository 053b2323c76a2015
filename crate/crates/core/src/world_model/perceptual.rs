//! Frozen random-convolution feature distance used as the perceptual term
//! of the verified reward.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::toyworld::Frame;

pub const PERCEPTUAL_SEED: u64 = 1234;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptualProxyConfig {
    pub n_filters: usize,
    pub filter_size: usize,
    pub seed: u64,
}

impl Default for PerceptualProxyConfig {
    fn default() -> Self {
        Self {
            n_filters: 8,
            filter_size: 3,
            seed: PERCEPTUAL_SEED,
        }
    }
}

/// A bank of `n_filters` odd-sized kernels, drawn once from
/// `U(-1, 1) / filter_size` and never updated. Responses use stride 1 and
/// zero padding, so every pixel is the center of one response per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptualProxy {
    filter_size: usize,
    filters: Vec<Vec<f64>>,
}

impl PerceptualProxy {
    pub fn new(cfg: &PerceptualProxyConfig) -> Result<Self> {
        if cfg.filter_size.is_multiple_of(2) || cfg.n_filters == 0 {
            return Err(Error::Config(format!(
                "perceptual proxy needs an odd filter size and at least one filter, got {cfg:?}"
            )));
        }
        let mut r = rng::seeded(cfg.seed);
        let k = cfg.filter_size;
        let scale = 1.0 / k as f64;
        let filters = (0..cfg.n_filters)
            .map(|_| (0..k * k).map(|_| scale * r.random_range(-1.0..1.0)).collect())
            .collect();
        Ok(Self {
            filter_size: k,
            filters,
        })
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// Absolute filter responses, laid out filter-major then row-major.
    pub fn responses(&self, f: &Frame) -> Vec<f64> {
        let size = f.size() as isize;
        let half = (self.filter_size / 2) as isize;
        let k = self.filter_size as isize;
        let mut out = Vec::with_capacity(self.filters.len() * f.pixels().len());
        for w in &self.filters {
            for y in 0..size {
                for x in 0..size {
                    let mut s = 0.0;
                    for dy in 0..k {
                        let yy = y + dy - half;
                        if yy < 0 || yy >= size {
                            continue;
                        }
                        for dx in 0..k {
                            let xx = x + dx - half;
                            if xx < 0 || xx >= size {
                                continue;
                            }
                            s += w[(dy * k + dx) as usize] * f.get(xx as usize, yy as usize);
                        }
                    }
                    out.push(s.abs());
                }
            }
        }
        out
    }

    /// Mean absolute difference of the two frames' absolute responses.
    pub fn distance(&self, a: &Frame, b: &Frame) -> Result<f64> {
        if a.size() != b.size() {
            return Err(Error::Shape(format!(
                "perceptual distance between {0}x{0} and {1}x{1} frames",
                a.size(),
                b.size()
            )));
        }
        let ra = self.responses(a);
        let rb = self.responses(b);
        Ok(ra.iter().zip(&rb).map(|(x, y)| (x - y).abs()).sum::<f64>() / ra.len() as f64)
    }
}
