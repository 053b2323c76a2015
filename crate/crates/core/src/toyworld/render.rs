use super::config::EnvConfig;
use super::env::{EnvState, Vec2};
use crate::error::{shape_check, Result};

pub const GOAL_INTENSITY: f64 = 0.3;
pub const OBJECT_INTENSITY: f64 = 0.6;
pub const AGENT_INTENSITY: f64 = 1.0;

/// Square grayscale image, row-major: pixel `(x, y)` is `pixels[y * size + x]`
/// with `x` the column and `y` the row.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    size: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            pixels: vec![0.0; size * size],
        }
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            pixels: vec![value; size * size],
        }
    }

    pub fn from_pixels(size: usize, pixels: Vec<f64>) -> Result<Self> {
        shape_check("frame", size * size, pixels.len())?;
        Ok(Self { size, pixels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.size + x] = v;
    }

    /// Every pixel clamped to `[0, 1]`.
    pub fn clamped(mut self) -> Self {
        self.pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        self
    }

    fn stamp(&mut self, pos: Vec2, intensity: f64) {
        let (cx, cy) = (blob_center(pos[0], self.size), blob_center(pos[1], self.size));
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.size - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.size - 1) {
                self.set(x, y, intensity);
            }
        }
    }
}

/// Pixel index of a unit-square coordinate: `floor(c * (size - 1) + 0.5)`,
/// i.e. round half up.
pub fn blob_center(c: f64, size: usize) -> usize {
    let scaled = c.clamp(0.0, 1.0) * (size - 1) as f64;
    ((scaled + 0.5).floor() as usize).min(size - 1)
}

/// Background 0; 3x3 blobs drawn goal, then object, then agent, later blobs
/// overwriting earlier ones.
pub fn render(state: &EnvState, cfg: &EnvConfig) -> Frame {
    let mut f = Frame::zeros(cfg.frame_size);
    f.stamp(state.goal_pos, GOAL_INTENSITY);
    f.stamp(state.object_pos, OBJECT_INTENSITY);
    f.stamp(state.agent_pos, AGENT_INTENSITY);
    f
}
