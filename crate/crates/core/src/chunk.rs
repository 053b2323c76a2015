use crate::error::{shape_check, Error, Result};

/// A `horizon x action_dim` block of actions, stored row-major (one row per
/// time step). Also used for the intermediate noisy states of the flow and
/// SDE samplers, which are not clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    horizon: usize,
    action_dim: usize,
    values: Vec<f64>,
}

impl ActionChunk {
    pub fn zeros(horizon: usize, action_dim: usize) -> Self {
        Self {
            horizon,
            action_dim,
            values: vec![0.0; horizon * action_dim],
        }
    }

    pub fn from_vec(horizon: usize, action_dim: usize, values: Vec<f64>) -> Result<Self> {
        shape_check("action chunk", horizon * action_dim, values.len())?;
        Ok(Self {
            horizon,
            action_dim,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let action_dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * action_dim);
        for r in rows {
            shape_check("action row", action_dim, r.len())?;
            values.extend_from_slice(r);
        }
        Ok(Self {
            horizon: rows.len(),
            action_dim,
            values,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.action_dim..(t + 1) * self.action_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.action_dim.max(1))
    }

    pub fn clamped(&self) -> Self {
        Self {
            horizon: self.horizon,
            action_dim: self.action_dim,
            values: self.values.iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        }
    }

    pub fn same_shape(&self, other: &ActionChunk) -> Result<()> {
        if self.horizon == other.horizon && self.action_dim == other.action_dim {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "action chunk {}x{} vs {}x{}",
                self.horizon, self.action_dim, other.horizon, other.action_dim
            )))
        }
    }

    pub fn max_abs_diff(&self, other: &ActionChunk) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
