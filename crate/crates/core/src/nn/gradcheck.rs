use rand::seq::index;

use crate::rng;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    /// Coordinates checked; a seeded subset is drawn when the vector is longer.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 64,
            seed: 0,
        }
    }
}

/// `(f(p + h e_i) - f(p - h e_i)) / 2h`
pub fn central_difference<F: FnMut(&[f64]) -> f64>(params: &[f64], i: usize, h: f64, loss: &mut F) -> f64 {
    let mut p = params.to_vec();
    p[i] = params[i] + h;
    let up = loss(&p);
    p[i] = params[i] - h;
    let down = loss(&p);
    (up - down) / (2.0 * h)
}

/// Max over checked coordinates of `|analytic - numeric| / (|numeric| + 1e-8)`.
pub fn gradient_check<F: FnMut(&[f64]) -> f64>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    opts: &GradCheckOptions,
) -> f64 {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let coords: Vec<usize> = if params.len() <= opts.max_coords {
        (0..params.len()).collect()
    } else {
        let mut r = rng::seeded(opts.seed);
        let mut picked = index::sample(&mut r, params.len(), opts.max_coords).into_vec();
        picked.sort_unstable();
        picked
    };
    coords
        .into_iter()
        .map(|i| {
            let numeric = central_difference(params, i, opts.step, &mut loss);
            (analytic[i] - numeric).abs() / (numeric.abs() + 1e-8)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_has_identity_gradient() {
        let p: Vec<f64> = (0..10).map(|i| 0.3 * i as f64 - 1.2).collect();
        let loss = |q: &[f64]| 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        let err = gradient_check(&p, &p, loss, &GradCheckOptions::default());
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = vec![1.0, 2.0];
        let loss = |q: &[f64]| q[0] * q[0] + q[1];
        let err = gradient_check(&p, &[2.0, 2.0], loss, &GradCheckOptions::default());
        assert!(err > 0.5);
    }
}
