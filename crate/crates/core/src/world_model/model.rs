use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mse, psnr_db, ssim};
use super::perceptual::PerceptualProxy;
use crate::chunk::ActionChunk;
use crate::error::{shape_check, Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{AdamW, Activation, Mlp, NetworkSpec, OutputActivation};
use crate::rng;
use crate::toyworld::{ChunkRecord, EnvConfig, Frame};

pub const WM_HIDDEN: [usize; 2] = [256, 256];
pub const WM_SECTION: &str = "world_model";
pub const WM_OPT_SECTION: &str = "world_model_opt";

/// Next-frame regressor `g(frame, action) -> frame`.
///
/// The network output is unbounded; it is clamped to `[0, 1]` when used for
/// prediction or rollout, but the training loss sees the raw output.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    net: Mlp,
    frame_size: usize,
    action_dim: usize,
}

/// One teacher-forced training example.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub frame: &'a Frame,
    pub action: &'a [f64],
    pub next: &'a Frame,
}

impl WorldModel {
    pub fn spec_for(cfg: &EnvConfig) -> Result<NetworkSpec> {
        NetworkSpec::with_hidden(
            cfg.pixels() + cfg.action_dim,
            &WM_HIDDEN,
            cfg.pixels(),
            Activation::Tanh,
            OutputActivation::Identity,
        )
    }

    pub fn new(cfg: &EnvConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            net: Mlp::seeded(Self::spec_for(cfg)?, seed),
            frame_size: cfg.frame_size,
            action_dim: cfg.action_dim,
        })
    }

    pub fn zeros(cfg: &EnvConfig) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(Self::spec_for(cfg)?),
            frame_size: cfg.frame_size,
            action_dim: cfg.action_dim,
        })
    }

    /// Wraps a loaded network, checking it against the environment shape.
    pub fn from_net(net: Mlp, cfg: &EnvConfig) -> Result<Self> {
        let expected = Self::spec_for(cfg)?;
        if net.spec() != &expected {
            return Err(Error::Shape(format!(
                "world model layers {:?} do not match env (expected {:?})",
                net.spec().layer_sizes(),
                expected.layer_sizes()
            )));
        }
        Ok(Self {
            net,
            frame_size: cfg.frame_size,
            action_dim: cfg.action_dim,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &EnvConfig) -> Result<Self> {
        Self::from_net(ckpt.network(WM_SECTION)?.clone(), cfg)
    }

    pub fn write_into(&self, ckpt: Checkpoint) -> Checkpoint {
        ckpt.with_network(WM_SECTION, &self.net)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    fn input(&self, frame: &Frame, action: &[f64]) -> Result<Vec<f64>> {
        shape_check("world model frame", self.frame_size, frame.size())?;
        shape_check("world model action", self.action_dim, action.len())?;
        let mut x = Vec::with_capacity(frame.pixels().len() + action.len());
        x.extend_from_slice(frame.pixels());
        x.extend_from_slice(action);
        Ok(x)
    }

    /// Raw (unclamped) network output.
    pub fn predict_raw(&self, frame: &Frame, action: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(&self.input(frame, action)?)
    }

    pub fn predict_next(&self, frame: &Frame, action: &[f64]) -> Result<Frame> {
        Ok(Frame::from_pixels(self.frame_size, self.predict_raw(frame, action)?)?.clamped())
    }

    /// Autoregressive rollout: each predicted frame is fed back with the next
    /// action. Returns one frame per action.
    pub fn rollout(&self, initial: &Frame, actions: &ActionChunk) -> Result<Vec<Frame>> {
        shape_check("rollout action width", self.action_dim, actions.action_dim())?;
        let mut frames = Vec::with_capacity(actions.horizon());
        let mut current = initial.clone();
        for a in actions.rows() {
            let next = self.predict_next(&current, a)?;
            frames.push(next.clone());
            current = next;
        }
        Ok(frames)
    }

    /// Mean per-pixel squared error over the batch and its parameter gradient.
    pub fn loss_and_grad(&self, batch: &[Transition<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty world-model batch".into()));
        }
        let scale = 1.0 / (batch.len() * self.frame_size * self.frame_size) as f64;
        let per_sample = batch
            .par_iter()
            .map(|tr| -> Result<(f64, Vec<f64>)> {
                let tape = self.net.forward_tape(&self.input(tr.frame, tr.action)?)?;
                let mut sq = 0.0;
                let out_grad: Vec<f64> = tape
                    .output()
                    .iter()
                    .zip(tr.next.pixels())
                    .map(|(y, t)| {
                        let d = y - t;
                        sq += d * d;
                        2.0 * d * scale
                    })
                    .collect();
                let mut g = vec![0.0; self.net.param_count()];
                self.net.backward_tape(&tape, &out_grad, &mut g)?;
                Ok((sq, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.net.param_count()];
        let mut total = 0.0;
        for (sq, g) in per_sample {
            total += sq;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((total * scale, grad))
    }

    /// One AdamW update; returns the pre-update loss. A non-finite loss
    /// skips the update.
    pub fn train_step(&mut self, opt: &mut AdamW, batch: &[Transition<'_>]) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(batch)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("world-model loss is {loss}")));
        }
        opt.step(self.net.params_mut(), &grad)?;
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
}

impl Default for WmTrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            batch_size: 16,
            steps: 5000,
        }
    }
}

impl WmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("wm.lr must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("wm.batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Flattens records into their teacher-forced transitions.
pub fn transitions(records: &[ChunkRecord]) -> Vec<Transition<'_>> {
    records
        .iter()
        .flat_map(|r| {
            r.transitions()
                .map(|(frame, action, next)| Transition { frame, action, next })
        })
        .collect()
}

/// Batch for training step `step`: uniform draws with replacement, seeded by
/// `(seed, step)` so a resumed run sees the same batches.
pub fn sample_batch<'a>(
    pool: &[Transition<'a>],
    batch_size: usize,
    seed: u64,
    step: u64,
) -> Vec<Transition<'a>> {
    use rand::Rng as _;
    let mut r = rng::derived(seed, &[step]);
    (0..batch_size)
        .map(|_| pool[r.random_range(0..pool.len())])
        .collect()
}

/// Runs steps `start_step..cfg.steps`, calling `on_step(step, loss, model, opt)`
/// after each update.
pub fn train_world_model<F>(
    model: &mut WorldModel,
    opt: &mut AdamW,
    records: &[ChunkRecord],
    cfg: &WmTrainConfig,
    seed: u64,
    start_step: usize,
    mut on_step: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &WorldModel, &AdamW) -> Result<()>,
{
    cfg.validate()?;
    let pool = transitions(records);
    if pool.is_empty() {
        return Err(Error::Config("world-model training set is empty".into()));
    }
    for step in start_step..cfg.steps {
        let batch = sample_batch(&pool, cfg.batch_size, seed, step as u64);
        let loss = model.train_step(opt, &batch)?;
        on_step(step, loss, model, opt)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmMetrics {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub pdist: f64,
    pub frames: usize,
}

/// Per-frame metrics between `predicted` and `truth`, averaged over all frames.
pub fn frame_metrics(
    pairs: &[(Frame, Frame)],
    proxy: &PerceptualProxy,
) -> Result<WmMetrics> {
    if pairs.is_empty() {
        return Err(Error::Config("no frames to evaluate".into()));
    }
    let n = pairs.len() as f64;
    let mut acc = WmMetrics {
        mse: 0.0,
        psnr_db: 0.0,
        ssim: 0.0,
        pdist: 0.0,
        frames: pairs.len(),
    };
    for (p, t) in pairs {
        let m = mse(p, t);
        acc.mse += m;
        acc.psnr_db += psnr_db(m);
        acc.ssim += ssim(p, t);
        acc.pdist += proxy.distance(p, t)?;
    }
    acc.mse /= n;
    acc.psnr_db /= n;
    acc.ssim /= n;
    acc.pdist /= n;
    Ok(acc)
}

/// Rolls the model out over each record's action chunk from its initial
/// frame and scores the generated frames against the stored ones.
pub fn wm_eval_metrics(
    model: &WorldModel,
    records: &[ChunkRecord],
    proxy: &PerceptualProxy,
) -> Result<WmMetrics> {
    if records.is_empty() {
        return Err(Error::Config("held-out dataset is empty".into()));
    }
    let pairs = records
        .par_iter()
        .map(|r| {
            let generated = model.rollout(&r.frame, &r.actions)?;
            Ok(generated.into_iter().zip(r.future_frames.iter().cloned()).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    frame_metrics(&pairs, proxy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradient_check, AdamWConfig, GradCheckOptions};
    use crate::toyworld::{generate_dataset, PerturbSpec};
    use crate::world_model::PerceptualProxyConfig;

    fn small_env() -> EnvConfig {
        EnvConfig { frame_size: 8, chunk_len: 4, ..Default::default() }
    }

    #[test]
    fn zero_model_predicts_black() {
        let cfg = EnvConfig::default();
        let wm = WorldModel::zeros(&cfg).unwrap();
        let f = Frame::filled(16, 0.7);
        assert_eq!(wm.predict_next(&f, &[0.1, 0.2, 0.3]).unwrap(), Frame::zeros(16));
    }

    #[test]
    fn rollout_shapes_and_prefix_property() {
        let cfg = EnvConfig::default();
        let wm = WorldModel::new(&cfg, 3).unwrap();
        let recs = generate_dataset(&cfg, 1, &PerturbSpec::none(), 0.0, 0).unwrap();
        let r = &recs[0];
        let frames = wm.rollout(&r.frame, &r.actions).unwrap();
        assert_eq!(frames.len(), 8);
        assert!(frames.iter().all(|f| f.pixels().iter().all(|p| (0.0..=1.0).contains(p))));
        let one = ActionChunk::from_vec(1, 3, r.actions.row(0).to_vec()).unwrap();
        assert_eq!(wm.rollout(&r.frame, &one).unwrap()[0], wm.predict_next(&r.frame, r.actions.row(0)).unwrap());
        for k in 1..8 {
            let prefix = ActionChunk::from_vec(k, 3, r.actions.as_slice()[..3 * k].to_vec()).unwrap();
            let short = wm.rollout(&r.frame, &prefix).unwrap();
            assert_eq!(&frames[..k], &short[..]);
            let ext = wm.predict_next(&short[k - 1], r.actions.row(k)).unwrap();
            assert_eq!(ext, frames[k]);
        }
        assert!(wm.rollout(&Frame::zeros(8), &r.actions).is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let cfg = small_env();
        let wm = WorldModel::new(&cfg, 5).unwrap();
        let recs = generate_dataset(&cfg, 2, &PerturbSpec::none(), 0.1, 1).unwrap();
        let pool = transitions(&recs);
        let batch = sample_batch(&pool, 4, 9, 0);
        let (_, grad) = wm.loss_and_grad(&batch).unwrap();
        let loss = |p: &[f64]| {
            let mut m = wm.clone();
            m.net_mut().params_mut().copy_from_slice(p);
            m.loss_and_grad(&batch).unwrap().0
        };
        let opts = GradCheckOptions { max_coords: 48, seed: 2, ..Default::default() };
        let err = gradient_check(wm.net().params().as_slice(), &grad, loss, &opts);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn loss_matches_streaming_accumulator() {
        let cfg = small_env();
        let wm = WorldModel::new(&cfg, 8).unwrap();
        let recs = generate_dataset(&cfg, 2, &PerturbSpec::none(), 0.1, 4).unwrap();
        let pool = transitions(&recs);
        let batch = sample_batch(&pool, 5, 1, 0);
        let (loss, _) = wm.loss_and_grad(&batch).unwrap();
        // Welford-style running mean over every pixel of every example.
        let (mut mean, mut n) = (0.0f64, 0.0f64);
        for tr in &batch {
            let y = wm.predict_raw(tr.frame, tr.action).unwrap();
            for (a, b) in y.iter().zip(tr.next.pixels()) {
                n += 1.0;
                mean += ((a - b) * (a - b) - mean) / n;
            }
        }
        assert!((loss - mean).abs() < 1e-12, "{loss} vs {mean}");
    }

    #[test]
    fn fixed_point_batch_has_zero_loss() {
        let cfg = small_env();
        let wm = WorldModel::new(&cfg, 2).unwrap();
        let f = Frame::filled(8, 0.2);
        let a = [0.3, -0.1, 0.0];
        let target = Frame::from_pixels(8, wm.predict_raw(&f, &a).unwrap()).unwrap();
        let (loss, grad) = wm
            .loss_and_grad(&[Transition { frame: &f, action: &a, next: &target }])
            .unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn constant_frame_training_converges() {
        let cfg = small_env();
        let mut wm = WorldModel::new(&cfg, 1).unwrap();
        let f = Frame::filled(8, 0.4);
        let next = Frame::filled(8, 0.6);
        let a = [0.5, 0.5, 1.0];
        let batch = vec![Transition { frame: &f, action: &a, next: &next }; 4];
        let mut opt = AdamW::new(wm.net().param_count(), AdamWConfig::with_lr(1e-3));
        let losses: Vec<f64> = (0..100).map(|_| wm.train_step(&mut opt, &batch).unwrap()).collect();
        assert!(losses[99] < 0.05 * losses[0]);
        // Non-increasing once Adam's step-to-step jitter is averaged out.
        let means: Vec<f64> = losses.chunks(20).map(|c| c.iter().sum::<f64>() / 20.0).collect();
        for w in means.windows(2) {
            assert!(w[1] <= w[0], "{means:?}");
        }
        for _ in 0..400 {
            wm.train_step(&mut opt, &batch).unwrap();
        }
        let pred = wm.predict_next(&f, &a).unwrap();
        assert!(mse(&pred, &next) < 1e-4);
    }

    #[test]
    fn perfect_rollouts_score_ideal_metrics() {
        let proxy = PerceptualProxy::new(&PerceptualProxyConfig::default()).unwrap();
        let f = Frame::filled(16, 0.25);
        let m = frame_metrics(&[(f.clone(), f)], &proxy).unwrap();
        assert_eq!((m.mse, m.psnr_db, m.pdist), (0.0, 99.0, 0.0));
        assert!((m.ssim - 1.0).abs() < 1e-12);
        let m = frame_metrics(&[(Frame::zeros(16), Frame::filled(16, 0.5))], &proxy).unwrap();
        assert_eq!(m.mse, 0.25);
        assert!((m.psnr_db - 6.0206).abs() < 1e-4);
        assert!(frame_metrics(&[], &proxy).is_err());
    }
}
