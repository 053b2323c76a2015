//! Learned next-frame simulator, its maximum-likelihood training (Gaussian,
//! unit variance, hence mean squared error) and frame-fidelity metrics.

mod metrics;
mod model;
mod perceptual;

pub use metrics::{l1, mse, psnr_db, ssim, PSNR_CAP_DB, SSIM_STRIDE, SSIM_WINDOW};
pub use model::{
    frame_metrics, sample_batch, train_world_model, transitions, wm_eval_metrics, Transition, WmMetrics,
    WmTrainConfig, WorldModel, WM_HIDDEN, WM_OPT_SECTION, WM_SECTION,
};
pub use perceptual::{PerceptualProxy, PerceptualProxyConfig, PERCEPTUAL_SEED};
