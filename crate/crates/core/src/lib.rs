//! Seamless reconstruction of patch-wise predictions.
//!
//! A large image is cut into patches at half-patch stride, a per-patch
//! predictor runs on each one, and the predictions are recombined with 2-D
//! overlap-add windows so that patch borders, where predictors are least
//! reliable, are down-weighted. Windows adapt to the patch's position so the
//! image border is covered at full weight.
//!
//! ```
//! use patchblend::{plan_grid, reconstruct_with, ImageTensor, PaddingPolicy, PredictorSpec, WindowKind};
//!
//! let image = ImageTensor::from_fn(1, 64, 64, |_, y, x| ((x + y) % 5) as f64 / 4.0);
//! let grid = plan_grid(64, 64, 16, 16, PaddingPolicy::Reject).unwrap();
//! let out = reconstruct_with(&image, &PredictorSpec::Identity, &grid, Some(WindowKind::Hann)).unwrap();
//! assert!(out.max_abs_diff(&image).unwrap() < 1e-12);
//! ```

pub mod blend;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod imageio;
pub mod metrics;
pub mod predict;
pub mod simulate;
pub mod stats;
pub mod tensor;
pub mod tiling;
pub mod window;

pub use blend::{
    blend, blend_baseline, blend_progressive, reconstruct, reconstruct_with, BlendAccumulator,
    Stage,
};
pub use error::{Error, Result};
pub use evaluate::Evaluation;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use metrics::{adjusted_ssim, seam_band_mae, ssim, ssim_map, ssim_multichannel, SsimParams};
pub use predict::{PatchPredictor, PredictorSpec};
pub use stats::{exact_sign_test, paired_t_test, PairedComparison, TTest};
pub use tensor::ImageTensor;
pub use tiling::{enumerate_patches, plan_grid, GridMode, PaddingPolicy, PatchGrid, PatchRef};
pub use window::{
    make_window_1d, make_window_2d, weight_map, PositionClass, Window1D, Window2D, WindowKind,
    WindowSet,
};
