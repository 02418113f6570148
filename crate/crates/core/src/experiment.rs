//! End-to-end comparison on simulated data: border-noise predictions of
//! synthetic ground truth, blended with every window and with the
//! non-overlapping baseline, scored by SSIM.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::blend::BlendAccumulator;
use crate::error::{Error, Result};
use crate::evaluate::Evaluation;
use crate::metrics::{seam_band_mae, ssim_multichannel, SsimParams};
use crate::predict::{PatchPredictor, PredictorSpec};
use crate::simulate::simulate_truth;
use crate::stats::PairedComparison;
use crate::tensor::ImageTensor;
use crate::tiling::{enumerate_patches, plan_grid, GridMode, PaddingPolicy, PatchGrid, PatchRef};
use crate::window::WindowKind;

pub const BASELINE_LABEL: &str = "none";

/// Column order of the result tables.
pub const METHODS: [Option<WindowKind>; 6] = [
    None,
    Some(WindowKind::Average),
    Some(WindowKind::Pyramidal),
    Some(WindowKind::Hann),
    Some(WindowKind::BartlettHann),
    Some(WindowKind::Triangular),
];

pub fn method_label(method: Option<WindowKind>) -> &'static str {
    match method {
        None => BASELINE_LABEL,
        Some(kind) => kind.name(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub images: usize,
    pub height: usize,
    pub width: usize,
    pub patch_height: usize,
    pub patch_width: usize,
    pub classes: usize,
    pub amplitude: f64,
    pub falloff: f64,
    pub padding: PaddingPolicy,
    pub ssim: SsimParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            images: 14,
            height: 1024,
            width: 1024,
            patch_height: 128,
            patch_width: 128,
            classes: 3,
            amplitude: 0.5,
            falloff: 8.0,
            padding: PaddingPolicy::Reflect,
            ssim: SsimParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// `key=value` lines identifying the run.
    pub fn header(&self) -> Vec<String> {
        vec![
            format!("seed={}", self.seed),
            format!("images={}", self.images),
            format!("size={}x{}", self.height, self.width),
            format!("patch={}x{}", self.patch_height, self.patch_width),
            format!("classes={}", self.classes),
            format!("predictor={}", self.predictor_for(0)),
            format!("padding={}", self.padding),
            format!(
                "ssim=gaussian sigma {} radius {} k1 {} k2 {} range {}",
                self.ssim.gaussian_sigma,
                self.ssim.window_radius,
                self.ssim.k1,
                self.ssim.k2,
                self.ssim.dynamic_range
            ),
        ]
    }

    /// Noise seed of image `index`; image 0 uses the run seed itself.
    pub fn noise_seed(&self, index: usize) -> u64 {
        self.seed
            .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn predictor_for(&self, index: usize) -> PredictorSpec {
        PredictorSpec::BorderNoise {
            amplitude: self.amplitude,
            falloff: self.falloff,
            seed: self.noise_seed(index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub evaluation: Evaluation,
    /// Seam-band MAE per method, `seam_mae[method][image]`, in [`METHODS`] order.
    pub seam_mae: Vec<Vec<f64>>,
    pub predictions_per_image: usize,
}

impl ExperimentReport {
    pub fn seam_mae(&self, method: Option<WindowKind>) -> &[f64] {
        let k = METHODS
            .iter()
            .position(|m| *m == method)
            .expect("every method is tabulated");
        &self.seam_mae[k]
    }

    pub fn adjusted(&self, kind: WindowKind) -> Result<Vec<f64>> {
        self.evaluation.adjusted(kind.name())
    }

    pub fn versus_baseline(&self, kind: WindowKind) -> Result<PairedComparison> {
        self.evaluation.compare(kind.name(), BASELINE_LABEL)
    }

    pub fn summary(&self) -> Result<String> {
        let mut s = self.evaluation.summary(&self.config.header())?;
        let _ = writeln!(s, "predictions per image: {}", self.predictions_per_image);
        for method in METHODS {
            let mae = self.seam_mae(method);
            let mean = mae.iter().sum::<f64>() / mae.len() as f64;
            let _ = writeln!(s, "seam-band MAE {}: {mean:.6}", method_label(method));
        }
        Ok(s)
    }
}

/// Baseline slot of an overlapping patch at even grid indices.
fn as_base_patch(at: &PatchRef) -> Option<PatchRef> {
    (at.row % 2 == 0 && at.col % 2 == 0).then_some(PatchRef {
        row: at.row / 2,
        col: at.col / 2,
        position: crate::window::PositionClass::Interior,
        ..*at
    })
}

struct ImageOutcome {
    ssim: Vec<f64>,
    seam_mae: Vec<f64>,
}

fn run_image(config: &ExperimentConfig, grid: &PatchGrid, index: usize) -> Result<ImageOutcome> {
    let truth = simulate_truth(
        config.seed,
        index,
        config.height,
        config.width,
        config.classes,
    )?;
    let predictor = PatchPredictor::new(config.predictor_for(index))?.parallel(true);
    let mut accumulators = METHODS
        .iter()
        .map(|m| match m {
            None => Ok(BlendAccumulator::baseline(grid)),
            Some(kind) => BlendAccumulator::windowed(grid, *kind),
        })
        .collect::<Result<Vec<_>>>()?;
    let refs = enumerate_patches(grid, GridMode::Overlapping);
    predictor.run(&truth, grid, &refs, |at, prediction| {
        for (method, acc) in METHODS.iter().zip(accumulators.iter_mut()) {
            match method {
                None => {
                    if let Some(base) = as_base_patch(at) {
                        acc.push(&base, &prediction)?;
                    }
                }
                Some(_) => acc.push(at, &prediction)?,
            }
        }
        Ok(())
    })?;
    let outputs = accumulators
        .into_iter()
        .map(BlendAccumulator::finish)
        .collect::<Result<Vec<ImageTensor>>>()?;
    let ssim = outputs
        .par_iter()
        .map(|out| ssim_multichannel(out, &truth, &config.ssim))
        .collect::<Result<Vec<_>>>()?;
    let seam_mae = outputs
        .iter()
        .map(|out| seam_band_mae(out, &truth, config.patch_height, config.patch_width))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageOutcome { ssim, seam_mae })
}

/// Runs the whole comparison. Each patch is predicted once and the
/// prediction feeds every blending method.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.images < 2 {
        return Err(Error::Parameter(format!(
            "paired statistics need at least 2 images, got {}",
            config.images
        )));
    }
    let grid = plan_grid(
        config.height,
        config.width,
        config.patch_height,
        config.patch_width,
        config.padding,
    )?;
    if config.patch_height < 4 || config.patch_width < 4 {
        return Err(Error::Dimensions(
            "the pyramidal window needs patches of at least 4x4".into(),
        ));
    }
    let outcomes = (0..config.images)
        .map(|k| run_image(config, &grid, k))
        .collect::<Result<Vec<_>>>()?;

    let transpose = |pick: fn(&ImageOutcome) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..METHODS.len())
            .map(|m| outcomes.iter().map(|o| pick(o)[m]).collect())
            .collect()
    };
    let evaluation = Evaluation::from_scores(
        (0..config.images).map(|k| format!("sim-{k:03}")).collect(),
        METHODS
            .iter()
            .map(|m| method_label(*m).to_string())
            .collect(),
        BASELINE_LABEL,
        transpose(|o| &o.ssim),
    )?;
    Ok(ExperimentReport {
        config: config.clone(),
        evaluation,
        seam_mae: transpose(|o| &o.seam_mae),
        predictions_per_image: grid.patch_count(GridMode::Overlapping),
    })
}
