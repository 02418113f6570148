//! Accumulation of predicted patches into a full-size output.
//!
//! The canvas is the only full-size allocation: patches are weighted and
//! added one at a time in canonical row-major order, so the result is
//! bit-identical however the predictions were scheduled. Patches that
//! arrive early are held back until their turn.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::predict::{PatchPredictor, PredictorSpec};
use crate::tensor::ImageTensor;
use crate::tiling::{enumerate_patches, GridMode, PatchGrid, PatchRef};
use crate::window::{weight_map, WindowKind, WindowSet};

enum Weighting {
    /// Abutting tiles, no weights.
    Baseline,
    Windowed {
        windows: WindowSet,
        /// Per-pixel divisor, present when normalizing.
        norm: Option<Normalization>,
    },
}

struct Normalization {
    divisor: Vec<f64>,
    /// Pixels where every covering window is zero; they take the plain
    /// mean of the covering patches.
    unweighted: Vec<bool>,
}

impl Normalization {
    fn new(kind: WindowKind, grid: &PatchGrid) -> Result<Self> {
        let sums = weight_map(
            kind,
            grid.patch_height(),
            grid.patch_width(),
            grid.base_rows(),
            grid.base_cols(),
        )?;
        let unweighted: Vec<bool> = sums.iter().map(|&s| s <= 0.0).collect();
        let mut divisor = sums;
        if unweighted.iter().any(|&u| u) {
            let counts = coverage_counts(grid);
            for (k, d) in divisor.iter_mut().enumerate() {
                if unweighted[k] {
                    *d = counts[k];
                }
            }
        }
        Ok(Self {
            divisor,
            unweighted,
        })
    }
}

fn coverage_counts(grid: &PatchGrid) -> Vec<f64> {
    let w = grid.padded_width();
    let mut counts = vec![0.0; grid.padded_height() * w];
    for p in enumerate_patches(grid, GridMode::Overlapping) {
        for y in p.offset_y..p.offset_y + grid.patch_height() {
            for c in &mut counts[y * w + p.offset_x..][..grid.patch_width()] {
                *c += 1.0;
            }
        }
    }
    counts
}

/// Streaming overlap-add of predicted patches over one grid.
pub struct BlendAccumulator {
    grid: PatchGrid,
    mode: GridMode,
    weighting: Weighting,
    canvas: Option<ImageTensor>,
    channels: Option<usize>,
    next: usize,
    total: usize,
    seen: Vec<bool>,
    pending: BTreeMap<usize, (PatchRef, ImageTensor)>,
}

impl BlendAccumulator {
    /// Windowed overlap-add. Non-COLA kinds are normalized by the summed
    /// window weights.
    pub fn windowed(grid: &PatchGrid, kind: WindowKind) -> Result<Self> {
        Self::windowed_with(grid, kind, !kind.is_cola())
    }

    pub fn windowed_with(grid: &PatchGrid, kind: WindowKind, normalize: bool) -> Result<Self> {
        let windows = WindowSet::new(kind, grid.patch_height(), grid.patch_width())?;
        let norm = if normalize {
            Some(Normalization::new(kind, grid)?)
        } else {
            None
        };
        Ok(Self::new(
            grid,
            GridMode::Overlapping,
            Weighting::Windowed { windows, norm },
        ))
    }

    /// Unweighted placement of the non-overlapping tiles.
    pub fn baseline(grid: &PatchGrid) -> Self {
        Self::new(grid, GridMode::NonOverlapping, Weighting::Baseline)
    }

    fn new(grid: &PatchGrid, mode: GridMode, weighting: Weighting) -> Self {
        let total = grid.patch_count(mode);
        Self {
            grid: *grid,
            mode,
            weighting,
            canvas: None,
            channels: None,
            next: 0,
            total,
            seen: vec![false; total],
            pending: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    /// Adds one predicted patch. Patches may arrive in any order; each must
    /// appear exactly once.
    pub fn push(&mut self, at: &PatchRef, patch: &ImageTensor) -> Result<()> {
        let index = match self.mode {
            GridMode::Overlapping => self.grid.overlapping_index(at),
            GridMode::NonOverlapping => self.grid.non_overlapping_index(at),
        }
        .ok_or(Error::ForeignPatch(*at))?;
        if self.seen[index] {
            return Err(Error::DuplicatePatch(*at));
        }
        let (ph, pw) = (self.grid.patch_height(), self.grid.patch_width());
        if (patch.height(), patch.width()) != (ph, pw) {
            return Err(Error::Dimensions(format!(
                "patch is {}x{}, grid expects {ph}x{pw}",
                patch.height(),
                patch.width()
            )));
        }
        match self.channels {
            Some(expected) if expected != patch.channels() => {
                return Err(Error::ChannelMismatch {
                    expected,
                    actual: patch.channels(),
                })
            }
            _ => self.channels = Some(patch.channels()),
        }
        if !patch.is_finite() {
            return Err(Error::NonFinite(*at));
        }
        self.seen[index] = true;

        if index != self.next {
            self.pending.insert(index, (*at, patch.clone()));
            return Ok(());
        }
        self.accumulate(at, patch);
        self.next += 1;
        while let Some((at, patch)) = self.pending.remove(&self.next) {
            self.accumulate(&at, &patch);
            self.next += 1;
        }
        Ok(())
    }

    fn accumulate(&mut self, at: &PatchRef, patch: &ImageTensor) {
        let grid = &self.grid;
        let canvas = self.canvas.get_or_insert_with(|| {
            ImageTensor::zeros(patch.channels(), grid.padded_height(), grid.padded_width())
        });
        let canvas_w = grid.padded_width();
        for c in 0..patch.channels() {
            for j in 0..grid.patch_height() {
                let src = patch.row(c, j);
                let y = at.offset_y + j;
                let dst = &mut canvas.row_mut(c, y)[at.offset_x..at.offset_x + grid.patch_width()];
                match &self.weighting {
                    Weighting::Baseline => dst.copy_from_slice(src),
                    Weighting::Windowed { windows, norm } => {
                        let weights = windows.get(at.position).row(j);
                        match norm {
                            Some(n) => {
                                let fallback = &n.unweighted[y * canvas_w + at.offset_x..];
                                for (i, (d, (&v, &w))) in
                                    dst.iter_mut().zip(src.iter().zip(weights)).enumerate()
                                {
                                    *d += if fallback[i] { v } else { w * v };
                                }
                            }
                            None => {
                                for (d, (&v, &w)) in dst.iter_mut().zip(src.iter().zip(weights)) {
                                    *d += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Completes the reconstruction on the padded canvas.
    pub fn finish_padded(self) -> Result<ImageTensor> {
        if self.next < self.total {
            return Err(Error::MissingPatches(self.total - self.next));
        }
        let mut canvas = self
            .canvas
            .ok_or_else(|| Error::Dimensions("grid has no patches".into()))?;
        if let Weighting::Windowed {
            norm: Some(norm), ..
        } = &self.weighting
        {
            for c in 0..canvas.channels() {
                for (v, d) in canvas.channel_mut(c).iter_mut().zip(&norm.divisor) {
                    *v /= d;
                }
            }
        }
        Ok(canvas)
    }

    /// Completes the reconstruction, cropped to the original image size.
    pub fn finish(self) -> Result<ImageTensor> {
        let (h, w) = (self.grid.image_height(), self.grid.image_width());
        let canvas = self.finish_padded()?;
        if (canvas.height(), canvas.width()) == (h, w) {
            Ok(canvas)
        } else {
            canvas.crop(0, 0, h, w)
        }
    }
}

/// Weights every overlapping patch by its position's window and sums them.
pub fn blend<'a>(
    patches: impl IntoIterator<Item = (&'a PatchRef, &'a ImageTensor)>,
    grid: &PatchGrid,
    kind: WindowKind,
) -> Result<ImageTensor> {
    let mut acc = BlendAccumulator::windowed(grid, kind)?;
    for (at, patch) in patches {
        acc.push(at, patch)?;
    }
    acc.finish()
}

/// Places the non-overlapping patches side by side without weighting.
pub fn blend_baseline<'a>(
    patches: impl IntoIterator<Item = (&'a PatchRef, &'a ImageTensor)>,
    grid: &PatchGrid,
) -> Result<ImageTensor> {
    let mut acc = BlendAccumulator::baseline(grid);
    for (at, patch) in patches {
        acc.push(at, patch)?;
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preview,
    Final,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Preview => "preview",
            Stage::Final => "final",
        })
    }
}

/// Two-pass reconstruction: the non-overlapping preview is produced from
/// `n * m` predictions and emitted first; the windowed result then reuses
/// those predictions for the patches at even grid indices and predicts only
/// the remaining ones.
pub fn blend_progressive(
    input: &ImageTensor,
    predictor: &PatchPredictor,
    grid: &PatchGrid,
    kind: WindowKind,
    mut emit: impl FnMut(Stage, &ImageTensor) -> Result<()>,
) -> Result<ImageTensor> {
    let base_refs = enumerate_patches(grid, GridMode::NonOverlapping);
    let mut preview = BlendAccumulator::baseline(grid);
    predictor.run(input, grid, &base_refs, |at, p| preview.push(at, &p))?;
    let preview_canvas = preview.finish_padded()?;
    let (h, w) = (grid.image_height(), grid.image_width());
    emit(Stage::Preview, &preview_canvas.crop(0, 0, h, w)?)?;

    let all = enumerate_patches(grid, GridMode::Overlapping);
    let reused = |at: &PatchRef| at.row % 2 == 0 && at.col % 2 == 0;
    let fresh: Vec<PatchRef> = all.iter().copied().filter(|p| !reused(p)).collect();
    let (ph, pw) = (grid.patch_height(), grid.patch_width());
    let mut acc = BlendAccumulator::windowed(grid, kind)?;
    let mut cursor = 0;
    let mut push_reused_before = |acc: &mut BlendAccumulator, limit: usize| -> Result<()> {
        while cursor < limit {
            let at = all[cursor];
            if reused(&at) {
                acc.push(&at, &preview_canvas.crop(at.offset_y, at.offset_x, ph, pw)?)?;
            }
            cursor += 1;
        }
        Ok(())
    };
    predictor.run(input, grid, &fresh, |at, p| {
        let index = grid.overlapping_index(at).expect("enumerated from grid");
        push_reused_before(&mut acc, index)?;
        acc.push(at, &p)?;
        Ok(())
    })?;
    push_reused_before(&mut acc, all.len())?;
    let result = acc.finish()?;
    emit(Stage::Final, &result)?;
    Ok(result)
}

/// Predicts and blends in one pass; `kind = None` gives the baseline.
pub fn reconstruct(
    input: &ImageTensor,
    predictor: &PatchPredictor,
    grid: &PatchGrid,
    kind: Option<WindowKind>,
) -> Result<ImageTensor> {
    let (mut acc, mode) = match kind {
        Some(k) => (BlendAccumulator::windowed(grid, k)?, GridMode::Overlapping),
        None => (BlendAccumulator::baseline(grid), GridMode::NonOverlapping),
    };
    let refs = enumerate_patches(grid, mode);
    predictor.run(input, grid, &refs, |at, p| acc.push(at, &p))?;
    acc.finish()
}

/// Convenience wrapper over [`reconstruct`] for a predictor spec.
pub fn reconstruct_with(
    input: &ImageTensor,
    spec: &PredictorSpec,
    grid: &PatchGrid,
    kind: Option<WindowKind>,
) -> Result<ImageTensor> {
    reconstruct(input, &PatchPredictor::new(spec.clone())?, grid, kind)
}
