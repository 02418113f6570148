//! Half-stride patch grids over an image, with mirror padding for sizes that
//! are not a multiple of the patch.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;
use crate::window::PositionClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingPolicy {
    /// Mirror the image (without repeating the edge sample) up to the next
    /// multiple of the patch size, and to at least two patches per axis.
    #[default]
    Reflect,
    /// Require exact multiples with at least two patches per axis.
    Reject,
}

impl FromStr for PaddingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(PaddingPolicy::Reflect),
            "reject" => Ok(PaddingPolicy::Reject),
            other => Err(Error::Parameter(format!(
                "unknown padding policy `{other}`"
            ))),
        }
    }
}

impl fmt::Display for PaddingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaddingPolicy::Reflect => "reflect",
            PaddingPolicy::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Half-stride tiling, `(2n - 1)(2m - 1)` patches.
    Overlapping,
    /// Abutting tiles, `n * m` patches.
    NonOverlapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    image_height: usize,
    image_width: usize,
    patch_height: usize,
    patch_width: usize,
    base_rows: usize,
    base_cols: usize,
    pad_bottom: usize,
    pad_right: usize,
}

impl PatchGrid {
    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn patch_height(&self) -> usize {
        self.patch_height
    }

    pub fn patch_width(&self) -> usize {
        self.patch_width
    }

    pub fn stride_y(&self) -> usize {
        self.patch_height / 2
    }

    pub fn stride_x(&self) -> usize {
        self.patch_width / 2
    }

    /// Non-overlapping patch rows (`n`).
    pub fn base_rows(&self) -> usize {
        self.base_rows
    }

    /// Non-overlapping patch columns (`m`).
    pub fn base_cols(&self) -> usize {
        self.base_cols
    }

    pub fn overlap_rows(&self) -> usize {
        2 * self.base_rows - 1
    }

    pub fn overlap_cols(&self) -> usize {
        2 * self.base_cols - 1
    }

    pub fn pad_bottom(&self) -> usize {
        self.pad_bottom
    }

    pub fn pad_right(&self) -> usize {
        self.pad_right
    }

    pub fn padded_height(&self) -> usize {
        self.image_height + self.pad_bottom
    }

    pub fn padded_width(&self) -> usize {
        self.image_width + self.pad_right
    }

    pub fn patch_count(&self, mode: GridMode) -> usize {
        match mode {
            GridMode::Overlapping => self.overlap_rows() * self.overlap_cols(),
            GridMode::NonOverlapping => self.base_rows * self.base_cols,
        }
    }

    /// Overlapping-grid reference at `(row, col)`.
    pub fn overlapping_ref(&self, row: usize, col: usize) -> Result<PatchRef> {
        let (rows, cols) = (self.overlap_rows(), self.overlap_cols());
        if row >= rows || col >= cols {
            return Err(Error::Dimensions(format!(
                "patch ({row}, {col}) outside {rows}x{cols} grid"
            )));
        }
        Ok(PatchRef {
            row,
            col,
            offset_y: row * self.stride_y(),
            offset_x: col * self.stride_x(),
            position: PositionClass::for_patch(row, col, rows, cols),
        })
    }

    /// Index of an overlapping reference in row-major enumeration order.
    pub fn overlapping_index(&self, patch: &PatchRef) -> Option<usize> {
        let expected = self.overlapping_ref(patch.row, patch.col).ok()?;
        (expected == *patch).then(|| patch.row * self.overlap_cols() + patch.col)
    }

    /// Index of a non-overlapping reference in row-major enumeration order.
    pub fn non_overlapping_index(&self, patch: &PatchRef) -> Option<usize> {
        let valid = patch.row < self.base_rows
            && patch.col < self.base_cols
            && patch.offset_y == patch.row * self.patch_height
            && patch.offset_x == patch.col * self.patch_width
            && patch.position == PositionClass::Interior;
        valid.then(|| patch.row * self.base_cols + patch.col)
    }
}

/// One patch of a grid: its index, top-left offset on the padded canvas, and
/// position class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub row: usize,
    pub col: usize,
    pub offset_y: usize,
    pub offset_x: usize,
    pub position: PositionClass,
}

fn padded_count(len: usize, patch: usize, policy: PaddingPolicy, axis: &str) -> Result<usize> {
    if len < patch {
        return Err(Error::Dimensions(format!(
            "image {axis} {len} is smaller than the patch ({patch})"
        )));
    }
    match policy {
        PaddingPolicy::Reject => {
            if len % patch != 0 || len / patch < 2 {
                return Err(Error::Dimensions(format!(
                    "image {axis} {len} must be a multiple of {patch} covering at least two patches"
                )));
            }
            Ok(len / patch)
        }
        PaddingPolicy::Reflect => Ok(len.div_ceil(patch).max(2)),
    }
}

pub fn plan_grid(
    image_height: usize,
    image_width: usize,
    patch_height: usize,
    patch_width: usize,
    padding: PaddingPolicy,
) -> Result<PatchGrid> {
    for (len, axis) in [(patch_height, "height"), (patch_width, "width")] {
        if len < 2 || len % 2 != 0 {
            return Err(Error::Dimensions(format!(
                "patch {axis} must be even and at least 2, got {len}"
            )));
        }
    }
    let base_rows = padded_count(image_height, patch_height, padding, "height")?;
    let base_cols = padded_count(image_width, patch_width, padding, "width")?;
    Ok(PatchGrid {
        image_height,
        image_width,
        patch_height,
        patch_width,
        base_rows,
        base_cols,
        pad_bottom: base_rows * patch_height - image_height,
        pad_right: base_cols * patch_width - image_width,
    })
}

/// All patch references of `grid` in row-major order.
pub fn enumerate_patches(grid: &PatchGrid, mode: GridMode) -> Vec<PatchRef> {
    match mode {
        GridMode::Overlapping => (0..grid.overlap_rows())
            .flat_map(|r| (0..grid.overlap_cols()).map(move |c| (r, c)))
            .map(|(r, c)| grid.overlapping_ref(r, c).expect("in range"))
            .collect(),
        GridMode::NonOverlapping => (0..grid.base_rows)
            .flat_map(|r| (0..grid.base_cols).map(move |c| (r, c)))
            .map(|(row, col)| PatchRef {
                row,
                col,
                offset_y: row * grid.patch_height,
                offset_x: col * grid.patch_width,
                position: PositionClass::Interior,
            })
            .collect(),
    }
}

/// Maps a padded-canvas coordinate onto `[0, len)` by mirror reflection
/// without repeating the edge sample (`... 2 1 | 0 1 2 ... n-1 | n-2 ...`).
pub fn reflect_index(pos: usize, len: usize) -> usize {
    if len <= 1 {
        return 0;
    }
    if pos < len {
        return pos;
    }
    let period = 2 * (len - 1);
    let k = pos % period;
    if k < len {
        k
    } else {
        period - k
    }
}

/// Copies the pixels under `patch`, reflecting reads that fall in the padding.
pub fn extract_patch(
    image: &ImageTensor,
    patch: &PatchRef,
    grid: &PatchGrid,
) -> Result<ImageTensor> {
    if (image.height(), image.width()) != (grid.image_height, grid.image_width) {
        return Err(Error::Dimensions(format!(
            "image is {}x{}, grid expects {}x{}",
            image.height(),
            image.width(),
            grid.image_height,
            grid.image_width
        )));
    }
    if grid.overlapping_index(patch).is_none() && grid.non_overlapping_index(patch).is_none() {
        return Err(Error::ForeignPatch(*patch));
    }
    let (ph, pw) = (grid.patch_height, grid.patch_width);
    let (h, w) = (grid.image_height, grid.image_width);
    let inside = patch.offset_y + ph <= h && patch.offset_x + pw <= w;
    if inside {
        return image.crop(patch.offset_y, patch.offset_x, ph, pw);
    }
    let cols: Vec<usize> = (0..pw)
        .map(|i| reflect_index(patch.offset_x + i, w))
        .collect();
    let mut out = ImageTensor::zeros(image.channels(), ph, pw);
    for c in 0..image.channels() {
        for j in 0..ph {
            let src = image.row(c, reflect_index(patch.offset_y + j, h));
            for (dst, &x) in out.row_mut(c, j).iter_mut().zip(&cols) {
                *dst = src[x];
            }
        }
    }
    Ok(out)
}

/// The image extended to the grid's padded canvas.
pub fn pad_image(image: &ImageTensor, grid: &PatchGrid) -> Result<ImageTensor> {
    if (image.height(), image.width()) != (grid.image_height, grid.image_width) {
        return Err(Error::Dimensions("image does not match grid".into()));
    }
    let (h, w) = (grid.image_height, grid.image_width);
    Ok(ImageTensor::from_fn(
        image.channels(),
        grid.padded_height(),
        grid.padded_width(),
        |c, y, x| image.get(c, reflect_index(y, h), reflect_index(x, w)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configuration_counts() {
        let g = plan_grid(1024, 1024, 128, 128, PaddingPolicy::Reject).unwrap();
        assert_eq!((g.base_rows(), g.base_cols()), (8, 8));
        assert_eq!(g.patch_count(GridMode::Overlapping), 225);
        assert_eq!(g.patch_count(GridMode::NonOverlapping), 64);
        assert_eq!(g.stride_y(), 64);
    }

    #[test]
    fn reflect_pads_to_next_multiple() {
        let g = plan_grid(1000, 1024, 128, 128, PaddingPolicy::Reflect).unwrap();
        assert_eq!(g.pad_bottom(), 24);
        assert_eq!(g.base_rows(), 8);
        assert_eq!(g.pad_right(), 0);
        assert!(plan_grid(1000, 1024, 128, 128, PaddingPolicy::Reject).is_err());
    }

    #[test]
    fn single_patch_images_pad_to_two() {
        let g = plan_grid(128, 200, 128, 128, PaddingPolicy::Reflect).unwrap();
        assert_eq!((g.base_rows(), g.base_cols()), (2, 2));
        assert_eq!((g.pad_bottom(), g.pad_right()), (128, 56));
        assert!(plan_grid(128, 256, 128, 128, PaddingPolicy::Reject).is_err());
    }

    #[test]
    fn rejects_small_images_and_odd_patches() {
        assert!(plan_grid(100, 256, 128, 128, PaddingPolicy::Reflect).is_err());
        assert!(plan_grid(256, 256, 127, 128, PaddingPolicy::Reflect).is_err());
        assert!(plan_grid(256, 256, 128, 0, PaddingPolicy::Reject).is_err());
    }

    #[test]
    fn enumeration_order_and_positions() {
        let g = plan_grid(1024, 1024, 128, 128, PaddingPolicy::Reject).unwrap();
        let refs = enumerate_patches(&g, GridMode::Overlapping);
        assert_eq!(refs.len(), 225);
        let first = refs[0];
        assert_eq!(
            (first.row, first.col, first.offset_y, first.offset_x),
            (0, 0, 0, 0)
        );
        assert_eq!(first.position, PositionClass::UpLeft);
        let last = refs[224];
        assert_eq!(
            (last.row, last.col, last.offset_y, last.offset_x),
            (14, 14, 896, 896)
        );
        assert_eq!(last.position, PositionClass::DownRight);
        let left = refs[7 * 15];
        assert_eq!((left.row, left.col), (7, 0));
        assert_eq!(left.position, PositionClass::Left);
    }

    #[test]
    fn minimal_grid_has_every_position_once() {
        let g = plan_grid(256, 256, 128, 128, PaddingPolicy::Reject).unwrap();
        let mut positions: Vec<_> = enumerate_patches(&g, GridMode::Overlapping)
            .into_iter()
            .map(|p| p.position)
            .collect();
        positions.sort();
        let mut all = PositionClass::ALL.to_vec();
        all.sort();
        assert_eq!(positions, all);
    }

    #[test]
    fn non_overlapping_refs_are_interior_and_abut() {
        let g = plan_grid(256, 384, 128, 128, PaddingPolicy::Reject).unwrap();
        let refs = enumerate_patches(&g, GridMode::NonOverlapping);
        assert_eq!(refs.len(), 6);
        assert!(refs.iter().all(|p| p.position == PositionClass::Interior));
        assert_eq!((refs[5].offset_y, refs[5].offset_x), (128, 256));
    }

    #[test]
    fn coverage_counts_are_one_two_or_four() {
        let g = plan_grid(48, 64, 16, 16, PaddingPolicy::Reject).unwrap();
        let (h, w) = (g.padded_height(), g.padded_width());
        let mut count = vec![0u32; h * w];
        for p in enumerate_patches(&g, GridMode::Overlapping) {
            for y in p.offset_y..p.offset_y + 16 {
                for x in p.offset_x..p.offset_x + 16 {
                    count[y * w + x] += 1;
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let edge_y = y < 8 || y >= h - 8;
                let edge_x = x < 8 || x >= w - 8;
                let expected = match (edge_y, edge_x) {
                    (true, true) => 1,
                    (true, false) | (false, true) => 2,
                    (false, false) => 4,
                };
                assert_eq!(count[y * w + x], expected, "({y}, {x})");
            }
        }
    }

    #[test]
    fn extract_constant_and_ramp() {
        let g = plan_grid(256, 256, 128, 128, PaddingPolicy::Reject).unwrap();
        let constant = ImageTensor::filled(2, 256, 256, 7.0);
        for p in enumerate_patches(&g, GridMode::Overlapping) {
            let patch = extract_patch(&constant, &p, &g).unwrap();
            assert!(patch.as_slice().iter().all(|&v| v == 7.0));
        }
        let ramp = ImageTensor::from_fn(1, 256, 256, |_, _, x| x as f64);
        let p = g.overlapping_ref(0, 1).unwrap();
        assert_eq!(p.offset_x, 64);
        let patch = extract_patch(&ramp, &p, &g).unwrap();
        for j in 0..128 {
            assert_eq!(patch.get(0, j, 0), 64.0);
        }
    }

    #[test]
    fn padding_rows_mirror_without_repeat() {
        let (h, w) = (1000, 256);
        let g = plan_grid(h, w, 128, 128, PaddingPolicy::Reflect).unwrap();
        let img = ImageTensor::from_fn(1, h, w, |_, y, _| y as f64);
        let bottom = g.overlapping_ref(g.overlap_rows() - 1, 0).unwrap();
        assert_eq!(bottom.offset_y, 896);
        let patch = extract_patch(&img, &bottom, &g).unwrap();
        for p in 0..24 {
            let local = h + p - bottom.offset_y;
            assert_eq!(patch.get(0, local, 5), (h - 2 - p) as f64, "pad row {p}");
        }
        assert_eq!(patch.get(0, 127, 0), 975.0);
    }

    #[test]
    fn reflect_index_handles_long_pads() {
        // 128 rows padded to 256: indices past one full mirror wrap around.
        assert_eq!(reflect_index(128, 128), 126);
        assert_eq!(reflect_index(254, 128), 0);
        assert_eq!(reflect_index(255, 128), 1);
        assert_eq!(reflect_index(9, 1), 0);
        for pos in 0..1000 {
            assert!(reflect_index(pos, 7) < 7);
        }
    }

    #[test]
    fn extract_rejects_foreign_refs_and_wrong_images() {
        let g = plan_grid(256, 256, 128, 128, PaddingPolicy::Reject).unwrap();
        let img = ImageTensor::zeros(1, 256, 256);
        let mut bad = g.overlapping_ref(1, 1).unwrap();
        bad.offset_x += 1;
        assert!(matches!(
            extract_patch(&img, &bad, &g),
            Err(Error::ForeignPatch(_))
        ));
        let wrong = ImageTensor::zeros(1, 255, 256);
        let ok = g.overlapping_ref(1, 1).unwrap();
        assert!(extract_patch(&wrong, &ok, &g).is_err());
    }

    #[test]
    fn non_overlapping_round_trip_reproduces_padded_image() {
        let g = plan_grid(200, 150, 64, 32, PaddingPolicy::Reflect).unwrap();
        let img = ImageTensor::from_fn(3, 200, 150, |c, y, x| (c * 7 + y * 3 + x) as f64 * 0.01);
        let padded = pad_image(&img, &g).unwrap();
        let mut rebuilt = ImageTensor::zeros(3, g.padded_height(), g.padded_width());
        for p in enumerate_patches(&g, GridMode::NonOverlapping) {
            let patch = extract_patch(&img, &p, &g).unwrap();
            for c in 0..3 {
                for j in 0..64 {
                    for i in 0..32 {
                        rebuilt.set(c, p.offset_y + j, p.offset_x + i, patch.get(c, j, i));
                    }
                }
            }
        }
        assert_eq!(rebuilt, padded);
    }

    #[test]
    fn patch_count_law() {
        for n in 2..=12 {
            for m in 2..=12 {
                let g = plan_grid(n * 8, m * 8, 8, 8, PaddingPolicy::Reject).unwrap();
                let refs = enumerate_patches(&g, GridMode::Overlapping);
                assert_eq!(refs.len(), 4 * n * m - 2 * n - 2 * m + 1);
                assert_eq!(refs.len(), (2 * n - 1) * (2 * m - 1));
            }
        }
    }
}
