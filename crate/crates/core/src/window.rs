//! 1-D window functions, their separable 2-D realizations, the non-separable
//! pyramidal window, and the border/corner variants used at image margins.
//!
//! All separable windows use the periodic sampling convention
//! `w(i) = f(i / I)` for `i` in `0..I`, so that two copies shifted by `I/2`
//! add up to exactly one. The border and corner variants replace the taper
//! with a plateau of ones on the side that faces the image border; every
//! one of the nine variants is the product of a horizontal and a vertical
//! profile, which keeps the sum of all windows over the image equal to one.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Bartlett-Hann coefficients.
pub const BARTLETT_HANN_A0: f64 = 0.62;
pub const BARTLETT_HANN_A1: f64 = 0.48;
pub const BARTLETT_HANN_A2: f64 = 0.38;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowKind {
    Average,
    Hann,
    BartlettHann,
    Triangular,
    Pyramidal,
}

impl WindowKind {
    pub const ALL: [WindowKind; 5] = [
        WindowKind::Average,
        WindowKind::Hann,
        WindowKind::BartlettHann,
        WindowKind::Triangular,
        WindowKind::Pyramidal,
    ];

    /// Kinds whose half-overlapped copies sum to one without normalization.
    pub const COLA: [WindowKind; 4] = [
        WindowKind::Average,
        WindowKind::Hann,
        WindowKind::BartlettHann,
        WindowKind::Triangular,
    ];

    pub fn is_separable(self) -> bool {
        self != WindowKind::Pyramidal
    }

    pub fn is_cola(self) -> bool {
        self.is_separable()
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Average => "average",
            WindowKind::Hann => "hann",
            WindowKind::BartlettHann => "bartlett-hann",
            WindowKind::Triangular => "triangular",
            WindowKind::Pyramidal => "pyramidal",
        }
    }

    /// Periodic 1-D window value at sample `i` of `len`.
    fn sample(self, i: usize, len: usize) -> f64 {
        let t = i as f64 / len as f64;
        match self {
            WindowKind::Average => 0.5,
            WindowKind::Hann => 0.5 * (1.0 - (2.0 * PI * t).cos()),
            WindowKind::BartlettHann => {
                BARTLETT_HANN_A0
                    - BARTLETT_HANN_A1 * (t - 0.5).abs()
                    - BARTLETT_HANN_A2 * (2.0 * PI * t).cos()
            }
            WindowKind::Triangular => 1.0 - (2.0 * t - 1.0).abs(),
            WindowKind::Pyramidal => unreachable!("pyramidal has no 1-D factor"),
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(WindowKind::Average),
            "hann" => Ok(WindowKind::Hann),
            "bartlett-hann" | "bartletthann" | "bartlett_hann" => Ok(WindowKind::BartlettHann),
            "triangular" | "triangle" => Ok(WindowKind::Triangular),
            "pyramidal" | "pyramid" => Ok(WindowKind::Pyramidal),
            other => Err(Error::Parameter(format!("unknown window kind `{other}`"))),
        }
    }
}

/// Where a patch sits relative to the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PositionClass {
    Interior,
    Up,
    Down,
    Left,
    Right,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
}

impl PositionClass {
    pub const ALL: [PositionClass; 9] = [
        PositionClass::Interior,
        PositionClass::Up,
        PositionClass::Down,
        PositionClass::Left,
        PositionClass::Right,
        PositionClass::UpLeft,
        PositionClass::UpRight,
        PositionClass::DownLeft,
        PositionClass::DownRight,
    ];

    /// Classifies the patch at `(row, col)` of a `rows x cols` overlapping grid.
    pub fn for_patch(row: usize, col: usize, rows: usize, cols: usize) -> Self {
        let top = row == 0;
        let bottom = row + 1 == rows;
        let left = col == 0;
        let right = col + 1 == cols;
        match (top, bottom, left, right) {
            (true, _, true, _) => PositionClass::UpLeft,
            (true, _, _, true) => PositionClass::UpRight,
            (_, true, true, _) => PositionClass::DownLeft,
            (_, true, _, true) => PositionClass::DownRight,
            (true, ..) => PositionClass::Up,
            (_, true, ..) => PositionClass::Down,
            (_, _, true, _) => PositionClass::Left,
            (_, _, _, true) => PositionClass::Right,
            _ => PositionClass::Interior,
        }
    }

    pub fn at_top(self) -> bool {
        matches!(
            self,
            PositionClass::Up | PositionClass::UpLeft | PositionClass::UpRight
        )
    }

    pub fn at_bottom(self) -> bool {
        matches!(
            self,
            PositionClass::Down | PositionClass::DownLeft | PositionClass::DownRight
        )
    }

    pub fn at_left(self) -> bool {
        matches!(
            self,
            PositionClass::Left | PositionClass::UpLeft | PositionClass::DownLeft
        )
    }

    pub fn at_right(self) -> bool {
        matches!(
            self,
            PositionClass::Right | PositionClass::UpRight | PositionClass::DownRight
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PositionClass::Interior => "interior",
            PositionClass::Up => "up",
            PositionClass::Down => "down",
            PositionClass::Left => "left",
            PositionClass::Right => "right",
            PositionClass::UpLeft => "upleft",
            PositionClass::UpRight => "upright",
            PositionClass::DownLeft => "downleft",
            PositionClass::DownRight => "downright",
        }
    }
}

impl fmt::Display for PositionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PositionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .collect::<String>()
            .to_ascii_lowercase();
        PositionClass::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown position `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window1D {
    kind: WindowKind,
    samples: Vec<f64>,
}

impl Window1D {
    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

fn check_even(len: usize, what: &str) -> Result<()> {
    if len < 2 || len % 2 != 0 {
        return Err(Error::Dimensions(format!(
            "{what} must be even and at least 2, got {len}"
        )));
    }
    Ok(())
}

pub fn make_window_1d(kind: WindowKind, length: usize) -> Result<Window1D> {
    if !kind.is_separable() {
        return Err(Error::NotSeparable(kind));
    }
    check_even(length, "window length")?;
    Ok(Window1D {
        kind,
        samples: (0..length).map(|i| kind.sample(i, length)).collect(),
    })
}

/// One axis of a separable 2-D window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    Taper,
    /// Plateau of ones on `[0, len/2)`, taper after.
    FlatStart,
    /// Taper on `[0, len/2)`, plateau of ones after.
    FlatEnd,
}

impl Profile {
    fn apply(self, w: &Window1D) -> Vec<f64> {
        let half = w.len() / 2;
        w.samples
            .iter()
            .enumerate()
            .map(|(i, &v)| match self {
                Profile::Taper => v,
                Profile::FlatStart if i < half => 1.0,
                Profile::FlatEnd if i >= half => 1.0,
                _ => v,
            })
            .collect()
    }

    fn horizontal(position: PositionClass) -> Self {
        if position.at_left() {
            Profile::FlatStart
        } else if position.at_right() {
            Profile::FlatEnd
        } else {
            Profile::Taper
        }
    }

    fn vertical(position: PositionClass) -> Self {
        if position.at_top() {
            Profile::FlatStart
        } else if position.at_bottom() {
            Profile::FlatEnd
        } else {
            Profile::Taper
        }
    }
}

/// A patch-sized weight grid, row-major (`weights[j * width + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Window2D {
    kind: WindowKind,
    height: usize,
    width: usize,
    position: PositionClass,
    weights: Vec<f64>,
}

impl Window2D {
    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn position(&self) -> PositionClass {
        self.position
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at row `j`, column `i`.
    #[inline]
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.weights[j * self.width + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.width..(j + 1) * self.width]
    }

    pub fn max(&self) -> f64 {
        self.weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    /// Single-channel tensor view, for export.
    pub fn to_tensor(&self) -> ImageTensor {
        ImageTensor::from_vec(1, self.height, self.width, self.weights.clone())
            .expect("window dims are consistent")
    }
}

pub fn make_window_2d(
    kind: WindowKind,
    height: usize,
    width: usize,
    position: PositionClass,
) -> Result<Window2D> {
    check_even(height, "window height")?;
    check_even(width, "window width")?;
    if kind == WindowKind::Pyramidal {
        if position != PositionClass::Interior {
            return Err(Error::UnsupportedPosition { kind, position });
        }
        return make_pyramidal(height, width);
    }

    let row_factor = Profile::vertical(position).apply(&make_window_1d(kind, height)?);
    let col_factor = Profile::horizontal(position).apply(&make_window_1d(kind, width)?);
    let mut weights = Vec::with_capacity(height * width);
    for &wj in &row_factor {
        weights.extend(col_factor.iter().map(|&wi| wj * wi));
    }
    Ok(Window2D {
        kind,
        height,
        width,
        position,
        weights,
    })
}

/// Distance-ratio window: `alpha * De / (De + Dc)`, where `De` is the
/// Chebyshev distance to the nearest patch border and `Dc` the Euclidean
/// distance to the patch center. `alpha` scales the mean weight to one.
pub fn make_pyramidal(height: usize, width: usize) -> Result<Window2D> {
    check_even(height, "window height")?;
    check_even(width, "window width")?;
    if height < 4 || width < 4 {
        // every pixel of a 2-wide patch lies on the border: all ratios are zero
        return Err(Error::Dimensions(format!(
            "pyramidal window needs at least 4x4, got {height}x{width}"
        )));
    }
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let mut weights = Vec::with_capacity(height * width);
    for j in 0..height {
        for i in 0..width {
            let edge = i.min(j).min(width - 1 - i).min(height - 1 - j) as f64;
            let center = ((j as f64 - cy).powi(2) + (i as f64 - cx).powi(2)).sqrt();
            let denom = edge + center;
            weights.push(if denom > 0.0 { edge / denom } else { 0.0 });
        }
    }
    let total: f64 = weights.iter().sum();
    let alpha = (height * width) as f64 / total;
    weights.iter_mut().for_each(|w| *w *= alpha);
    Ok(Window2D {
        kind: WindowKind::Pyramidal,
        height,
        width,
        position: PositionClass::Interior,
        weights,
    })
}

/// The windows for every position class of one `(kind, height, width)`,
/// built once and shared by all patches.
#[derive(Debug, Clone)]
pub struct WindowSet {
    kind: WindowKind,
    windows: Vec<Window2D>,
}

impl WindowSet {
    pub fn new(kind: WindowKind, height: usize, width: usize) -> Result<Self> {
        let windows = if kind.is_separable() {
            PositionClass::ALL
                .into_iter()
                .map(|p| make_window_2d(kind, height, width, p))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![make_pyramidal(height, width)?]
        };
        Ok(Self { kind, windows })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    /// Window applied to a patch in `position`; pyramidal uses its interior
    /// window everywhere.
    pub fn get(&self, position: PositionClass) -> &Window2D {
        if self.kind.is_separable() {
            let idx = PositionClass::ALL
                .iter()
                .position(|&p| p == position)
                .expect("all positions are listed");
            &self.windows[idx]
        } else {
            &self.windows[0]
        }
    }
}

/// Sum of all position-appropriate windows over a `rows*J x cols*I` canvas
/// tiled at half-patch stride. Row-major, one value per canvas pixel.
pub fn weight_map(
    kind: WindowKind,
    patch_height: usize,
    patch_width: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<f64>> {
    overlap_add(kind, patch_height, patch_width, rows, cols, None)
}

/// Overlap-adds every window, each first divided pixelwise by `divisor`.
fn overlap_add(
    kind: WindowKind,
    patch_height: usize,
    patch_width: usize,
    rows: usize,
    cols: usize,
    divisor: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if rows < 2 || cols < 2 {
        return Err(Error::Dimensions(format!(
            "grid must be at least 2x2, got {rows}x{cols}"
        )));
    }
    let set = WindowSet::new(kind, patch_height, patch_width)?;
    let (canvas_h, canvas_w) = (rows * patch_height, cols * patch_width);
    let (over_rows, over_cols) = (2 * rows - 1, 2 * cols - 1);
    let mut map = vec![0.0; canvas_h * canvas_w];
    for r in 0..over_rows {
        for c in 0..over_cols {
            let win = set.get(PositionClass::for_patch(r, c, over_rows, over_cols));
            let (oy, ox) = (r * patch_height / 2, c * patch_width / 2);
            for j in 0..patch_height {
                let start = (oy + j) * canvas_w + ox;
                let dst = &mut map[start..][..patch_width];
                match divisor {
                    None => dst.iter_mut().zip(win.row(j)).for_each(|(d, w)| *d += w),
                    Some(div) => {
                        for ((d, w), s) in dst.iter_mut().zip(win.row(j)).zip(&div[start..]) {
                            *d += w / s;
                        }
                    }
                }
            }
        }
    }
    Ok(map)
}

/// Maximum deviation from one of the full-canvas window sum. Non-COLA kinds
/// are measured after the per-pixel normalization the blender applies.
pub fn cola_check(
    kind: WindowKind,
    patch_height: usize,
    patch_width: usize,
    rows: usize,
    cols: usize,
) -> Result<f64> {
    let map = weight_map(kind, patch_height, patch_width, rows, cols)?;
    if kind.is_cola() {
        return Ok(map.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
    }
    let normalized = overlap_add(kind, patch_height, patch_width, rows, cols, Some(&map))?;
    // Zero-sum pixels fall back to an unweighted mean, which is exact too.
    Ok(normalized
        .iter()
        .zip(&map)
        .map(|(&n, &s)| if s > 0.0 { (n - 1.0).abs() } else { 0.0 })
        .fold(0.0, f64::max))
}

/// Like [`cola_check`] but without normalization, for any kind.
pub fn raw_cola_deviation(
    kind: WindowKind,
    patch_height: usize,
    patch_width: usize,
    rows: usize,
    cols: usize,
) -> Result<f64> {
    let map = weight_map(kind, patch_height, patch_width, rows, cols)?;
    Ok(map.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max))
}
