//! Structural similarity and seam error.

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the data (1.0 for probability maps).
    pub dynamic_range: f64,
    pub gaussian_sigma: f64,
    pub window_radius: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            gaussian_sigma: 1.5,
            window_radius: 5,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::Parameter("SSIM constants must be positive".into()));
        }
        if !(self.dynamic_range > 0.0 && self.dynamic_range.is_finite()) {
            return Err(Error::Parameter(format!(
                "dynamic range must be positive, got {}",
                self.dynamic_range
            )));
        }
        if self.gaussian_sigma.is_nan() || self.gaussian_sigma <= 0.0 {
            return Err(Error::Parameter("SSIM sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian-weighted local mean with the window clipped to the image and
/// renormalized. The clipped 2-D window is a rectangle, so filtering rows
/// then columns with per-axis renormalization is exact.
struct LocalMean {
    kernel: Vec<f64>,
    radius: usize,
}

impl LocalMean {
    fn new(params: &SsimParams) -> Self {
        let r = params.window_radius as isize;
        let s = params.gaussian_sigma;
        let kernel = (-r..=r)
            .map(|k| (-((k * k) as f64) / (2.0 * s * s)).exp())
            .collect();
        Self {
            kernel,
            radius: params.window_radius,
        }
    }

    /// Clipped taps `[lo, hi]` and their weight sum at each position of an axis.
    fn spans(&self, len: usize) -> Vec<(usize, usize, f64)> {
        (0..len)
            .map(|p| {
                let lo = p.saturating_sub(self.radius);
                let hi = (p + self.radius).min(len - 1);
                let norm = (lo..=hi).map(|q| self.kernel[q + self.radius - p]).sum();
                (lo, hi, norm)
            })
            .collect()
    }

    fn apply(&self, data: &[f64], h: usize, w: usize) -> Vec<f64> {
        let mut tmp = vec![0.0; h * w];
        let cols = self.spans(w);
        for (src, dst) in data.chunks_exact(w).zip(tmp.chunks_exact_mut(w)) {
            for (p, &(lo, hi, norm)) in cols.iter().enumerate() {
                let taps = &self.kernel[lo + self.radius - p..=hi + self.radius - p];
                let acc: f64 = taps.iter().zip(&src[lo..=hi]).map(|(g, v)| g * v).sum();
                dst[p] = acc / norm;
            }
        }
        let mut out = vec![0.0; h * w];
        for (p, (lo, hi, norm)) in self.spans(h).into_iter().enumerate() {
            let dst = &mut out[p * w..(p + 1) * w];
            for q in lo..=hi {
                let g = self.kernel[q + self.radius - p] / norm;
                for (d, v) in dst.iter_mut().zip(&tmp[q * w..(q + 1) * w]) {
                    *d += g * v;
                }
            }
        }
        out
    }
}

/// Local SSIM map of two single-channel images, row-major.
pub fn ssim_map(x: &ImageTensor, y: &ImageTensor, params: &SsimParams) -> Result<Vec<f64>> {
    params.validate()?;
    if x.dims() != y.dims() {
        return Err(Error::Dimensions(format!(
            "SSIM inputs differ: {:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    if x.channels() != 1 {
        return Err(Error::Dimensions(format!(
            "SSIM expects one channel, got {}",
            x.channels()
        )));
    }
    let (_, h, w) = x.dims();
    if h == 0 || w == 0 {
        return Err(Error::Dimensions("SSIM of an empty image".into()));
    }
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let filter = LocalMean::new(params);
    let mu_x = filter.apply(xs, h, w);
    let mu_y = filter.apply(ys, h, w);
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| a * b).collect();
    let e_xx = filter.apply(&xx, h, w);
    let e_yy = filter.apply(&yy, h, w);
    let e_xy = filter.apply(&xy, h, w);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    Ok((0..h * w)
        .map(|k| {
            let (mx, my) = (mu_x[k], mu_y[k]);
            let var_x = e_xx[k] - mx * mx;
            let var_y = e_yy[k] - my * my;
            let cov = e_xy[k] - mx * my;
            ((2.0 * (mx * my) + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .collect())
}

/// Mean of the local SSIM map.
pub fn ssim(x: &ImageTensor, y: &ImageTensor, params: &SsimParams) -> Result<f64> {
    let map = ssim_map(x, y, params)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Per-channel SSIM, averaged.
pub fn ssim_multichannel(x: &ImageTensor, y: &ImageTensor, params: &SsimParams) -> Result<f64> {
    if x.dims() != y.dims() {
        return Err(Error::Dimensions(format!(
            "SSIM inputs differ: {:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    if x.channels() == 0 {
        return Err(Error::Dimensions("SSIM of a zero-channel image".into()));
    }
    let scores = (0..x.channels())
        .map(|c| ssim(&x.extract_channel(c), &y.extract_channel(c), params))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_of(&scores))
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Method score minus baseline score, image by image.
pub fn adjusted_ssim(method: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    if method.len() != baseline.len() {
        return Err(Error::Dimensions(format!(
            "{} method scores vs {} baseline scores",
            method.len(),
            baseline.len()
        )));
    }
    Ok(method.iter().zip(baseline).map(|(m, b)| m - b).collect())
}

/// Mean absolute error over the 2-pixel bands straddling every internal
/// boundary of the non-overlapping tiling (all channels).
pub fn seam_band_mae(
    prediction: &ImageTensor,
    truth: &ImageTensor,
    patch_height: usize,
    patch_width: usize,
) -> Result<f64> {
    if prediction.dims() != truth.dims() {
        return Err(Error::Dimensions("seam MAE inputs differ".into()));
    }
    if patch_height == 0 || patch_width == 0 {
        return Err(Error::Dimensions("patch size must be positive".into()));
    }
    let (channels, h, w) = truth.dims();
    let in_band = |pos: usize, patch: usize, len: usize| {
        let r = pos % patch;
        (r == 0 && pos > 0) || (r == patch - 1 && pos + 1 < len)
    };
    let (mut total, mut count) = (0.0, 0usize);
    for c in 0..channels {
        for y in 0..h {
            let row_band = in_band(y, patch_height, h);
            let (p, t) = (prediction.row(c, y), truth.row(c, y));
            for x in 0..w {
                if row_band || in_band(x, patch_width, w) {
                    total += (p[x] - t[x]).abs();
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::Dimensions(
            "image has no internal patch boundaries".into(),
        ));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> ImageTensor {
        ImageTensor::from_fn(1, h, w, |_, y, x| f(y, x))
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let x = gray(20, 17, |y, x| ((y * 13 + x * 7) % 11) as f64 / 10.0);
        assert_eq!(ssim(&x, &x, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn inverted_checkerboard_scores_negative() {
        let x = gray(16, 16, |y, x| ((y + x) % 2) as f64);
        let y = x.map(|v| 1.0 - v);
        assert!(ssim(&x, &y, &SsimParams::default()).unwrap() < 0.0);
    }

    #[test]
    fn constant_offset_closed_form() {
        let x = gray(12, 12, |_, _| 0.5);
        let y = gray(12, 12, |_, _| 0.6);
        let expected = (2.0 * 0.5 * 0.6 + 1e-4) / (0.25 + 0.36 + 1e-4);
        let got = ssim(&x, &y, &SsimParams::default()).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 0.6001 / 0.6101).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let x = gray(18, 14, |y, x| ((y * 5 + x * 3) % 7) as f64 / 6.0);
        let y = gray(18, 14, |y, x| ((y * 2 + x * 9) % 5) as f64 / 4.0);
        let p = SsimParams::default();
        assert!((ssim(&x, &y, &p).unwrap() - ssim(&y, &x, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SsimParams::default();
        let a = gray(4, 4, |_, _| 0.0);
        assert!(ssim(&a, &gray(4, 5, |_, _| 0.0), &p).is_err());
        assert!(ssim(
            &ImageTensor::zeros(2, 4, 4),
            &ImageTensor::zeros(2, 4, 4),
            &p
        )
        .is_err());
        let bad = SsimParams {
            dynamic_range: 0.0,
            ..p
        };
        assert!(ssim(&a, &a, &bad).is_err());
    }

    #[test]
    fn multichannel_averages() {
        let p = SsimParams::default();
        let x = ImageTensor::from_fn(3, 10, 10, |c, y, x| ((c + y * x) % 4) as f64 / 3.0);
        assert_eq!(ssim_multichannel(&x, &x, &p).unwrap(), 1.0);

        let flat = ImageTensor::filled(3, 10, 10, 0.5);
        let mut other = flat.clone();
        other.channel_mut(1).iter_mut().for_each(|v| *v = 0.6);
        let per_channel: Vec<f64> = (0..3)
            .map(|c| ssim(&flat.extract_channel(c), &other.extract_channel(c), &p).unwrap())
            .collect();
        let avg = ssim_multichannel(&flat, &other, &p).unwrap();
        assert!((avg - per_channel.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn channel_mean_example() {
        assert_eq!(mean_of(&[1.0, 0.5, 0.0]), 0.5);
    }

    #[test]
    fn adjusted_examples() {
        assert_eq!(
            adjusted_ssim(&[0.9, 0.8], &[0.9, 0.8]).unwrap(),
            vec![0.0, 0.0]
        );
        let adj = adjusted_ssim(&[0.92112], &[0.9]).unwrap();
        assert!((adj[0] - 0.02112).abs() < 1e-12);
        assert!(adjusted_ssim(&[1.0], &[]).is_err());
    }

    #[test]
    fn seam_band_selects_boundary_pixels() {
        let truth = ImageTensor::zeros(1, 16, 16);
        // error of 1 only on the seam columns 7 and 8
        let pred = ImageTensor::from_fn(
            1,
            16,
            16,
            |_, _, x| if x == 7 || x == 8 { 1.0 } else { 0.0 },
        );
        let mae = seam_band_mae(&pred, &truth, 8, 8).unwrap();
        // band = columns 7,8 (32 px) plus rows 7,8 (32 px) minus the 4-px overlap
        assert!((mae - 32.0 / 60.0).abs() < 1e-12);
        assert!(seam_band_mae(&pred, &truth, 16, 16).is_err());
    }
}
