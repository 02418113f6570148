//! Per-patch transforms standing in for a segmentation model.
//!
//! The built-in predictors are pure functions of the predictor spec, the
//! patch content and the patch offset. [`PredictorSpec::External`] streams
//! patches through a child process; see [`external`].

pub mod external;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;
use crate::tiling::{extract_patch, PatchGrid, PatchRef};

pub use external::predict_stream;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    Identity,
    GaussianBlur {
        sigma: f64,
    },
    /// Additive Gaussian noise whose standard deviation decays with the
    /// distance to the patch border: `amplitude * exp(-d / falloff)`.
    BorderNoise {
        amplitude: f64,
        falloff: f64,
        seed: u64,
    },
    External {
        command: Vec<String>,
    },
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        let message = match self {
            PredictorSpec::GaussianBlur { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                format!("blur sigma must be positive, got {sigma}")
            }
            PredictorSpec::BorderNoise { amplitude, .. }
                if !(amplitude.is_finite() && *amplitude >= 0.0) =>
            {
                format!("noise amplitude must be non-negative, got {amplitude}")
            }
            PredictorSpec::BorderNoise { falloff, .. }
                if !(falloff.is_finite() && *falloff > 0.0) =>
            {
                format!("noise falloff must be positive, got {falloff}")
            }
            PredictorSpec::External { command } if command.is_empty() => {
                "external predictor needs a command".to_string()
            }
            _ => return Ok(()),
        };
        Err(Error::Parameter(message))
    }

    pub fn is_external(&self) -> bool {
        matches!(self, PredictorSpec::External { .. })
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::Identity => f.write_str("identity"),
            PredictorSpec::GaussianBlur { sigma } => write!(f, "blur:sigma={sigma}"),
            PredictorSpec::BorderNoise {
                amplitude,
                falloff,
                seed,
            } => write!(
                f,
                "bordernoise:amp={amplitude},falloff={falloff},seed={seed}"
            ),
            PredictorSpec::External { command } => write!(f, "external:{}", command.join(" ")),
        }
    }
}

fn parse_params(body: &str) -> Result<Vec<(&str, &str)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parameter(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("invalid value `{value}` for `{key}`")))
}

/// Grammar: `identity` | `blur:sigma=S` | `bordernoise:amp=A,falloff=F,seed=K`
/// | `external:CMD ARGS...` (arguments split on whitespace).
impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let spec = match name {
            "identity" if body.is_empty() => PredictorSpec::Identity,
            "blur" => {
                let mut sigma = None;
                for (k, v) in parse_params(body)? {
                    match k {
                        "sigma" => sigma = Some(parse_value(k, v)?),
                        other => {
                            return Err(Error::Parameter(format!(
                                "unknown blur parameter `{other}`"
                            )))
                        }
                    }
                }
                PredictorSpec::GaussianBlur {
                    sigma: sigma.ok_or_else(|| Error::Parameter("blur needs sigma".into()))?,
                }
            }
            "bordernoise" => {
                let (mut amplitude, mut falloff, mut seed) = (None, None, 0u64);
                for (k, v) in parse_params(body)? {
                    match k {
                        "amp" | "amplitude" => amplitude = Some(parse_value(k, v)?),
                        "falloff" => falloff = Some(parse_value(k, v)?),
                        "seed" => seed = parse_value(k, v)?,
                        other => {
                            return Err(Error::Parameter(format!(
                                "unknown bordernoise parameter `{other}`"
                            )))
                        }
                    }
                }
                PredictorSpec::BorderNoise {
                    amplitude: amplitude
                        .ok_or_else(|| Error::Parameter("bordernoise needs amp".into()))?,
                    falloff: falloff
                        .ok_or_else(|| Error::Parameter("bordernoise needs falloff".into()))?,
                    seed,
                }
            }
            "external" => PredictorSpec::External {
                command: body.split_whitespace().map(String::from).collect(),
            },
            other => return Err(Error::Parameter(format!("unknown predictor `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Standard deviation of the border noise at patch pixel `(j, i)`.
pub fn border_noise_scale(
    amplitude: f64,
    falloff: f64,
    j: usize,
    i: usize,
    height: usize,
    width: usize,
) -> f64 {
    let d = i.min(j).min(width - 1 - i).min(height - 1 - j) as f64;
    amplitude * (-d / falloff).exp()
}

/// Noise stream keyed by seed, absolute patch offset and channel.
fn noise_rng(seed: u64, offset_y: usize, offset_x: usize, channel: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(offset_y as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(offset_x as u64).to_le_bytes());
    key[24..].copy_from_slice(&(channel as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn border_noise(
    patch: &ImageTensor,
    at: &PatchRef,
    amplitude: f64,
    falloff: f64,
    seed: u64,
) -> ImageTensor {
    let mut out = patch.clone();
    if amplitude == 0.0 {
        return out;
    }
    let (channels, h, w) = patch.dims();
    for c in 0..channels {
        let mut rng = noise_rng(seed, at.offset_y, at.offset_x, c);
        for j in 0..h {
            let row = out.row_mut(c, j);
            for (i, v) in row.iter_mut().enumerate() {
                let eta: f64 = StandardNormal.sample(&mut rng);
                *v += border_noise_scale(amplitude, falloff, j, i, h, w) * eta;
            }
        }
    }
    out
}

/// Maps any integer index onto `[0, len)` by half-sample symmetric
/// reflection (`... 1 0 | 0 1 ... n-1 | n-1 n-2 ...`).
fn mirror(pos: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let k = pos.rem_euclid(period) as usize;
    if k < len {
        k
    } else {
        2 * len - 1 - k
    }
}

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable truncated Gaussian blur, reflecting at the borders.
///
/// Half-sample reflection makes the extended signal an even, periodic copy
/// of the input, so the blur preserves the patch mean exactly.
pub fn gaussian_blur(image: &ImageTensor, sigma: f64) -> ImageTensor {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (channels, h, w) = image.dims();
    let mut out = ImageTensor::zeros(channels, h, w);
    let mut tmp = vec![0.0; h * w];
    for c in 0..channels {
        let src = image.channel(c);
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * src[y * w + mirror(x as isize + k as isize - radius, w)])
                    .sum();
            }
        }
        let dst = out.channel_mut(c);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * tmp[mirror(y as isize + k as isize - radius, h) * w + x])
                    .sum();
            }
        }
    }
    out
}

/// Applies a built-in predictor to one patch located at `at`.
/// External predictors are run as a one-patch stream.
pub fn predict(spec: &PredictorSpec, patch: &ImageTensor, at: &PatchRef) -> Result<ImageTensor> {
    spec.validate()?;
    Ok(match spec {
        PredictorSpec::Identity => patch.clone(),
        PredictorSpec::GaussianBlur { sigma } => gaussian_blur(patch, *sigma),
        PredictorSpec::BorderNoise {
            amplitude,
            falloff,
            seed,
        } => border_noise(patch, at, *amplitude, *falloff, *seed),
        PredictorSpec::External { command } => {
            let mut out = predict_stream(command, std::slice::from_ref(patch))?;
            out.pop().expect("one response per request")
        }
    })
}

/// Runs a predictor over patches of an image, handing results to a sink in
/// the order of `refs`, and counts invocations.
#[derive(Debug)]
pub struct PatchPredictor {
    spec: PredictorSpec,
    parallel: bool,
    calls: AtomicUsize,
}

/// Patches predicted concurrently before being handed to the sink in order.
const PARALLEL_CHUNK: usize = 32;

impl PatchPredictor {
    pub fn new(spec: PredictorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            parallel: false,
            calls: AtomicUsize::new(0),
        })
    }

    /// Predict built-in patches on the rayon pool. Output order is unchanged.
    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn spec(&self) -> &PredictorSpec {
        &self.spec
    }

    /// Number of patches predicted so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn run(
        &self,
        image: &ImageTensor,
        grid: &PatchGrid,
        refs: &[PatchRef],
        mut sink: impl FnMut(&PatchRef, ImageTensor) -> Result<()>,
    ) -> Result<()> {
        if let PredictorSpec::External { command } = &self.spec {
            return external::stream_patches(
                command,
                refs.len(),
                |k| extract_patch(image, &refs[k], grid),
                |k, prediction| {
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    sink(&refs[k], prediction)
                },
            )
            .map_err(|e| match e {
                Error::External { index, reason } if index < refs.len() => Error::Prediction {
                    patch: refs[index],
                    source: Box::new(Error::External { index, reason }),
                },
                other => other,
            });
        }

        let one = |at: &PatchRef| -> Result<ImageTensor> {
            let patch = extract_patch(image, at, grid)?;
            predict(&self.spec, &patch, at).map_err(|e| Error::Prediction {
                patch: *at,
                source: Box::new(e),
            })
        };
        if self.parallel {
            for chunk in refs.chunks(PARALLEL_CHUNK) {
                let predictions: Vec<Result<ImageTensor>> = chunk.par_iter().map(one).collect();
                for (at, prediction) in chunk.iter().zip(predictions) {
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    sink(at, prediction?)?;
                }
            }
        } else {
            for at in refs {
                let prediction = one(at)?;
                self.calls.fetch_add(1, Ordering::Relaxed);
                sink(at, prediction)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{enumerate_patches, plan_grid, GridMode, PaddingPolicy};
    use crate::window::PositionClass;

    fn at(offset_y: usize, offset_x: usize) -> PatchRef {
        PatchRef {
            row: 0,
            col: 0,
            offset_y,
            offset_x,
            position: PositionClass::UpLeft,
        }
    }

    fn sample_patch() -> ImageTensor {
        ImageTensor::from_fn(2, 16, 16, |c, y, x| {
            ((c + 1) * (y * 3 + x * 5) % 17) as f64 / 17.0
        })
    }

    #[test]
    fn identity_copies() {
        let p = sample_patch();
        assert_eq!(predict(&PredictorSpec::Identity, &p, &at(0, 0)).unwrap(), p);
    }

    #[test]
    fn zero_amplitude_noise_is_identity() {
        let p = sample_patch();
        let spec = PredictorSpec::BorderNoise {
            amplitude: 0.0,
            falloff: 3.0,
            seed: 9,
        };
        assert_eq!(predict(&spec, &p, &at(0, 0)).unwrap(), p);
    }

    #[test]
    fn noise_scale_examples() {
        assert_eq!(border_noise_scale(0.5, 8.0, 0, 0, 128, 128), 0.5);
        let center = border_noise_scale(0.5, 8.0, 64, 64, 128, 128);
        // pixel 64 of 128 is 63 from the far border
        assert!((center - 0.5 * (-63.0f64 / 8.0).exp()).abs() < 1e-18);
        assert!((center - 1.9006e-4).abs() < 1e-8);
        assert_eq!(border_noise_scale(0.5, 8.0, 0, 64, 128, 128), 0.5);
    }

    #[test]
    fn noise_is_deterministic_and_keyed_by_offset() {
        let p = sample_patch();
        let spec = PredictorSpec::BorderNoise {
            amplitude: 0.5,
            falloff: 8.0,
            seed: 42,
        };
        let a = predict(&spec, &p, &at(64, 128)).unwrap();
        let b = predict(&spec, &p, &at(64, 128)).unwrap();
        assert_eq!(a, b);
        let moved = predict(&spec, &p, &at(64, 192)).unwrap();
        assert_ne!(a, moved);
        let reseeded = PredictorSpec::BorderNoise {
            amplitude: 0.5,
            falloff: 8.0,
            seed: 43,
        };
        assert_ne!(a, predict(&reseeded, &p, &at(64, 128)).unwrap());
    }

    #[test]
    fn noise_rms_profile_matches_scale() {
        // Monte Carlo over 1000 seeds: RMS of the added noise at each border
        // distance d equals amplitude * exp(-d / falloff) within 5%.
        let (amp, falloff, n) = (0.5, 2.0, 12usize);
        let patch = ImageTensor::zeros(1, n, n);
        let mut sum_sq = vec![0.0; n / 2];
        let mut count = vec![0usize; n / 2];
        for seed in 0..1000 {
            let spec = PredictorSpec::BorderNoise {
                amplitude: amp,
                falloff,
                seed,
            };
            let out = predict(&spec, &patch, &at(0, 0)).unwrap();
            for j in 0..n {
                for i in 0..n {
                    let d = i.min(j).min(n - 1 - i).min(n - 1 - j);
                    sum_sq[d] += out.get(0, j, i).powi(2);
                    count[d] += 1;
                }
            }
        }
        for d in 0..n / 2 {
            let rms = (sum_sq[d] / count[d] as f64).sqrt();
            let expected = amp * (-(d as f64) / falloff).exp();
            assert!(
                (rms / expected - 1.0).abs() < 0.05,
                "d={d}: rms {rms}, expected {expected}"
            );
        }
    }

    #[test]
    fn blur_preserves_mean_and_constants() {
        let p = sample_patch();
        for sigma in [0.5, 1.5, 4.0, 10.0] {
            let out = gaussian_blur(&p, sigma);
            for c in 0..2 {
                let before: f64 = p.channel(c).iter().sum::<f64>() / 256.0;
                let after: f64 = out.channel(c).iter().sum::<f64>() / 256.0;
                assert!((before - after).abs() < 1e-6, "sigma {sigma}");
            }
        }
        let flat = ImageTensor::filled(1, 8, 8, 0.3);
        let out = gaussian_blur(&flat, 2.0);
        assert!(flat.max_abs_diff(&out).unwrap() < 1e-12);
    }

    #[test]
    fn blur_kernel_radius_and_normalization() {
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(1.0).len(), 7);
    }

    #[test]
    fn mirror_reflection_repeats_edge() {
        assert_eq!(mirror(-1, 4), 0);
        assert_eq!(mirror(-2, 4), 1);
        assert_eq!(mirror(4, 4), 3);
        assert_eq!(mirror(5, 4), 2);
        assert_eq!(mirror(8, 4), 0);
        assert_eq!(mirror(-9, 4), 0);
    }

    #[test]
    fn grammar() {
        assert_eq!(
            "identity".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::Identity
        );
        assert_eq!(
            "blur:sigma=1.5".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::GaussianBlur { sigma: 1.5 }
        );
        assert_eq!(
            "bordernoise:amp=0.5,falloff=8,seed=7"
                .parse::<PredictorSpec>()
                .unwrap(),
            PredictorSpec::BorderNoise {
                amplitude: 0.5,
                falloff: 8.0,
                seed: 7
            }
        );
        assert_eq!(
            "external:python3 model.py --fast"
                .parse::<PredictorSpec>()
                .unwrap(),
            PredictorSpec::External {
                command: vec!["python3".into(), "model.py".into(), "--fast".into()]
            }
        );
        for bad in [
            "",
            "identity:x=1",
            "blur",
            "blur:sigma=0",
            "blur:sigma=-1",
            "blur:radius=3",
            "bordernoise:amp=0.5",
            "bordernoise:amp=-1,falloff=8",
            "bordernoise:amp=1,falloff=0",
            "bordernoise:amp=1,falloff=2,seed=-3",
            "external:",
            "unet",
        ] {
            assert!(bad.parse::<PredictorSpec>().is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn display_round_trips_through_grammar() {
        for spec in [
            PredictorSpec::Identity,
            PredictorSpec::GaussianBlur { sigma: 0.75 },
            PredictorSpec::BorderNoise {
                amplitude: 0.5,
                falloff: 8.0,
                seed: 123,
            },
            PredictorSpec::External {
                command: vec!["cat".into()],
            },
        ] {
            assert_eq!(spec.to_string().parse::<PredictorSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn runner_preserves_order_and_counts_calls() {
        let img = ImageTensor::from_fn(1, 64, 64, |_, y, x| (y * 64 + x) as f64);
        let grid = plan_grid(64, 64, 16, 16, PaddingPolicy::Reject).unwrap();
        let refs = enumerate_patches(&grid, GridMode::Overlapping);
        let spec = PredictorSpec::BorderNoise {
            amplitude: 0.1,
            falloff: 2.0,
            seed: 1,
        };
        let collect = |parallel: bool| {
            let runner = PatchPredictor::new(spec.clone())
                .unwrap()
                .parallel(parallel);
            let mut seen = Vec::new();
            runner
                .run(&img, &grid, &refs, |at, p| {
                    seen.push((*at, p));
                    Ok(())
                })
                .unwrap();
            assert_eq!(runner.calls(), refs.len());
            seen
        };
        let serial = collect(false);
        let parallel = collect(true);
        assert_eq!(serial, parallel);
        assert!(serial.iter().map(|(a, _)| *a).eq(refs.iter().copied()));
    }
}
