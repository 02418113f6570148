//! Synthetic segmentation ground truth: smooth random blob fields, one per
//! class, turned into one-hot class maps by a per-pixel argmax (or, for a
//! single class, a threshold at the field mean).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(index as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"truthmap");
    ChaCha8Rng::from_seed(key)
}

fn gaussian_profile(len: usize, center: f64, sigma: f64, lo: usize, hi: usize) -> Vec<f64> {
    (lo..hi.min(len))
        .map(|p| {
            let d = p as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Sum of random isotropic Gaussian bumps, evaluated in each bump's 3-sigma box.
fn blob_field(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Vec<f64> {
    let short = height.min(width) as f64;
    let count = ((height * width) / (96 * 96)).max(6);
    let mut field = vec![0.0; height * width];
    for _ in 0..count {
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let sigma = rng.random_range(short / 64.0..short / 16.0).max(1.0);
        let amplitude = rng.random_range(0.5..1.0);
        let reach = 3.0 * sigma;
        let y0 = (cy - reach).max(0.0) as usize;
        let y1 = (cy + reach).ceil() as usize + 1;
        let x0 = (cx - reach).max(0.0) as usize;
        let x1 = (cx + reach).ceil() as usize + 1;
        let gy = gaussian_profile(height, cy, sigma, y0, y1);
        let gx = gaussian_profile(width, cx, sigma, x0, x1);
        for (dy, vy) in gy.iter().enumerate() {
            let row = &mut field[(y0 + dy) * width + x0..][..gx.len()];
            for (f, vx) in row.iter_mut().zip(&gx) {
                *f += amplitude * vy * vx;
            }
        }
    }
    field
}

/// Ground-truth map `index` of a simulated set: `classes` one-hot channels.
pub fn simulate_truth(
    seed: u64,
    index: usize,
    height: usize,
    width: usize,
    classes: usize,
) -> Result<ImageTensor> {
    if height == 0 || width == 0 {
        return Err(Error::Dimensions(format!(
            "cannot simulate a {height}x{width} image"
        )));
    }
    if classes == 0 {
        return Err(Error::Parameter("at least one class is required".into()));
    }
    let mut rng = image_rng(seed, index);
    let mut out = ImageTensor::zeros(classes, height, width);
    if classes == 1 {
        let field = blob_field(&mut rng, height, width);
        let mean = field.iter().sum::<f64>() / field.len() as f64;
        for (dst, &v) in out.channel_mut(0).iter_mut().zip(&field) {
            *dst = if v > mean { 1.0 } else { 0.0 };
        }
        return Ok(out);
    }
    let fields: Vec<Vec<f64>> = (0..classes)
        .map(|_| blob_field(&mut rng, height, width))
        .collect();
    let plane = height * width;
    let data = out.as_mut_slice();
    for p in 0..plane {
        let winner = (0..classes)
            .max_by(|&a, &b| fields[a][p].total_cmp(&fields[b][p]))
            .expect("classes > 0");
        data[winner * plane + p] = 1.0;
    }
    Ok(out)
}

/// `images` ground-truth maps, deterministic in `seed`.
pub fn simulate(
    seed: u64,
    images: usize,
    height: usize,
    width: usize,
    classes: usize,
) -> Result<Vec<ImageTensor>> {
    if images == 0 {
        return Err(Error::Parameter("at least one image is required".into()));
    }
    (0..images)
        .map(|k| simulate_truth(seed, k, height, width, classes))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_are_one_hot() {
        let img = simulate_truth(7, 0, 96, 128, 3).unwrap();
        assert_eq!(img.dims(), (3, 96, 128));
        for y in 0..96 {
            for x in 0..128 {
                let sum: f64 = (0..3).map(|c| img.get(c, y, x)).sum();
                assert_eq!(sum, 1.0);
            }
        }
        // every class should claim some territory at this size
        for c in 0..3 {
            assert!(img.channel(c).contains(&1.0), "class {c} empty");
        }
    }

    #[test]
    fn deterministic_in_seed_and_index() {
        let a = simulate(7, 2, 64, 64, 3).unwrap();
        let b = simulate(7, 2, 64, 64, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_ne!(simulate_truth(8, 0, 64, 64, 3).unwrap(), a[0]);
    }

    #[test]
    fn single_class_is_binary_mask() {
        let img = simulate_truth(1, 0, 64, 64, 1).unwrap();
        assert!(img.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(img.as_slice().contains(&0.0) && img.as_slice().contains(&1.0));
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(simulate(1, 0, 8, 8, 3).is_err());
        assert!(simulate_truth(1, 0, 0, 8, 3).is_err());
        assert!(simulate_truth(1, 0, 8, 8, 0).is_err());
    }
}
