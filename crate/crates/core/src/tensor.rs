//! Planar `C x H x W` image storage.

use crate::error::{Error, Result};

/// A channels x height x width grid of `f64`, row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let expected = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Dimensions("tensor size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Dimensions(format!(
                "{channels}x{height}x{width} tensor needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(channel, y, x)` at every sample.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    pub fn row(&self, c: usize, y: usize) -> &[f64] {
        let start = self.index(c, y, 0);
        &self.data[start..start + self.width]
    }

    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [f64] {
        let start = self.index(c, y, 0);
        let width = self.width;
        &mut self.data[start..start + width]
    }

    /// Copies channel `c` into a new single-channel tensor.
    pub fn extract_channel(&self, c: usize) -> ImageTensor {
        ImageTensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.channel(c).to_vec(),
        }
    }

    /// Stacks equally sized single- or multi-channel tensors along the channel axis.
    pub fn stack(parts: &[ImageTensor]) -> Result<ImageTensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimensions("cannot stack zero tensors".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if (p.height, p.width) != (h, w) {
                return Err(Error::Dimensions(format!(
                    "cannot stack {}x{} with {h}x{w}",
                    p.height, p.width
                )));
            }
            channels += p.channels;
            data.extend_from_slice(&p.data);
        }
        Ok(ImageTensor {
            channels,
            height: h,
            width: w,
            data,
        })
    }

    /// Copies the `height x width` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<ImageTensor> {
        if y0 + height > self.height || x0 + width > self.width {
            return Err(Error::Dimensions(format!(
                "crop {height}x{width} at ({y0}, {x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut out = ImageTensor::zeros(self.channels, height, width);
        for c in 0..self.channels {
            for y in 0..height {
                let src = self.index(c, y0 + y, x0);
                out.row_mut(c, y)
                    .copy_from_slice(&self.data[src..src + width]);
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageTensor {
        ImageTensor {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Largest absolute elementwise difference; `None` when dims differ.
    pub fn max_abs_diff(&self, other: &ImageTensor) -> Option<f64> {
        if self.dims() != other.dims() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
