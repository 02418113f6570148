//! Binary graymap (`P5`), 8- or 16-bit.

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

use super::pfm::MAX_DIMENSION;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
            if self.pos - start > 10 {
                return Err(format_err(format!("{what} too long")));
            }
        }
        if start == self.pos {
            return Err(format_err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| format_err(format!("{what} out of range")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err("not a binary PGM (expected P5)"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_err("missing whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(format_err(format!(
            "dimensions {width}x{height} out of range"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(format!("maxval {maxval} out of range")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(format_err("missing whitespace after maxval")),
    }
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let len = width * height * sample_bytes;
    let payload = &bytes[cur.pos..];
    if payload.len() != len {
        return Err(format_err(format!(
            "{width}x{height} payload needs {len} bytes, found {}",
            payload.len()
        )));
    }
    let scale = maxval as f64;
    let data: Vec<f64> = if sample_bytes == 1 {
        payload
            .iter()
            .map(|&b| (b as f64 / scale).min(1.0))
            .collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|p| (u16::from_be_bytes([p[0], p[1]]) as f64 / scale).min(1.0))
            .collect()
    };
    ImageTensor::from_vec(1, height, width, data)
}

/// Encodes a single-channel image with values in `[0, 1]`, rounding
/// half to even.
pub fn write_pgm(image: &ImageTensor, maxval: u16) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(Error::Parameter(format!(
            "maxval must be 255 or 65535, got {maxval}"
        )));
    }
    let (channels, height, width) = image.dims();
    if channels != 1 {
        return Err(Error::Parameter(format!(
            "PGM holds one channel, got {channels}"
        )));
    }
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    let scale = f64::from(maxval);
    for &v in image.as_slice() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("value {v} outside [0, 1]")));
        }
        let q = (v * scale).round_ties_even() as u16;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> ImageTensor {
        ImageTensor::filled(1, 1, 1, v)
    }

    #[test]
    fn quantization_examples() {
        let b = write_pgm(&single(1.0), 255).unwrap();
        assert_eq!(*b.last().unwrap(), 255);
        let b = write_pgm(&single(0.5), 255).unwrap();
        assert_eq!(*b.last().unwrap(), 128);
        // 0.5 * 65535 = 32767.5 rounds to the even neighbour
        let b = write_pgm(&single(0.5), 65535).unwrap();
        assert_eq!(&b[b.len() - 2..], &32768u16.to_be_bytes());
    }

    #[test]
    fn round_trip_within_quantization() {
        let img = ImageTensor::from_fn(1, 7, 9, |_, y, x| ((y * 9 + x) as f64 / 62.0).min(1.0));
        for maxval in [255u16, 65535] {
            let back = read_pgm(&write_pgm(&img, maxval).unwrap()).unwrap();
            let bound = 1.0 / (2.0 * f64::from(maxval)) + 1e-15;
            assert!(img.max_abs_diff(&back).unwrap() <= bound);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend([0, 255]);
        let img = read_pgm(&bytes).unwrap();
        assert_eq!(img.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_values_and_headers() {
        assert!(write_pgm(&single(1.5), 255).is_err());
        assert!(write_pgm(&single(f64::NAN), 255).is_err());
        assert!(write_pgm(&single(0.5), 100).is_err());
        assert!(write_pgm(&ImageTensor::zeros(3, 1, 1), 255).is_err());
        assert!(read_pgm(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(read_pgm(b"P5\n1 1\n0\n\0").is_err());
        assert!(read_pgm(b"P5\n2 2\n255\n\0\0\0").is_err());
        assert!(read_pgm(b"P5\n1 1\n255").is_err());
        assert!(read_pgm(b"P5 1 1 70000 \0\0").is_err());
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend([0xFF, 0xFF, 0x00, 0x00]);
        let img = read_pgm(&bytes).unwrap();
        assert_eq!(img.as_slice(), &[1.0, 0.0]);
    }
}
