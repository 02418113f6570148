//! Portable float map (`PF` colour / `Pf` grayscale).
//!
//! Layout: magic, whitespace, width, whitespace, height, whitespace, scale,
//! one whitespace byte, then `height * width * channels` IEEE-754 binary32
//! samples stored bottom row first. A negative scale means little-endian.

use std::io::{self, BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Largest width or height accepted by the decoders.
pub const MAX_DIMENSION: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PfmHeader {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub little_endian: bool,
}

impl PfmHeader {
    pub fn payload_len(&self) -> usize {
        4 * self.width * self.height * self.channels
    }
}

/// Length of the canonical header written by [`write_pfm`].
pub fn canonical_header_len(width: usize, height: usize) -> usize {
    canonical_header(1, width, height).len()
}

fn canonical_header(channels: usize, width: usize, height: usize) -> String {
    let magic = if channels == 3 { "PF" } else { "Pf" };
    format!("{magic}\n{width} {height}\n-1.0\n")
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn read_byte<R: BufRead>(r: &mut R) -> Result<Option<u8>> {
    let buf = r.fill_buf()?;
    match buf.first() {
        Some(&b) => {
            r.consume(1);
            Ok(Some(b))
        }
        None => Ok(None),
    }
}

/// Reads one whitespace-delimited header token, consuming exactly one
/// trailing whitespace byte.
fn read_token<R: BufRead>(r: &mut R, what: &str) -> Result<String> {
    let mut token = Vec::new();
    loop {
        match read_byte(r)? {
            None => {
                return Err(format_err(format!(
                    "unexpected end of header reading {what}"
                )))
            }
            Some(b) if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    break;
                }
            }
            Some(b) => {
                if token.len() >= 64 {
                    return Err(format_err(format!("{what} token too long")));
                }
                token.push(b);
            }
        }
    }
    String::from_utf8(token).map_err(|_| format_err(format!("{what} is not ASCII")))
}

fn parse_dimension(token: &str, what: &str) -> Result<usize> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format_err(format!(
            "{what} `{token}` is not a decimal integer"
        )));
    }
    let value: usize = token
        .parse()
        .map_err(|_| format_err(format!("{what} `{token}` out of range")))?;
    if value == 0 || value > MAX_DIMENSION {
        return Err(format_err(format!("{what} {value} out of range")));
    }
    Ok(value)
}

/// Parses a header, leaving `r` positioned at the first payload byte.
/// Returns `Ok(None)` on a clean end of stream before any byte.
pub fn read_header<R: BufRead>(r: &mut R) -> Result<Option<PfmHeader>> {
    let first = match read_byte(r)? {
        None => return Ok(None),
        Some(b) => b,
    };
    let second = read_byte(r)?.ok_or_else(|| format_err("truncated magic"))?;
    let channels = match (first, second) {
        (b'P', b'F') => 3,
        (b'P', b'f') => 1,
        _ => return Err(format_err("unsupported channel tag (expected PF or Pf)")),
    };
    match read_byte(r)? {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(format_err("missing whitespace after magic")),
    }
    let width = parse_dimension(&read_token(r, "width")?, "width")?;
    let height = parse_dimension(&read_token(r, "height")?, "height")?;
    let scale_token = read_token(r, "scale")?;
    let scale: f64 = scale_token
        .parse()
        .map_err(|_| format_err(format!("scale `{scale_token}` is not a number")))?;
    if !scale.is_finite() || scale == 0.0 {
        return Err(format_err(format!(
            "scale {scale} must be finite and nonzero"
        )));
    }
    Ok(Some(PfmHeader {
        channels,
        width,
        height,
        little_endian: scale < 0.0,
    }))
}

fn decode_payload(header: &PfmHeader, payload: &[u8]) -> ImageTensor {
    let PfmHeader {
        channels,
        width,
        height,
        little_endian,
    } = *header;
    let mut out = ImageTensor::zeros(channels, height, width);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        let c = k % channels;
        let pixel = k / channels;
        let (file_row, x) = (pixel / width, pixel % width);
        out.set(c, height - 1 - file_row, x, f64::from(value));
    }
    out
}

/// Reads one blob from a stream. `Ok(None)` when the stream is already at its end.
pub fn read_pfm_from<R: BufRead>(r: &mut R) -> Result<Option<ImageTensor>> {
    let header = match read_header(r)? {
        None => return Ok(None),
        Some(h) => h,
    };
    let len = header.payload_len();
    let mut payload = Vec::new();
    // `take` keeps the allocation proportional to the bytes actually present.
    r.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(format_err(format!(
            "truncated payload: expected {len} bytes, got {}",
            payload.len()
        )));
    }
    Ok(Some(decode_payload(&header, &payload)))
}

/// Decodes a complete single-blob buffer. Trailing bytes are an error.
pub fn read_pfm(bytes: &[u8]) -> Result<ImageTensor> {
    let mut cursor = io::Cursor::new(bytes);
    let header = read_header(&mut cursor)?.ok_or_else(|| format_err("empty input"))?;
    let start = cursor.position() as usize;
    let available = bytes.len() - start;
    let len = header.payload_len();
    if available != len {
        return Err(format_err(format!(
            "{}x{}x{} payload needs {len} bytes, found {available}",
            header.channels, header.width, header.height
        )));
    }
    Ok(decode_payload(&header, &bytes[start..]))
}

/// Decodes a buffer of one or more concatenated blobs, stacking channels.
pub fn read_pfm_planes(bytes: &[u8]) -> Result<ImageTensor> {
    let mut cursor = io::Cursor::new(bytes);
    let mut parts = Vec::new();
    while let Some(part) = read_pfm_from(&mut cursor)? {
        parts.push(part);
    }
    if parts.is_empty() {
        return Err(format_err("empty input"));
    }
    ImageTensor::stack(&parts)
}

/// Canonical encoding: little-endian, scale `-1.0`, single separators.
pub fn write_pfm(image: &ImageTensor) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_pfm_to(&mut out, image)?;
    Ok(out)
}

pub fn write_pfm_to<W: Write>(w: &mut W, image: &ImageTensor) -> Result<()> {
    let (channels, height, width) = image.dims();
    if channels != 1 && channels != 3 {
        return Err(Error::Parameter(format!(
            "PFM holds 1 or 3 channels, got {channels}; write one blob per channel instead"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Dimensions("cannot encode an empty image".into()));
    }
    let mut buf =
        Vec::with_capacity(canonical_header_len(width, height) + 4 * image.as_slice().len());
    buf.extend_from_slice(canonical_header(channels, width, height).as_bytes());
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                buf.extend_from_slice(&(image.get(c, y, x) as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// One blob for 1 or 3 channels, otherwise one grayscale blob per channel.
pub fn write_pfm_planes(image: &ImageTensor) -> Result<Vec<u8>> {
    if matches!(image.channels(), 1 | 3) {
        return write_pfm(image);
    }
    let mut out = Vec::new();
    for c in 0..image.channels() {
        write_pfm_to(&mut out, &image.extract_channel(c))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_pixel_little_endian() {
        let mut blob = b"Pf\n1 1\n-1.0\n".to_vec();
        blob.extend_from_slice(&[0x00, 0x00, 0x80, 0x3F]);
        let img = read_pfm(&blob).unwrap();
        assert_eq!(img.dims(), (1, 1, 1));
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(write_pfm(&img).unwrap(), blob);
    }

    #[test]
    fn big_endian_with_positive_scale() {
        let mut blob = b"Pf\n2 2\n1.0\n".to_vec();
        // bottom row first: (1,0)=3 (1,1)=4, then top row (0,0)=1 (0,1)=2
        for v in [3.0f32, 4.0, 1.0, 2.0] {
            blob.extend_from_slice(&v.to_be_bytes());
        }
        let img = read_pfm(&blob).unwrap();
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(0, 0, 1), 2.0);
        assert_eq!(img.get(0, 1, 0), 3.0);
        assert_eq!(img.get(0, 1, 1), 4.0);
    }

    #[test]
    fn colour_payload_size() {
        let img = ImageTensor::from_fn(3, 128, 128, |c, y, x| (c + y + x) as f64);
        let bytes = write_pfm(&img).unwrap();
        let header = canonical_header_len(128, 128);
        assert_eq!(&bytes[..header], b"PF\n128 128\n-1.0\n");
        assert_eq!(bytes.len() - header, 196_608);
        assert_eq!(write_pfm(&img).unwrap(), bytes);
        assert_eq!(read_pfm(&bytes).unwrap(), img);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_pfm(b"").is_err());
        assert!(read_pfm(b"P5\n1 1\n255\n\0").is_err());
        assert!(read_pfm(b"Pf\n1 1\n0.0\n\0\0\0\0").is_err());
        assert!(read_pfm(b"Pf\n-1 1\n-1.0\n\0\0\0\0").is_err());
        assert!(read_pfm(b"Pf\n1 1\nabc\n\0\0\0\0").is_err());
        // truncated and overlong payloads
        assert!(read_pfm(b"Pf\n1 1\n-1.0\n\0\0\0").is_err());
        assert!(read_pfm(b"Pf\n1 1\n-1.0\n\0\0\0\0\0").is_err());
        assert!(read_pfm(b"Pf\n99999999 99999999\n-1.0\n").is_err());
    }

    #[test]
    fn rejects_unsupported_channel_counts_on_write() {
        let img = ImageTensor::zeros(2, 2, 2);
        assert!(write_pfm(&img).is_err());
        let planes = write_pfm_planes(&img).unwrap();
        assert_eq!(read_pfm_planes(&planes).unwrap(), img);
    }

    #[test]
    fn stream_reads_consecutive_blobs() {
        let a = ImageTensor::filled(1, 2, 3, 0.5);
        let b = ImageTensor::filled(3, 1, 1, -2.0);
        let mut bytes = write_pfm(&a).unwrap();
        bytes.extend(write_pfm(&b).unwrap());
        let mut cursor = io::Cursor::new(bytes);
        assert_eq!(read_pfm_from(&mut cursor).unwrap().unwrap(), a);
        assert_eq!(read_pfm_from(&mut cursor).unwrap().unwrap(), b);
        assert!(read_pfm_from(&mut cursor).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn round_trip_at_single_precision(
            w in 1usize..6,
            h in 1usize..6,
            colour in any::<bool>(),
            seed in any::<u32>(),
        ) {
            let channels = if colour { 3 } else { 1 };
            let img = ImageTensor::from_fn(channels, h, w, |c, y, x| {
                let k = (seed as usize).wrapping_add(c * 31 + y * 7 + x) as f32;
                f64::from(k.sin() * 1000.0)
            });
            let bytes = write_pfm(&img).unwrap();
            prop_assert_eq!(bytes.len(), canonical_header_len(w, h) + 4 * channels * w * h);
            let back = read_pfm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(write_pfm(&back).unwrap(), bytes);
        }
    }
}
