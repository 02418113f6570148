//! Netpbm-family codecs: PFM for float data and the predictor wire format,
//! binary PGM for 8/16-bit grayscale inputs and previews.

mod pfm;
mod pgm;

use std::fs;
use std::path::Path;

pub use pfm::{
    canonical_header_len, read_header, read_pfm, read_pfm_from, read_pfm_planes, write_pfm,
    write_pfm_planes, write_pfm_to, PfmHeader, MAX_DIMENSION,
};
pub use pgm::{read_pgm, write_pgm};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Decodes a PFM (one or more blobs) or P5 buffer, chosen by magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor> {
    match bytes.get(..2) {
        Some(b"P5") => read_pgm(bytes),
        Some(b"Pf") | Some(b"PF") => read_pfm_planes(bytes),
        _ => Err(Error::Format("unrecognized image format".into())),
    }
}

pub fn read_image(path: &Path) -> Result<ImageTensor> {
    decode_image(&fs::read(path)?)
}

/// Writes PGM (8-bit) when the extension is `.pgm`, PFM otherwise.
pub fn write_image(path: &Path, image: &ImageTensor) -> Result<()> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let bytes = if is_pgm {
        write_pgm(&image.map(|v| v.clamp(0.0, 1.0)), 255)?
    } else {
        write_pfm_planes(image)?
    };
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_dispatches_on_magic() {
        let img = ImageTensor::filled(1, 2, 2, 0.25);
        assert_eq!(decode_image(&write_pfm(&img).unwrap()).unwrap(), img);
        let gray = decode_image(&write_pgm(&img, 65535).unwrap()).unwrap();
        assert!(gray.max_abs_diff(&img).unwrap() < 1e-4);
        assert!(decode_image(b"GIF89a").is_err());
        assert!(decode_image(b"").is_err());
    }
}
