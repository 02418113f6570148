#![no_main]

use libfuzzer_sys::fuzz_target;
use patchblend::imageio::{read_pfm, write_pfm};

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = read_pfm(data) {
        // anything accepted must survive a canonical round trip
        let bytes = write_pfm(&image).expect("decoded images have 1 or 3 channels");
        let again = read_pfm(&bytes).expect("canonical output decodes");
        assert_eq!(image.dims(), again.dims());
        assert!(image
            .as_slice()
            .iter()
            .zip(again.as_slice())
            .all(|(a, b)| a == b || (a.is_nan() && b.is_nan())));
    }
});
