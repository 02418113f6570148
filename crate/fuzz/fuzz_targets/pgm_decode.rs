#![no_main]

use libfuzzer_sys::fuzz_target;
use patchblend::imageio::read_pgm;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = read_pgm(data) {
        assert_eq!(image.channels(), 1);
        assert!(image.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
