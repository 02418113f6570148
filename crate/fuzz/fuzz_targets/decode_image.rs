#![no_main]

use libfuzzer_sys::fuzz_target;
use patchblend::imageio::decode_image;

fuzz_target!(|data: &[u8]| {
    let _ = decode_image(data);
});
