#![no_main]

use std::io::Cursor;

use libfuzzer_sys::fuzz_target;
use patchblend::imageio::{read_pfm_from, read_pfm_planes};

fuzz_target!(|data: &[u8]| {
    let mut cursor = Cursor::new(data);
    while let Ok(Some(_)) = read_pfm_from(&mut cursor) {}
    let _ = read_pfm_planes(data);
});
