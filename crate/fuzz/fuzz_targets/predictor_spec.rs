#![no_main]

use libfuzzer_sys::fuzz_target;
use patchblend::PredictorSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = text.parse::<PredictorSpec>() {
        let shown = spec.to_string();
        assert_eq!(shown.parse::<PredictorSpec>().ok(), Some(spec), "{shown}");
    }
});
