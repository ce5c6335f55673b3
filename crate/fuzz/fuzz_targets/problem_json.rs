#![no_main]

use csa_core::optimizer::DesignProblem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = DesignProblem::parse(text);
    }
});
