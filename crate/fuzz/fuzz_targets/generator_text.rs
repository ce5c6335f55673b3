#![no_main]

use csa_core::code::BinaryLinearCode;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(code) = BinaryLinearCode::parse(text) {
        assert!(code.dimension() <= code.length());
        if code.length() <= 16 {
            let _ = code.information_functions();
            let _ = code.exit_bn(0.5);
        }
    }
});
