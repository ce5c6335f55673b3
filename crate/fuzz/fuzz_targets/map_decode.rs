#![no_main]

use csa_core::code::BinaryLinearCode;
use libfuzzer_sys::fuzz_target;

// Input: generator text, a newline, then one byte per known position
// (position in the low nibble, payload in the high nibble).
fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == b'\n') else {
        return;
    };
    let Ok(text) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let Ok(code) = BinaryLinearCode::parse(text) else {
        return;
    };
    let payloads: Vec<[u8; 1]> = data[split + 1..].iter().map(|b| [b >> 4]).collect();
    let known: Vec<(usize, &[u8])> = data[split + 1..]
        .iter()
        .zip(&payloads)
        .map(|(b, p)| ((b & 0x0f) as usize, &p[..]))
        .collect();
    if let Ok(recovered) = code.map_erasure_decode(&known) {
        for (pos, _) in &recovered {
            assert!(*pos < code.length());
            assert!(known.iter().all(|(k, _)| k != pos));
        }
    }
});
