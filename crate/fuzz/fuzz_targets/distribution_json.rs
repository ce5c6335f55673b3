#![no_main]

use csa_core::ensemble::ComponentConfig;
use csa_core::{ComponentDistribution, DistributionConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = DistributionConfig::parse(text) else {
        return;
    };
    // Keep ensemble enumeration and sampling cheap.
    let small = config.entries().iter().all(|e| match &e.component {
        ComponentConfig::Random { n, samples, .. } => *n <= 8 && samples.is_none_or(|s| s <= 1000),
        ComponentConfig::Explicit { generator } => generator.len() <= 64,
        _ => true,
    });
    if small {
        if let Ok(dist) = ComponentDistribution::from_config(&config) {
            assert!(dist.rate() > 0.0 && dist.rate() <= 1.0);
        }
    }
});
