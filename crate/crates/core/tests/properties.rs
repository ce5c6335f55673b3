use std::sync::Arc;

use csa_core::capacity::{capacity_bound, min_rate_for_load, slice_area};
use csa_core::code::BinaryLinearCode;
use csa_core::de::{self, DeSettings, Recursion};
use csa_core::ensemble::{
    draw_admissible_code, Component, ComponentDistribution, DistributionConfig,
};
use csa_core::optimizer::DesignProblem;
use csa_core::sim::campaign::CampaignConfig;
use csa_core::sim::frame::{generate_frame, Activation};
use csa_core::sim::{genie_decode, sic_decode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rep_mix(weights: &[f64]) -> ComponentDistribution {
    let entries = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (Arc::new(Component::repetition(i + 2).unwrap()), w))
        .collect::<Vec<_>>();
    let total: f64 = weights.iter().sum();
    ComponentDistribution::new(entries.into_iter().map(|(c, w)| (c, w / total)).collect()).unwrap()
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len)
}

fn random_code() -> impl Strategy<Value = BinaryLinearCode> {
    (1usize..=4, 0usize..=7, any::<u64>()).prop_map(|(k, extra, seed)| {
        let n = k + 1 + extra;
        draw_admissible_code(n, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    })
}

fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let h = 1.0 / intervals as f64;
    let inner: f64 = (1..intervals)
        .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h))
        .sum();
    h / 3.0 * (f(0.0) + inner + f(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn area_under_burst_exit_is_code_rate(code in random_code()) {
        let area = simpson(|p| code.exit_bn(p).unwrap(), 1000);
        let rate = code.dimension() as f64 / code.length() as f64;
        prop_assert!((area - rate).abs() < 1e-6);
        prop_assert!((code.exit_coefficients().unwrap().area() - rate).abs() < 1e-12);
    }

    #[test]
    fn burst_exit_endpoints_and_monotonicity(code in random_code()) {
        prop_assert!(code.exit_bn(0.0).unwrap().abs() < 1e-12);
        prop_assert!((code.exit_bn(1.0).unwrap() - 1.0).abs() < 1e-12);
        let mut last = 0.0;
        for i in 0..=50 {
            let v = code.exit_bn(i as f64 / 50.0).unwrap();
            prop_assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn information_function_endpoints(code in random_code()) {
        let e = &code.information_functions().unwrap().values;
        let (n, k) = (code.length() as u128, code.dimension() as u128);
        prop_assert_eq!(e[0], 0);
        prop_assert_eq!(e[1], n);
        prop_assert_eq!(e[code.length() - 1], k * n);
        prop_assert_eq!(e[code.length()], k);
    }

    #[test]
    fn spc_exit_is_dual_of_repetition(k in 1usize..=8, p in 0.0f64..=1.0) {
        let code = BinaryLinearCode::single_parity_check(k).unwrap();
        prop_assert!((code.exit_bn(p).unwrap() - (1.0 - (1.0 - p).powi(k as i32))).abs() < 1e-12);
    }

    #[test]
    fn repetition_fast_path_matches_general(w in weights(5), p in 0.0f64..=1.0) {
        let dist = rep_mix(&w);
        let general = de::BurstExit::new(&dist, Recursion::General).unwrap().eval(p);
        let fast = de::BurstExit::new(&dist, Recursion::Irsa).unwrap().eval(p);
        prop_assert!((general - fast).abs() < 1e-12);
    }

    #[test]
    fn erasure_probability_is_non_increasing(w in weights(4), load in 0.05f64..1.2) {
        let settings = DeSettings { max_iterations: 2_000, ..DeSettings::default() };
        let trace = de::de_iterate(&rep_mix(&w), load, &settings).unwrap();
        let mut last = 1.0;
        for step in &trace.steps {
            prop_assert!((0.0..=1.0).contains(&step.p) && (0.0..=1.0).contains(&step.q));
            prop_assert!(step.p <= last + 1e-15);
            last = step.p;
        }
    }

    #[test]
    fn capacity_bound_inverts_min_rate(load in 0.01f64..0.99) {
        let rate = min_rate_for_load(load).unwrap();
        prop_assert!((capacity_bound(rate).unwrap() - load).abs() < 1e-9);
        // At capacity the two EXIT areas sum to one.
        prop_assert!((slice_area(load, rate) + rate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_respects_bounds(w in weights(4)) {
        let dist = rep_mix(&w);
        let g = de::threshold(&dist, 1e-3).unwrap().g_star;
        prop_assert!(g <= de::stability_bound(&dist) + 1e-3);
        prop_assert!(g <= capacity_bound(dist.rate()).unwrap() + 1e-3);
    }

    #[test]
    fn parsers_never_panic(text in ".{0,64}") {
        let _ = BinaryLinearCode::parse(&text);
        let _ = DistributionConfig::parse(&text);
        let _ = CampaignConfig::parse(&text);
        let _ = DesignProblem::parse(&text);
    }

    #[test]
    fn generator_text_never_panics(text in "[01, ;\n]{0,80}") {
        if let Ok(code) = BinaryLinearCode::parse(&text) {
            prop_assert!(code.dimension() >= 1 && code.dimension() <= code.length());
        }
    }
}

fn sim_mix(choice: usize) -> ComponentDistribution {
    let json = match choice {
        0 => {
            r#"[{"type":"explicit","G":"110,011","p":0.5},{"type":"explicit","G":"1100,0111","p":0.3},
                 {"type":"explicit","G":"11100,00111","p":0.2}]"#
        }
        1 => {
            r#"[{"type":"rep","n":2,"p":0.5},{"type":"rep","n":3,"p":0.3},{"type":"rep","n":4,"p":0.2}]"#
        }
        _ => r#"[{"type":"random","n":4,"k":2,"p":0.5},{"type":"random","n":5,"k":2,"p":0.5}]"#,
    };
    ComponentDistribution::from_config(&DistributionConfig::parse(json).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sic_recovers_subset_of_genie_with_exact_payloads(
        choice in 0usize..3,
        slots in 4usize..24,
        load in 0.2f64..1.3,
        seed in any::<u64>(),
    ) {
        let dist = sim_mix(choice);
        let active = (load * slots as f64).round() as u64;
        let frame = generate_frame(slots, &dist, Activation::Fixed { active }, 4, seed).unwrap();
        let sic = sic_decode(&frame, 1000);
        let genie = genie_decode(&frame).unwrap();
        for ((s, g), burst) in sic.users.iter().zip(&genie.users).zip(frame.bursts()) {
            prop_assert!(!s.recovered || g.recovered);
            for status in [s, g] {
                if status.recovered {
                    prop_assert_eq!(status.info.as_ref(), Some(&burst.info));
                } else {
                    prop_assert!(status.info.is_none());
                }
            }
        }
        // When every user is recovered, the frame carried enough equations.
        if genie.recovered_count() == frame.bursts().len() {
            let occupied = frame.slices().iter().filter(|s| s.multiplicity() > 0).count();
            prop_assert!(occupied >= frame.bursts().len() * frame.dimension());
        }
        prop_assert_eq!(sic.residual_slices == 0, sic.recovered_count() == frame.bursts().len());
    }
}
