//! End-to-end scenarios across modules.

use std::sync::Arc;

use csa_core::capacity::{area_admissibility, capacity_bound, slice_area};
use csa_core::code::BinaryLinearCode;
use csa_core::de::{self, exit_chart, tunnel_open};
use csa_core::ensemble::{Component, ComponentDistribution, DistributionConfig};
use csa_core::optimizer::{evaluate, evaluate_distribution, optimize, DesignProblem};
use csa_core::sim::campaign::{run_campaign, CampaignConfig};
use csa_core::sim::frame::{generate_frame, Activation, BurstCode, BurstSpec, FrameGraph};
use csa_core::sim::{genie_decode, sic_decode};

fn dist(json: &str) -> ComponentDistribution {
    ComponentDistribution::from_config(&DistributionConfig::parse(json).unwrap()).unwrap()
}

const IRSA_THIRD: &str = r#"[{"type":"rep","n":2,"p":0.554016},{"type":"rep","n":3,"p":0.261312},
    {"type":"rep","n":6,"p":0.184672}]"#;

#[test]
fn exit_chart_areas_and_open_tunnel() {
    let d = dist(IRSA_THIRD);
    let g_star = de::threshold(&d, 1e-4).unwrap().g_star;
    let load = g_star - 0.05;
    let chart = exit_chart(&d, load, 200).unwrap();
    assert!((chart.area_burst - d.rate()).abs() < 1e-4);
    assert!((chart.area_slice - slice_area(load, d.rate())).abs() < 1e-10);
    assert!(chart
        .rows
        .iter()
        .all(|r| r.p < 1.0 - (-load / d.rate()).exp()));
    assert!(tunnel_open(&d, load, 200).unwrap());
    assert!(!tunnel_open(&d, g_star + 0.05, 200).unwrap());
}

#[test]
fn area_condition_binds_at_capacity() {
    let d = dist(IRSA_THIRD);
    let bound = capacity_bound(d.rate()).unwrap();
    let at = area_admissibility(&d, bound).unwrap();
    assert!((at.area_burst + at.area_slice - 1.0).abs() < 1e-6);
    assert!(!area_admissibility(&d, bound + 0.01).unwrap().admissible);
    assert!(area_admissibility(&d, 1e-6).unwrap().admissible);
}

fn binary(text: &str) -> BurstCode {
    BurstCode::Binary(Arc::new(BinaryLinearCode::parse(text).unwrap()))
}

fn info(seed: u8) -> Vec<Vec<u8>> {
    vec![
        vec![seed, seed ^ 0x5a, 3],
        vec![seed.wrapping_mul(7), 1, seed ^ 0xff],
    ]
}

/// One user with a (4,2) code and two users with the (3,2) parity-check code
/// sharing slices; every segment is eventually resolved.
#[test]
fn mixed_code_frame_fully_recovered() {
    let specs = vec![
        BurstSpec {
            code: binary("1011,0110"),
            positions: vec![0, 3, 6, 8],
            info: info(11),
        },
        BurstSpec {
            code: binary("110,011"),
            positions: vec![1, 3, 9],
            info: info(42),
        },
        BurstSpec {
            code: binary("110,011"),
            positions: vec![1, 5, 8],
            info: info(99),
        },
    ];
    let frame = FrameGraph::from_bursts(5, 2, 3, specs).unwrap();
    let sic = sic_decode(&frame, 100);
    assert_eq!(sic.recovered_count(), 3);
    assert_eq!(sic.residual_slices, 0);
    for (status, burst) in sic.users.iter().zip(frame.bursts()) {
        assert_eq!(status.info.as_ref(), Some(&burst.info));
    }
    assert_eq!(genie_decode(&frame).unwrap().recovered_count(), 3);
}

#[test]
fn single_user_always_recovered() {
    for text in ["11", "111", "110,011", "1100,0111", "11100,00111"] {
        let code = BinaryLinearCode::parse(text).unwrap();
        let d =
            ComponentDistribution::new(vec![(Arc::new(Component::explicit(code).unwrap()), 1.0)])
                .unwrap();
        for seed in 0..20 {
            let frame = generate_frame(6, &d, Activation::Fixed { active: 1 }, 4, seed).unwrap();
            assert_eq!(sic_decode(&frame, 10).recovered_count(), 1);
            assert_eq!(genie_decode(&frame).unwrap().recovered_count(), 1);
        }
    }
}

#[test]
fn bernoulli_activation_mean() {
    let d = dist(r#"[{"type":"rep","n":2,"p":1.0}]"#);
    let (users, probability) = (400u64, 0.05);
    let frames = 10_000u64;
    let total: u64 = (0..frames)
        .map(|seed| {
            generate_frame(
                50,
                &d,
                Activation::Bernoulli { probability, users },
                1,
                seed,
            )
            .unwrap()
            .bursts()
            .len() as u64
        })
        .sum();
    let mean = total as f64 / frames as f64;
    let sigma = (users as f64 * probability * (1.0 - probability) / frames as f64).sqrt();
    assert!((mean - users as f64 * probability).abs() < 3.0 * sigma);
}

#[test]
fn low_load_campaign_has_small_loss() {
    let config = CampaignConfig::parse(
        r#"{"M": 500, "k": 2, "mode": "bernoulli", "N": 20000, "loads": [0.2],
            "frames_per_point": 10000, "decoder": "sic", "seed": 1, "payload_bytes": 1,
            "distribution": [
                {"type":"explicit","G":"110,011","p":0.259929},
                {"type":"explicit","G":"1100,1111","p":0.053247},
                {"type":"explicit","G":"11100,00111","p":0.259293},
                {"type":"explicit","G":"11110,00011","p":0.098353},
                {"type":"explicit","G":"11111,00011","p":0.089412},
                {"type":"explicit","G":"11110000000,00111111111","p":0.105258},
                {"type":"explicit","G":"111111110000,000001111111","p":0.134508}]}"#,
    )
    .unwrap();
    let report = run_campaign(&config, None).unwrap();
    assert!((report.rate - 1.0 / 3.0).abs() < 1e-3);
    assert!(
        report.points[0].packet_loss_rate < 1e-3,
        "{:?}",
        report.points[0]
    );
}

#[test]
fn fixed_mode_reports_instantaneous_load() {
    let config = CampaignConfig::parse(
        r#"{"M": 30, "mode": "fixed", "loads": [0.51], "frames_per_point": 20,
            "decoder": "both", "seed": 4, "distribution": [{"type":"rep","n":3,"p":1.0}]}"#,
    )
    .unwrap();
    let report = run_campaign(&config, Some(2)).unwrap();
    assert_eq!(report.points.len(), 2);
    for p in &report.points {
        assert!((p.load - 15.0 / 30.0).abs() < 1e-12);
        assert_eq!(p.active, 15 * 20);
    }
    assert!(report.points[1].recovered >= report.points[0].recovered);
}

fn rep_candidates(max: usize) -> String {
    (2..=max)
        .map(|n| format!(r#"{{"type":"rep","n":{n}}}"#))
        .collect::<Vec<_>>()
        .join(",")
}

#[test]
fn optimizer_degenerate_simplex() {
    let problem = DesignProblem::parse(
        r#"{"candidates":[{"type":"rep","n":2}],"rate":0.5,"hyperparameters":{"generations":3,"population":4}}"#,
    )
    .unwrap();
    let result = optimize(&problem).unwrap();
    assert_eq!(result.lambda, vec![1.0]);
    assert!((result.threshold - 0.5).abs() < 1e-3);
}

#[test]
fn optimizer_short_repetition_codes() {
    let problem = DesignProblem::parse(&format!(
        r#"{{"candidates":[{}],"rate":0.45454545454545453,"hyperparameters":{{"generations":10,"population":12,"seed":3}}}}"#,
        rep_candidates(5)
    ))
    .unwrap();
    let result = optimize(&problem).unwrap();
    assert!((result.rate - 5.0 / 11.0).abs() < 1e-9);
    assert!(result.threshold >= 0.624, "{}", result.threshold);
    let again = optimize(&problem).unwrap();
    assert_eq!(result.trajectory, again.trajectory);
    assert!(result.trajectory.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn optimizer_long_repetition_codes() {
    let problem = DesignProblem::parse(&format!(
        r#"{{"candidates":[{}],"rate":0.2,"hyperparameters":{{"generations":200,"population":40,"seed":1}}}}"#,
        rep_candidates(30)
    ))
    .unwrap();
    let result = optimize(&problem).unwrap();
    assert!((result.rate - 0.2).abs() < 1e-9);
    assert!(result.threshold >= 0.97, "{}", result.threshold);
}

#[test]
fn evaluate_reference_distributions() {
    let candidates: Vec<_> = [2, 3, 4]
        .iter()
        .map(|&n| Arc::new(Component::repetition(n).unwrap()))
        .collect();
    let eval = evaluate(&candidates, &[0.622412, 0.255176, 0.122412], 1e-4).unwrap();
    assert!((eval.threshold - 0.7825).abs() < 1e-3);
    assert!((eval.rate - 0.4).abs() < 1e-4);

    let mds =
        dist(r#"[{"type":"mds","n":4,"k":3,"p":0.5005},{"type":"mds","n":5,"k":3,"p":0.4995}]"#);
    let eval = evaluate_distribution(&mds, 1e-4).unwrap();
    assert!(
        (eval.threshold - 0.465).abs() < 1.5e-3,
        "{}",
        eval.threshold
    );
}
