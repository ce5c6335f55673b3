//! Capacity bound on the asymptotic threshold at a given rate.
//!
//! `G(R)` is the positive root of `G = 1 - exp(-G/R)`; no distribution of
//! rate `R` has a threshold above it.

use serde::Serialize;

use crate::ensemble::ComponentDistribution;
use crate::error::{Error, Result};

/// Absolute tolerance of the root bracket.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Slack allowed on the area condition `A_b + A_s <= 1`.
pub const AREA_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityPoint {
    #[serde(rename = "R")]
    pub rate: f64,
    #[serde(rename = "G")]
    pub load: f64,
}

/// Largest load compatible with rate `R`, for `0 < R <= 1`.
pub fn capacity_bound(rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Domain(format!("rate {rate} outside (0, 1]")));
    }
    if rate == 1.0 {
        return Ok(0.0);
    }
    // h(G) = 1 - exp(-G/R) - G is positive below the root and negative above.
    let h = |g: f64| -(-g / rate).exp_m1() - g;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Move `lo` off the trivial root at zero.
    let mut start = 0.5;
    while h(start) <= 0.0 {
        start *= 0.5;
        if start < f64::MIN_POSITIVE {
            return Ok(0.0);
        }
    }
    lo = lo.max(start);
    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest rate at which load `G` can still be supported: `-G / ln(1 - G)`.
pub fn min_rate_for_load(load: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&load) {
        return Err(Error::Domain(format!("load {load} outside [0, 1)")));
    }
    if load < 1e-8 {
        // Series: -G / ln(1 - G) = 1 - G/2 - G^2/12 - ...
        return Ok(1.0 - load / 2.0);
    }
    Ok(-load / (-load).ln_1p())
}

/// `(R, G(R))` pairs over a rate grid.
pub fn bound_curve(rates: &[f64]) -> Result<Vec<CapacityPoint>> {
    rates
        .iter()
        .map(|&rate| capacity_bound(rate).map(|load| CapacityPoint { rate, load }))
        .collect()
}

/// Area under the slice-node EXIT function: `1 + (R/G) e^{-G/R} - R/G`.
pub fn slice_area(load: f64, rate: f64) -> f64 {
    if load == 0.0 {
        return 0.0;
    }
    let x = load / rate;
    // 1 - (1 - e^{-x}) / x, arranged to stay accurate for small x.
    1.0 + (-x).exp_m1() / x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaCheck {
    pub area_burst: f64,
    pub area_slice: f64,
    pub admissible: bool,
}

/// Tests the necessary condition `A_b + A_s <= 1` with `A_b = R`.
pub fn area_admissibility(dist: &ComponentDistribution, load: f64) -> Result<AreaCheck> {
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::Domain(format!(
            "load {load} must be finite and non-negative"
        )));
    }
    let area_burst = dist.rate();
    let area_slice = slice_area(load, area_burst);
    Ok(AreaCheck {
        area_burst,
        area_slice,
        admissible: area_burst + area_slice <= 1.0 + AREA_SLACK,
    })
}
