//! Density evolution for the asymptotic (large frame) regime.
//!
//! With `p` the erasure probability of an edge leaving a slice node and `q`
//! the one leaving a burst node, one decoding iteration maps
//! `q = f_b(p)` (edge-weighted mix of component EXIT functions) and
//! `p = f_s(q) = 1 - exp(-(G/R) q)`, starting from `p_0 = f_s(1)`.

use serde::Serialize;

use crate::code::check_probability;
use crate::ensemble::ComponentDistribution;
use crate::error::{Error, Result};

/// Stopping rules for a density evolution run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeSettings {
    pub max_iterations: usize,
    /// `p` below this counts as convergence to zero.
    pub epsilon: f64,
    /// A per-iteration decrease below this (with `p >= epsilon`) is a stall.
    pub stall_delta: f64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            epsilon: 1e-10,
            stall_delta: 1e-14,
        }
    }
}

impl DeSettings {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) || !(self.stall_delta >= 0.0) {
            return Err(Error::Domain(
                "epsilon must be positive and stall_delta non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// How a density evolution run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Stalled { p: f64, q: f64 },
    IterationCap,
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged)
    }
}

/// Which form of the recursion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recursion {
    /// Edge-weighted mixture of component EXIT functions.
    General,
    /// Repetition-only distributions through the degree polynomial.
    Irsa,
    /// A single `(k + 1, k)` entry: `f_b(p) = 1 - (1 - p)^k`.
    Spc,
}

impl Recursion {
    /// The cheapest form applicable to `dist`.
    pub fn auto(dist: &ComponentDistribution) -> Self {
        if Self::Irsa.applies(dist) {
            Self::Irsa
        } else if Self::Spc.applies(dist) {
            Self::Spc
        } else {
            Self::General
        }
    }

    pub fn applies(&self, dist: &ComponentDistribution) -> bool {
        match self {
            Self::General => true,
            Self::Irsa => dist.is_repetition_only(),
            Self::Spc => {
                let k = dist.dimension();
                // Every (k + 1, k) code of distance 2 is the even-weight code.
                dist.iter()
                    .filter(|(_, p)| *p > 0.0)
                    .all(|(c, _)| c.length() == k + 1 && c.min_distance() == 2)
            }
        }
    }
}

/// The burst-node map `f_b` of a distribution in a chosen form.
#[derive(Debug, Clone)]
pub struct BurstExit<'a> {
    dist: &'a ComponentDistribution,
    recursion: Recursion,
    /// Coefficients of `sum_h lambda_h p^(h-1)` by power, for the repetition form.
    edge_polynomial: Vec<f64>,
}

impl<'a> BurstExit<'a> {
    pub fn new(dist: &'a ComponentDistribution, recursion: Recursion) -> Result<Self> {
        if !recursion.applies(dist) {
            return Err(Error::Unsupported(format!(
                "{recursion:?} recursion does not apply to this distribution"
            )));
        }
        let mut edge_polynomial = Vec::new();
        if recursion == Recursion::Irsa {
            for ((c, _), lambda) in dist.iter().zip(dist.edge_fractions()) {
                let d = c.length() - 1;
                if edge_polynomial.len() <= d {
                    edge_polynomial.resize(d + 1, 0.0);
                }
                edge_polynomial[d] += lambda;
            }
        }
        Ok(Self {
            dist,
            recursion,
            edge_polynomial,
        })
    }

    pub fn recursion(&self) -> Recursion {
        self.recursion
    }

    /// `f_b(p)` without a domain check.
    pub fn eval(&self, p: f64) -> f64 {
        match self.recursion {
            Recursion::General => self
                .dist
                .iter()
                .zip(self.dist.edge_fractions())
                .map(|((c, _), lambda)| lambda * c.exit().eval(p))
                .sum(),
            Recursion::Irsa => self
                .edge_polynomial
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * p + c),
            Recursion::Spc => 1.0 - (1.0 - p).powi(self.dist.dimension() as i32),
        }
    }
}

/// Slice-node EXIT function `1 - exp(-(G/R) q)`.
pub fn exit_sn(q: f64, load: f64, rate: f64) -> Result<f64> {
    check_probability(q)?;
    check_load_rate(load, rate)?;
    Ok(slice_exit(q, load / rate))
}

fn slice_exit(q: f64, ratio: f64) -> f64 {
    -(-ratio * q).exp_m1()
}

fn check_load_rate(load: f64, rate: f64) -> Result<()> {
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::Domain(format!(
            "load {load} must be finite and non-negative"
        )));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Domain(format!("rate {rate} outside (0, 1]")));
    }
    Ok(())
}

/// One recorded iteration: slice-to-burst `p` and burst-to-slice `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeStep {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeTrace {
    pub load: f64,
    pub rate: f64,
    /// `steps[0]` is `(p_0, q_0 = 1)`; later steps follow the recursion.
    pub steps: Vec<DeStep>,
    pub verdict: Verdict,
}

impl DeTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn final_p(&self) -> f64 {
        self.steps.last().map_or(1.0, |s| s.p)
    }
}

/// Runs density evolution at load `G`, choosing the recursion form
/// automatically.
pub fn de_iterate(
    dist: &ComponentDistribution,
    load: f64,
    settings: &DeSettings,
) -> Result<DeTrace> {
    de_iterate_with(dist, load, settings, Recursion::auto(dist))
}

pub fn de_iterate_with(
    dist: &ComponentDistribution,
    load: f64,
    settings: &DeSettings,
    recursion: Recursion,
) -> Result<DeTrace> {
    settings.validate()?;
    check_load_rate(load, dist.rate())?;
    let fb = BurstExit::new(dist, recursion)?;
    let mut steps = Vec::new();
    let verdict = run(&fb, load / dist.rate(), settings, |p, q| {
        steps.push(DeStep { p, q })
    });
    Ok(DeTrace {
        load,
        rate: dist.rate(),
        steps,
        verdict,
    })
}

fn run(
    fb: &BurstExit<'_>,
    ratio: f64,
    settings: &DeSettings,
    mut record: impl FnMut(f64, f64),
) -> Verdict {
    let mut p = slice_exit(1.0, ratio);
    record(p, 1.0);
    for _ in 0..settings.max_iterations {
        if p < settings.epsilon {
            return Verdict::Converged;
        }
        let q = fb.eval(p).clamp(0.0, 1.0);
        let next = slice_exit(q, ratio).min(p);
        record(next, q);
        if p - next < settings.stall_delta && next >= settings.epsilon {
            return Verdict::Stalled { p: next, q };
        }
        p = next;
    }
    if p < settings.epsilon {
        Verdict::Converged
    } else {
        Verdict::IterationCap
    }
}

fn verdict_at(fb: &BurstExit<'_>, load: f64, rate: f64, settings: &DeSettings) -> (Verdict, usize) {
    let mut iterations = 0usize;
    let verdict = run(fb, load / rate, settings, |_, _| iterations += 1);
    (verdict, iterations - 1)
}

/// One bisection probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    #[serde(rename = "G")]
    pub load: f64,
    pub converged: bool,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub iterations: usize,
}

/// Outcome of the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Midpoint of the final bracket.
    #[serde(rename = "G_star")]
    pub g_star: f64,
    /// Largest probed load that converged (0 if none did).
    #[serde(skip)]
    pub lower: f64,
    /// Smallest probed load that did not converge (1 if none failed).
    #[serde(skip)]
    pub upper: f64,
    pub tolerance: f64,
    pub probes: Vec<Probe>,
}

pub const DEFAULT_THRESHOLD_TOLERANCE: f64 = 1e-4;

/// Asymptotic threshold by bisection on `G` over `[0, 1]`.
pub fn threshold(dist: &ComponentDistribution, tolerance: f64) -> Result<ThresholdResult> {
    threshold_with(
        dist,
        tolerance,
        &DeSettings::default(),
        Recursion::auto(dist),
    )
}

pub fn threshold_with(
    dist: &ComponentDistribution,
    tolerance: f64,
    settings: &DeSettings,
    recursion: Recursion,
) -> Result<ThresholdResult> {
    threshold_in(dist, (0.0, 1.0), tolerance, settings, recursion)
}

/// Bisection on a caller-supplied bracket `(lower, upper)`; `lower` is taken
/// to converge and `upper` not to, without probing either.
pub fn threshold_in(
    dist: &ComponentDistribution,
    bracket: (f64, f64),
    tolerance: f64,
    settings: &DeSettings,
    recursion: Recursion,
) -> Result<ThresholdResult> {
    if !(tolerance > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    let (mut lower, mut upper) = bracket;
    if !(0.0 <= lower && lower <= upper && upper <= 1.0) {
        return Err(Error::Domain(format!("invalid bracket [{lower}, {upper}]")));
    }
    settings.validate()?;
    let fb = BurstExit::new(dist, recursion)?;
    let rate = dist.rate();
    let mut probes = Vec::new();
    while upper - lower > tolerance {
        let mid = 0.5 * (lower + upper);
        let (verdict, iterations) = verdict_at(&fb, mid, rate, settings);
        probes.push(Probe {
            load: mid,
            converged: verdict.is_converged(),
            verdict,
            iterations,
        });
        if verdict.is_converged() {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(ThresholdResult {
        g_star: 0.5 * (lower + upper),
        lower,
        upper,
        tolerance,
        probes,
    })
}

/// Whether density evolution converges to zero at `load`.
pub fn converges(dist: &ComponentDistribution, load: f64, settings: &DeSettings) -> Result<bool> {
    settings.validate()?;
    check_load_rate(load, dist.rate())?;
    let fb = BurstExit::new(dist, Recursion::auto(dist))?;
    Ok(verdict_at(&fb, load, dist.rate(), settings)
        .0
        .is_converged())
}

/// Sum over entries of minimum distance 2 of `Lambda_h B_2^(h)`.
pub fn weight2_mass(dist: &ComponentDistribution) -> f64 {
    dist.expected_weight2()
}

/// Largest load at which the zero fixed point can be stable:
/// `k / (2 B_2)`, infinite when no entry has distance 2.
pub fn stability_bound(dist: &ComponentDistribution) -> f64 {
    let b2 = weight2_mass(dist);
    if b2 > 0.0 {
        dist.dimension() as f64 / (2.0 * b2)
    } else {
        f64::INFINITY
    }
}

/// Central finite difference of `f_s(f_b(p))` at `p = 0`.
pub fn stability_derivative_check(dist: &ComponentDistribution, load: f64) -> Result<f64> {
    check_load_rate(load, dist.rate())?;
    let fb = BurstExit::new(dist, Recursion::General)?;
    let ratio = load / dist.rate();
    let h = 1e-5;
    let f = |p: f64| slice_exit(fb.eval(p), ratio);
    Ok((f(h) - f(-h)) / (2.0 * h))
}

/// The analytic slope `2 G B_2 / k` of the composed map at zero.
pub fn stability_derivative(dist: &ComponentDistribution, load: f64) -> f64 {
    2.0 * load * weight2_mass(dist) / dist.dimension() as f64
}

/// One EXIT chart row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitChartRow {
    pub p: f64,
    pub f_b: f64,
    pub f_s_inv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitChart {
    pub load: f64,
    pub rate: f64,
    /// Rows of the uniform `p` grid where `f_s^{-1}(p) <= 1`.
    pub rows: Vec<ExitChartRow>,
    /// Area under `f_b` over [0, 1].
    pub area_burst: f64,
    /// Area under `f_s` over [0, 1].
    pub area_slice: f64,
}

/// EXIT chart data at load `G` on a grid of `samples` points.
pub fn exit_chart(dist: &ComponentDistribution, load: f64, samples: usize) -> Result<ExitChart> {
    if samples < 2 {
        return Err(Error::Domain(
            "an EXIT chart needs at least 2 samples".into(),
        ));
    }
    if !(load > 0.0) {
        return Err(Error::Domain(format!(
            "load {load} must be positive for an EXIT chart"
        )));
    }
    let rate = dist.rate();
    check_load_rate(load, rate)?;
    let ratio = load / rate;
    let fb = BurstExit::new(dist, Recursion::General)?;
    let p_max = slice_exit(1.0, ratio);
    let rows = (0..samples)
        .map(|i| i as f64 / (samples - 1) as f64)
        .filter(|&p| p < p_max || p == 0.0)
        .map(|p| ExitChartRow {
            p,
            f_b: fb.eval(p),
            f_s_inv: -(-p).ln_1p() / ratio,
        })
        .collect();
    let area_burst = dist
        .iter()
        .zip(dist.edge_fractions())
        .map(|((c, _), lambda)| lambda * c.exit().area())
        .sum();
    let area_slice = integrate(|q| slice_exit(q, ratio), 0.0, 1.0, 1e-13);
    Ok(ExitChart {
        load,
        rate,
        rows,
        area_burst,
        area_slice,
    })
}

/// Whether `f_s(f_b(p)) < p` at every non-zero grid point (decoding tunnel open).
pub fn tunnel_open(dist: &ComponentDistribution, load: f64, samples: usize) -> Result<bool> {
    check_load_rate(load, dist.rate())?;
    let fb = BurstExit::new(dist, Recursion::General)?;
    let ratio = load / dist.rate();
    Ok((1..samples.max(2)).all(|i| {
        let p = i as f64 / (samples.max(2) - 1) as f64;
        slice_exit(fb.eval(p), ratio) < p
    }))
}

/// Adaptive Simpson quadrature.
pub(crate) fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::code::BinaryLinearCode;
    use crate::ensemble::Component;

    fn single(c: Component) -> ComponentDistribution {
        ComponentDistribution::new(vec![(Arc::new(c), 1.0)]).unwrap()
    }

    fn spc(k: usize) -> ComponentDistribution {
        single(Component::explicit(BinaryLinearCode::single_parity_check(k).unwrap()).unwrap())
    }

    #[test]
    fn exit_sn_examples() {
        assert_eq!(exit_sn(0.0, 0.7, 0.5).unwrap(), 0.0);
        assert!((exit_sn(1.0, 1.0 / 3.0, 1.0 / 3.0).unwrap() - 0.632121).abs() < 1e-6);
        assert!(exit_sn(1.1, 0.5, 0.5).is_err());
        assert!(exit_sn(0.5, -0.1, 0.5).is_err());
        assert!(exit_sn(0.5, 0.5, 0.0).is_err());
        let mut last = 0.0;
        for i in 0..=100 {
            let v = exit_sn(i as f64 / 100.0, 0.8, 0.4).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn iterate_examples() {
        let s = DeSettings::default();
        assert!(de_iterate(&spc(2), 0.30, &s)
            .unwrap()
            .verdict
            .is_converged());
        assert!(matches!(
            de_iterate(&spc(2), 0.40, &s).unwrap().verdict,
            Verdict::Stalled { .. }
        ));
        let rep2 = single(Component::repetition(2).unwrap());
        assert!(de_iterate(&rep2, 0.45, &s).unwrap().verdict.is_converged());
        let t = de_iterate(&rep2, 0.55, &s).unwrap();
        assert!(matches!(t.verdict, Verdict::Stalled { p, .. } if p > 0.1));
        assert!((t.steps[0].p - (1.0 - (-1.1f64).exp())).abs() < 1e-15);
        assert!(t.steps.windows(2).all(|w| w[1].p <= w[0].p));
        let capped = DeSettings {
            max_iterations: 2,
            ..s
        };
        assert_eq!(
            de_iterate(&rep2, 0.45, &capped).unwrap().verdict,
            Verdict::IterationCap
        );
    }

    #[test]
    fn recursion_forms_agree() {
        let d = spc(3);
        let general = BurstExit::new(&d, Recursion::General).unwrap();
        let fast = BurstExit::new(&d, Recursion::Spc).unwrap();
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            assert!((general.eval(p) - fast.eval(p)).abs() < 1e-12);
        }
        assert!(BurstExit::new(&d, Recursion::Irsa).is_err());
    }

    #[test]
    fn bounds_and_slopes() {
        let rep2 = single(Component::repetition(2).unwrap());
        assert_eq!(stability_bound(&rep2), 0.5);
        assert!((stability_derivative_check(&rep2, 0.5).unwrap() - 1.0).abs() < 1e-5);
        let rep3 = single(Component::repetition(3).unwrap());
        assert_eq!(stability_bound(&rep3), f64::INFINITY);
        assert!(stability_derivative_check(&rep3, 0.8).unwrap().abs() < 1e-5);
        assert!((stability_derivative_check(&spc(2), 1.0 / 3.0).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn spc_threshold() {
        let t = threshold(&spc(2), DEFAULT_THRESHOLD_TOLERANCE).unwrap();
        assert!((t.g_star - 1.0 / 3.0).abs() < 1e-3);
        assert!(t.upper - t.lower <= DEFAULT_THRESHOLD_TOLERANCE);
        assert!(threshold(&spc(2), 0.0).is_err());
    }

    #[test]
    fn chart_areas() {
        let rep2 = single(Component::repetition(2).unwrap());
        let chart = exit_chart(&rep2, 0.4, 101).unwrap();
        assert!((chart.area_burst - 0.5).abs() < 1e-12);
        let closed = 1.0 + (0.5 / 0.4) * (-0.8f64).exp() - 0.5 / 0.4;
        assert!((chart.area_slice - closed).abs() < 1e-10);
        assert!(chart.rows.iter().all(|r| r.f_s_inv <= 1.0));
        assert!(chart.rows.len() < 101);
        assert!(exit_chart(&rep2, 0.4, 1).is_err());
    }

    #[test]
    fn quadrature() {
        assert!((integrate(|x| x * x, 0.0, 1.0, 1e-12) - 1.0 / 3.0).abs() < 1e-12);
    }
}
