//! Differential evolution over component distributions.
//!
//! A search vector `x` in `[0, 1]^d` maps to a distribution by normalizing
//! onto the simplex and then blending toward longer (or shorter) candidates
//! until the mean length equals `k / R`, so every evaluated point has the
//! target rate exactly. The fitness is the density evolution threshold.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de::{self, DeSettings, Recursion, DEFAULT_THRESHOLD_TOLERANCE};
use crate::ensemble::{Component, ComponentConfig, ComponentDistribution};
use crate::error::{Error, Result};

/// Differential evolution settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub population: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            population: 40,
            mutation: 0.7,
            crossover: 0.9,
            generations: 200,
            seed: 0,
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_THRESHOLD_TOLERANCE
}

/// A design problem as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignProblem {
    pub candidates: Vec<ComponentConfig>,
    /// Target rate `R`.
    pub rate: f64,
    /// Candidates with local rate `k / n` below this are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_local_rate: Option<f64>,
    /// Bisection tolerance of the threshold objective.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl DesignProblem {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Metrics of one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub rate: f64,
    pub threshold: f64,
    pub stability_bound: f64,
    pub delta_e_db: f64,
}

/// Evaluates the distribution putting mass `lambda[i]` on `candidates[i]`.
pub fn evaluate(
    candidates: &[Arc<Component>],
    lambda: &[f64],
    tolerance: f64,
) -> Result<Evaluation> {
    let dist = distribution(candidates, lambda)?;
    evaluate_distribution(&dist, tolerance)
}

pub fn evaluate_distribution(dist: &ComponentDistribution, tolerance: f64) -> Result<Evaluation> {
    Ok(Evaluation {
        rate: dist.rate(),
        threshold: de::threshold(dist, tolerance)?.g_star,
        stability_bound: de::stability_bound(dist),
        delta_e_db: dist.energy_increment_db(),
    })
}

fn distribution(candidates: &[Arc<Component>], lambda: &[f64]) -> Result<ComponentDistribution> {
    if candidates.len() != lambda.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} weights for {} candidates",
            lambda.len(),
            candidates.len()
        )));
    }
    ComponentDistribution::new(
        candidates
            .iter()
            .cloned()
            .zip(lambda.iter().copied())
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignEntry {
    pub label: String,
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    /// Non-zero entries of the best distribution.
    pub distribution: Vec<DesignEntry>,
    /// Weights over all (filtered) candidates.
    pub lambda: Vec<f64>,
    pub rate: f64,
    pub threshold: f64,
    pub stability_bound: f64,
    pub delta_e_db: f64,
    /// Best converged load after each generation (index 0 is the initial
    /// population).
    pub trajectory: Vec<f64>,
}

/// Maps search vectors onto the rate-constrained simplex.
struct Projector {
    lengths: Vec<f64>,
    target: f64,
}

impl Projector {
    fn new(lengths: Vec<f64>, target: f64) -> Result<Self> {
        let min = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let max = lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-9 * target;
        if target < min - slack || target > max + slack {
            return Err(Error::InfeasibleRate(format!(
                "mean length {target} outside the candidate range [{min}, {max}]"
            )));
        }
        Ok(Self { lengths, target })
    }

    fn mean(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.lengths).map(|(w, n)| w * n).sum()
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let total: f64 = x.iter().map(|v| v.clamp(0.0, 1.0)).sum();
        let mut w: Vec<f64> = if total > 0.0 {
            x.iter().map(|v| v.clamp(0.0, 1.0) / total).collect()
        } else {
            vec![1.0 / d as f64; d]
        };
        let mean = self.mean(&w);
        if (mean - self.target).abs() > 1e-12 * self.target {
            let longer = mean < self.target;
            let side = |n: f64| {
                if longer {
                    n > self.target
                } else {
                    n < self.target
                }
            };
            // Direction: the current weights restricted to the needed side,
            // or the extreme candidate when that side carries no mass.
            let mass: f64 = w
                .iter()
                .zip(&self.lengths)
                .filter(|(_, &n)| side(n))
                .map(|(w, _)| w)
                .sum();
            let u: Vec<f64> = if mass > 0.0 {
                w.iter()
                    .zip(&self.lengths)
                    .map(|(w, &n)| if side(n) { w / mass } else { 0.0 })
                    .collect()
            } else {
                let pick = if longer {
                    argmax(&self.lengths)
                } else {
                    argmax(&self.lengths.iter().map(|n| -n).collect::<Vec<_>>())
                };
                (0..d).map(|i| if i == pick { 1.0 } else { 0.0 }).collect()
            };
            let mean_u = self.mean(&u);
            let t = ((self.target - mean) / (mean_u - mean)).clamp(0.0, 1.0);
            for (wi, ui) in w.iter_mut().zip(&u) {
                *wi = (1.0 - t) * *wi + t * ui;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

#[derive(Debug, Clone)]
struct Member {
    x: Vec<f64>,
    /// Largest load found to converge (0 when none).
    fitness: f64,
}

/// Builds the candidate components of `problem`, honoring the local-rate floor.
pub fn build_candidates(problem: &DesignProblem) -> Result<Vec<Arc<Component>>> {
    let mut out = Vec::new();
    for c in &problem.candidates {
        let component = c.build()?;
        let local = component.dimension() as f64 / component.length() as f64;
        if problem
            .min_local_rate
            .is_some_and(|floor| local < floor - 1e-12)
        {
            continue;
        }
        out.push(Arc::new(component));
    }
    if out.is_empty() {
        return Err(Error::Config(
            "no candidate satisfies the local-rate floor".into(),
        ));
    }
    let k = out[0].dimension();
    if out.iter().any(|c| c.dimension() != k) {
        return Err(Error::InvalidDistribution(
            "candidates mix dimensions".into(),
        ));
    }
    Ok(out)
}

/// Maximizes the threshold at the target rate.
pub fn optimize(problem: &DesignProblem) -> Result<DesignResult> {
    let h = problem.hyperparameters;
    if !(problem.rate > 0.0 && problem.rate <= 1.0) {
        return Err(Error::InfeasibleRate(format!(
            "rate {} outside (0, 1]",
            problem.rate
        )));
    }
    if h.population < 4 {
        return Err(Error::Config("population must be at least 4".into()));
    }
    if !(0.0..=2.0).contains(&h.mutation) || !(0.0..=1.0).contains(&h.crossover) {
        return Err(Error::Config(
            "mutation must lie in [0, 2] and crossover in [0, 1]".into(),
        ));
    }
    if !(problem.tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let candidates = build_candidates(problem)?;
    let d = candidates.len();
    let k = candidates[0].dimension();
    let lengths: Vec<f64> = candidates.iter().map(|c| c.length() as f64).collect();
    let projector = Projector::new(lengths.clone(), k as f64 / problem.rate)?;
    let settings = DeSettings::default();

    // Fitness of `x`. With `beat`, a vector that does not converge at that
    // load scores 0; otherwise the search gallops upward from it, so a trial
    // that is only marginally better costs a few probes.
    let score = |x: &[f64], beat: Option<f64>| -> Result<f64> {
        let dist = distribution(&candidates, &projector.project(x))?;
        let recursion = Recursion::auto(&dist);
        let Some(load) = beat.filter(|&l| l > 0.0) else {
            return Ok(de::threshold_in(
                &dist,
                (0.0, 1.0),
                problem.tolerance,
                &settings,
                recursion,
            )?
            .lower);
        };
        if !de::converges(&dist, load, &settings)? {
            return Ok(0.0);
        }
        let (mut lower, mut step) = (load, problem.tolerance);
        loop {
            let probe = lower + step;
            if probe >= 1.0 {
                break Ok(de::threshold_in(
                    &dist,
                    (lower, 1.0),
                    problem.tolerance,
                    &settings,
                    recursion,
                )?
                .lower);
            }
            if !de::converges(&dist, probe, &settings)? {
                break Ok(de::threshold_in(
                    &dist,
                    (lower, probe),
                    problem.tolerance,
                    &settings,
                    recursion,
                )?
                .lower);
            }
            lower = probe;
            step *= 2.0;
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    let mut initial: Vec<Vec<f64>> = Vec::with_capacity(h.population);
    // Single candidates that meet the rate on their own.
    for (i, &n) in lengths.iter().enumerate() {
        if initial.len() < h.population && (n - projector.target).abs() <= 1e-9 * projector.target {
            initial.push((0..d).map(|j| if j == i { 1.0 } else { 0.0 }).collect());
        }
    }
    // Two-candidate vertices of the rate-constrained simplex.
    for (i, &short) in lengths.iter().enumerate() {
        for (j, &long) in lengths.iter().enumerate() {
            if initial.len() < h.population && short < projector.target && long > projector.target {
                let w = (long - projector.target) / (long - short);
                let mut x = vec![0.0; d];
                x[i] = w;
                x[j] = 1.0 - w;
                initial.push(x);
            }
        }
    }
    while initial.len() < h.population {
        initial.push((0..d).map(|_| rng.random::<f64>()).collect());
    }
    let fitness = initial
        .par_iter()
        .map(|x| score(x, None))
        .collect::<Result<Vec<_>>>()?;
    let mut population: Vec<Member> = initial
        .into_iter()
        .zip(fitness)
        .map(|(x, fitness)| Member { x, fitness })
        .collect();
    let best_of = |pop: &[Member]| argmax(&pop.iter().map(|m| m.fitness).collect::<Vec<_>>());
    let mut trajectory = vec![population[best_of(&population)].fitness];

    for _ in 0..h.generations {
        let trials: Vec<Vec<f64>> = (0..h.population)
            .map(|i| {
                let [a, b, c] = distinct_others(&mut rng, h.population, i);
                let forced = rng.random_range(0..d);
                (0..d)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < h.crossover {
                            let v = population[a].x[j]
                                + h.mutation * (population[b].x[j] - population[c].x[j]);
                            v.clamp(0.0, 1.0)
                        } else {
                            population[i].x[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let scores = trials
            .par_iter()
            .zip(&population)
            .map(|(x, parent)| score(x, Some(parent.fitness)))
            .collect::<Result<Vec<_>>>()?;
        for ((member, x), s) in population.iter_mut().zip(trials).zip(scores) {
            if s >= member.fitness {
                *member = Member { x, fitness: s };
            }
        }
        trajectory.push(population[best_of(&population)].fitness);
    }

    let best = &population[best_of(&population)];
    let lambda = projector.project(&best.x);
    let dist = distribution(&candidates, &lambda)?;
    let eval = evaluate_distribution(&dist, problem.tolerance)?;
    Ok(DesignResult {
        distribution: candidates
            .iter()
            .zip(&lambda)
            .filter(|(_, &p)| p > 0.0)
            .map(|(c, &p)| DesignEntry {
                label: c.label(),
                n: c.length(),
                p,
            })
            .collect(),
        lambda,
        rate: eval.rate,
        threshold: eval.threshold,
        stability_bound: eval.stability_bound,
        delta_e_db: eval.delta_e_db,
        trajectory,
    })
}

/// Three distinct indices in `0..size`, all different from `exclude`.
fn distinct_others(rng: &mut ChaCha8Rng, size: usize, exclude: usize) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    let mut count = 0;
    while count < 3 {
        let r = rng.random_range(0..size);
        if r != exclude && !picked[..count].contains(&r) {
            picked[count] = r;
            count += 1;
        }
    }
    picked
}
