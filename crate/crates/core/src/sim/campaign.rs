//! Monte Carlo campaigns over a grid of loads.
//!
//! Frame `f` of load point `i` draws from the ChaCha stream
//! `(i << 32) | f` of the master seed, and all statistics are reduced from
//! integer counts, so a report depends only on the configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{generate_frame_with, Activation, DEFAULT_PAYLOAD_BYTES};
use super::genie::genie_decode;
use super::sic::{sic_decode, DEFAULT_MAX_ITERATIONS};
use crate::ensemble::{ComponentDistribution, ComponentKind, DistributionConfig};
use crate::error::{Error, Result};

/// Population size of the Bernoulli mode when the configuration omits `N`.
pub const DEFAULT_USERS: u64 = 20_000;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationMode {
    /// Each of `N` users is active with probability `G M / N`.
    Bernoulli,
    /// Exactly `round(G M)` users are active.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderChoice {
    Sic,
    Genie,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Sic,
    Genie,
}

impl DecoderChoice {
    fn decoders(self) -> &'static [Decoder] {
        match self {
            Self::Sic => &[Decoder::Sic],
            Self::Genie => &[Decoder::Genie],
            Self::Both => &[Decoder::Sic, Decoder::Genie],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Slots per frame.
    #[serde(rename = "M")]
    pub slots: usize,
    /// Optional check against the distribution's dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub distribution: DistributionConfig,
    pub mode: ActivationMode,
    /// User population of the Bernoulli mode.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub users: Option<u64>,
    /// Loads `G` (packets per slot) to simulate.
    pub loads: Vec<f64>,
    pub frames_per_point: u64,
    pub decoder: DecoderChoice,
    pub seed: u64,
    #[serde(default = "default_payload_bytes")]
    pub payload_bytes: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_payload_bytes() -> usize {
    DEFAULT_PAYLOAD_BYTES
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl CampaignConfig {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Validates the configuration and builds its distribution.
    pub fn validate(&self) -> Result<ComponentDistribution> {
        if self.slots == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.frames_per_point == 0 {
            return Err(Error::Config("frames_per_point must be at least 1".into()));
        }
        if self.loads.is_empty() {
            return Err(Error::Config("the load grid is empty".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.loads.len() as u64 > u32::MAX as u64 || self.frames_per_point > u32::MAX as u64 {
            return Err(Error::Config("too many load points or frames".into()));
        }
        let dist = ComponentDistribution::from_config(&self.distribution)?;
        if let Some(k) = self.k {
            if k != dist.dimension() {
                return Err(Error::Config(format!(
                    "k = {k} but the distribution has dimension {}",
                    dist.dimension()
                )));
            }
        }
        if self.decoder != DecoderChoice::Sic
            && dist
                .iter()
                .any(|(c, _)| matches!(c.kind(), ComponentKind::Mds))
        {
            return Err(Error::Config(
                "the genie decoder does not support MDS entries".into(),
            ));
        }
        for &load in &self.loads {
            self.activation(load)?;
        }
        Ok(dist)
    }

    fn activation(&self, load: f64) -> Result<Activation> {
        if !(load >= 0.0) || !load.is_finite() {
            return Err(Error::Config(format!(
                "load {load} must be finite and non-negative"
            )));
        }
        let expected = load * self.slots as f64;
        match self.mode {
            ActivationMode::Fixed => Ok(Activation::Fixed {
                active: expected.round() as u64,
            }),
            ActivationMode::Bernoulli => {
                let users = self.users.unwrap_or(DEFAULT_USERS);
                let probability = expected / users as f64;
                if users == 0 || probability > 1.0 {
                    return Err(Error::Config(format!(
                        "load {load} needs {expected} expected users but N = {users}"
                    )));
                }
                Ok(Activation::Bernoulli { probability, users })
            }
        }
    }

    /// The offered load reported for `load`: `G` itself, or `N_a / M` in
    /// fixed mode.
    fn offered(&self, load: f64) -> f64 {
        match self.mode {
            ActivationMode::Bernoulli => load,
            ActivationMode::Fixed => (load * self.slots as f64).round() / self.slots as f64,
        }
    }
}

/// Statistics of one decoder at one load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignPoint {
    pub decoder: Decoder,
    pub load: f64,
    #[serde(rename = "S")]
    pub throughput: f64,
    #[serde(rename = "PLR")]
    pub packet_loss_rate: f64,
    pub ci_half: f64,
    pub iters_mean: f64,
    pub frames: u64,
    pub active: u64,
    pub recovered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    #[serde(rename = "M")]
    pub slots: usize,
    pub rate: f64,
    pub points: Vec<CampaignPoint>,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    frames: u64,
    active: u64,
    recovered: u64,
    recovered_sq: u128,
    iterations: u64,
}

impl Tally {
    fn add(mut self, other: Tally) -> Tally {
        self.frames += other.frames;
        self.active += other.active;
        self.recovered += other.recovered;
        self.recovered_sq += other.recovered_sq;
        self.iterations += other.iterations;
        self
    }
}

/// Runs every load point; `workers` bounds the thread pool (default: all cores).
pub fn run_campaign(config: &CampaignConfig, workers: Option<usize>) -> Result<CampaignReport> {
    let dist = config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let decoders = config.decoder.decoders();
    let mut points = Vec::new();
    for (index, &load) in config.loads.iter().enumerate() {
        let activation = config.activation(load)?;
        let tallies = pool.install(|| {
            (0..config.frames_per_point)
                .into_par_iter()
                .map(|frame| {
                    simulate_frame(config, &dist, activation, index as u64, frame, decoders)
                })
                .try_reduce(
                    || vec![Tally::default(); decoders.len()],
                    |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.add(y)).collect()),
                )
        })?;
        for (&decoder, tally) in decoders.iter().zip(tallies) {
            points.push(summarize(
                decoder,
                config.offered(load),
                config.slots,
                tally,
            ));
        }
    }
    Ok(CampaignReport {
        slots: config.slots,
        rate: dist.rate(),
        points,
    })
}

fn simulate_frame(
    config: &CampaignConfig,
    dist: &ComponentDistribution,
    activation: Activation,
    point: u64,
    frame: u64,
    decoders: &[Decoder],
) -> Result<Vec<Tally>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream((point << 32) | frame);
    let graph = generate_frame_with(
        config.slots,
        dist,
        activation,
        config.payload_bytes,
        &mut rng,
    )?;
    decoders
        .iter()
        .map(|decoder| {
            let outcome = match decoder {
                Decoder::Sic => sic_decode(&graph, config.max_iterations),
                Decoder::Genie => genie_decode(&graph)?,
            };
            let recovered = outcome.recovered_count() as u64;
            Ok(Tally {
                frames: 1,
                active: graph.bursts().len() as u64,
                recovered,
                recovered_sq: recovered as u128 * recovered as u128,
                iterations: outcome.iterations as u64,
            })
        })
        .collect()
}

fn summarize(decoder: Decoder, load: f64, slots: usize, t: Tally) -> CampaignPoint {
    let frames = t.frames as f64;
    let m = slots as f64;
    let mean = t.recovered as f64 / frames;
    let variance = if t.frames > 1 {
        ((t.recovered_sq as f64 - frames * mean * mean) / (frames - 1.0)).max(0.0)
    } else {
        0.0
    };
    CampaignPoint {
        decoder,
        load,
        throughput: mean / m,
        packet_loss_rate: if t.active == 0 {
            0.0
        } else {
            1.0 - t.recovered as f64 / t.active as f64
        },
        ci_half: Z_95 * variance.sqrt() / m / frames.sqrt(),
        iters_mean: t.iterations as f64 / frames,
        frames: t.frames,
        active: t.active,
        recovered: t.recovered,
    }
}
