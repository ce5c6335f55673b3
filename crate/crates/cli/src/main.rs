//! `csa`: command-line front end for coded slotted ALOHA analysis,
//! simulation and design.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csa_core::capacity::capacity_bound;
use csa_core::de::{self, DEFAULT_THRESHOLD_TOLERANCE};
use csa_core::ensemble::{
    enumerate_random_ensemble, exact_enumeration_feasible, sample_random_ensemble,
};
use csa_core::optimizer::{optimize, DesignProblem};
use csa_core::sim::campaign::{run_campaign, CampaignConfig};
use csa_core::{ComponentDistribution, DistributionConfig};
use serde::Deserialize;
use serde_json::json;

use output::{config_hash, sig6, to_json, Csv, Sink};

#[derive(Parser)]
#[command(
    name = "csa",
    version,
    about = "Coded slotted ALOHA analysis, simulation and design"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Write outputs (and a metadata sidecar) to this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Bisection tolerance on the load.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic threshold of a distribution.
    Threshold {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stability bound of a distribution.
    Stability {
        #[arg(long)]
        config: PathBuf,
        /// Also report the numerical slope of the composed EXIT map at this load.
        #[arg(long)]
        load: Option<f64>,
    },
    /// Capacity bound over a grid of rates.
    Bound {
        /// JSON list of rates, or an object with a `rates` list.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated rates; fractions such as 1/3 are accepted.
        #[arg(long, conflicts_with = "config")]
        rates: Option<String>,
    },
    /// EXIT chart of a distribution at one load.
    ExitChart {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        load: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Monte Carlo campaign.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distribution design by differential evolution.
    Optimize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Random-code ensemble expectations.
    Ensemble {
        /// JSON object {"n", "k", "samples"?} as an alternative to the flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "config")]
        k: Option<usize>,
        /// Sample this many matrices instead of enumerating.
        #[arg(long)]
        samples: Option<u64>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<csa_core::Error> for CliError {
    fn from(e: csa_core::Error) -> Self {
        use csa_core::Error as E;
        match e {
            E::RejectionLimit(_) | E::InconsistentPayload(_) => Self::Numeric(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Prefixes configuration errors with the file they came from.
fn in_file<T>(path: &Path, result: std::result::Result<T, csa_core::Error>) -> Result<T> {
    result.map_err(|e| match CliError::from(e) {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn load_distribution(path: &Path, text: &str) -> Result<ComponentDistribution> {
    let config = in_file(path, DistributionConfig::parse(text))?;
    in_file(path, ComponentDistribution::from_config(&config))
}

fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    to_json(value).map_err(|e| CliError::Numeric(e.to_string()))
}

fn tolerance(common: &Common) -> Result<f64> {
    let t = common.tolerance.unwrap_or(DEFAULT_THRESHOLD_TOLERANCE);
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(CliError::Config(format!(
            "tolerance {t} must lie in (0, 1)"
        )))
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

fn parse_rate(token: &str) -> Result<f64> {
    let token = token.trim();
    let bad = || CliError::Config(format!("cannot parse rate {token:?}"));
    match token.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            );
            Ok(a / b)
        }
        None => token.parse().map_err(|_| bad()),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateGrid {
    List(Vec<f64>),
    Object { rates: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleRequest {
    n: usize,
    k: usize,
    #[serde(default)]
    samples: Option<u64>,
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let mut sink = Sink::new(common.out.as_deref())?;
    match cli.command {
        Command::Threshold { config } => {
            let text = read(&config)?;
            let dist = load_distribution(&config, &text)?;
            let tol = tolerance(common)?;
            let hash = config_hash(&[&text, &tol.to_string()]);
            let result = de::threshold(&dist, tol)?;
            let mut record = json!(result);
            record["rate"] = json!(dist.rate());
            sink.emit("threshold.json", &json_text(&record)?)?;
            sink.meta("threshold", &hash, &["threshold.json"])?;
        }
        Command::Stability { config, load } => {
            let text = read(&config)?;
            let dist = load_distribution(&config, &text)?;
            let hash = config_hash(&[&text, &format!("{load:?}")]);
            let mut record = json!({
                "rate": dist.rate(),
                "weight2_mass": de::weight2_mass(&dist),
                "min_distance": dist.iter().map(|(c, _)| c.min_distance()).min(),
                "stability_bound": de::stability_bound(&dist),
            });
            if let Some(g) = load {
                record["load"] = json!(g);
                record["derivative_at_zero"] = json!(de::stability_derivative_check(&dist, g)?);
                record["derivative_expected"] = json!(de::stability_derivative(&dist, g));
            }
            sink.emit("stability.json", &json_text(&record)?)?;
            sink.meta("stability", &hash, &["stability.json"])?;
        }
        Command::Bound { config, rates } => {
            let (rates, source) = match (config, rates) {
                (Some(path), _) => {
                    let text = read(&path)?;
                    let grid: RateGrid = serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("rate grid: {e}")))?;
                    let rates = match grid {
                        RateGrid::List(r) | RateGrid::Object { rates: r } => r,
                    };
                    (rates, text)
                }
                (None, Some(list)) => (
                    list.split(',')
                        .map(parse_rate)
                        .collect::<Result<Vec<_>>>()?,
                    list,
                ),
                (None, None) => {
                    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
                    (grid, String::new())
                }
            };
            let hash = config_hash(&[&source]);
            let mut csv = Csv::new(&hash, &["R", "G", "error"]);
            let mut failures = Vec::new();
            for &r in &rates {
                match capacity_bound(r) {
                    Ok(g) => csv.row(&[sig6(r), sig6(g), String::new()]),
                    Err(e) => {
                        csv.row(&[sig6(r), String::new(), e.to_string()]);
                        failures.push(format!("R = {r}: {e}"));
                    }
                }
            }
            sink.emit("bound.csv", &csv.into_string())?;
            sink.meta("bound", &hash, &["bound.csv"])?;
            if !failures.is_empty() {
                return Err(CliError::Config(failures.join("; ")));
            }
        }
        Command::ExitChart {
            config,
            load,
            samples,
        } => {
            let text = read(&config)?;
            let dist = load_distribution(&config, &text)?;
            let hash = config_hash(&[&text, &load.to_string(), &samples.to_string()]);
            let chart = de::exit_chart(&dist, load, samples)?;
            let mut csv = Csv::new(&hash, &["p", "f_b", "f_s_inv"]);
            for row in &chart.rows {
                csv.row(&[sig6(row.p), sig6(row.f_b), sig6(row.f_s_inv)]);
            }
            let summary = json!({
                "load": chart.load,
                "rate": chart.rate,
                "area_burst": chart.area_burst,
                "area_slice": chart.area_slice,
                "tunnel_open": de::tunnel_open(&dist, load, samples)?,
            });
            sink.emit("exit_chart.csv", &csv.into_string())?;
            sink.emit("exit_chart.json", &json_text(&summary)?)?;
            sink.meta("exit-chart", &hash, &["exit_chart.csv", "exit_chart.json"])?;
        }
        Command::Simulate { config } => {
            let text = read(&config)?;
            let mut campaign = in_file(&config, CampaignConfig::parse(&text))?;
            if let Some(seed) = common.seed {
                campaign.seed = seed;
            }
            let hash = config_hash(&[&text, &campaign.seed.to_string()]);
            let report = run_campaign(&campaign, common.workers)?;
            let mut csv = Csv::new(
                &hash,
                &[
                    "decoder",
                    "load",
                    "S",
                    "PLR",
                    "ci_half",
                    "iters_mean",
                    "frames",
                ],
            );
            for p in &report.points {
                let decoder = serde_json::to_value(p.decoder)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from));
                csv.row(&[
                    decoder.unwrap_or_default(),
                    sig6(p.load),
                    sig6(p.throughput),
                    sig6(p.packet_loss_rate),
                    sig6(p.ci_half),
                    sig6(p.iters_mean),
                    p.frames.to_string(),
                ]);
            }
            sink.emit("simulate.csv", &csv.into_string())?;
            sink.emit("simulate.json", &json_text(&report)?)?;
            sink.meta("simulate", &hash, &["simulate.csv", "simulate.json"])?;
        }
        Command::Optimize { config } => {
            let text = read(&config)?;
            let mut problem = in_file(&config, DesignProblem::parse(&text))?;
            if let Some(seed) = common.seed {
                problem.hyperparameters.seed = seed;
            }
            if common.tolerance.is_some() {
                problem.tolerance = tolerance(common)?;
            }
            let hash = config_hash(&[
                &text,
                &problem.hyperparameters.seed.to_string(),
                &problem.tolerance.to_string(),
            ]);
            let result = pool(common.workers)?.install(|| optimize(&problem))?;
            let mut csv = Csv::new(&hash, &["generation", "best_threshold"]);
            for (g, t) in result.trajectory.iter().enumerate() {
                csv.row(&[g.to_string(), sig6(*t)]);
            }
            sink.emit("optimize.json", &json_text(&result)?)?;
            sink.emit("trajectory.csv", &csv.into_string())?;
            sink.meta("optimize", &hash, &["optimize.json", "trajectory.csv"])?;
        }
        Command::Ensemble {
            config,
            n,
            k,
            samples,
        } => {
            let (request, source) = match config {
                Some(path) => {
                    let text = read(&path)?;
                    let request: EnsembleRequest = serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("ensemble request: {e}")))?;
                    (request, text)
                }
                None => {
                    let request = EnsembleRequest {
                        n: n.unwrap_or_default(),
                        k: k.unwrap_or_default(),
                        samples,
                    };
                    (request, String::new())
                }
            };
            let samples = samples.or(request.samples);
            let seed = common.seed.unwrap_or(0);
            let hash = config_hash(&[
                &source,
                &format!("{}/{}/{samples:?}/{seed}", request.n, request.k),
            ]);
            let expectation = pool(common.workers)?.install(|| match samples {
                Some(s) => sample_random_ensemble(request.n, request.k, s, seed),
                None if exact_enumeration_feasible(request.n, request.k) => {
                    enumerate_random_ensemble(request.n, request.k)
                }
                None => Err(csa_core::Error::SizeLimit(format!(
                    "({}, {}) is too large to enumerate; pass --samples",
                    request.n, request.k
                ))),
            })?;
            sink.emit("ensemble.json", &json_text(&expectation)?)?;
            sink.meta("ensemble", &hash, &["ensemble.json"])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
