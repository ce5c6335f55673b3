//! Component-code sets with selection probabilities, and random-code ensemble
//! expectations.
//!
//! A distribution pairs component codes (explicit binary generators,
//! repetition codes, MDS codes modelled through bounded-distance decoding, or
//! random-code ensembles) with their selection probabilities. All entries
//! share the information dimension `k`.
//!
//! Random-code ensembles average over all `k x n` binary matrices of rank `k`
//! without all-zero columns and with minimum distance at least 2, uniformly
//! over matrices. Both averaged quantities (information functions and the
//! number of weight-2 codewords) depend on a matrix only through the multiset
//! of its columns, so exact enumeration walks column-type compositions and
//! weights each by its multinomial count of matrices.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{binomial, information_functions_of_types, BinaryLinearCode, ExitCoefficients};
use crate::error::{Error, Result};

/// Probabilities must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Upper bound on `compositions * 2^(distinct types)` for exact enumeration.
pub const ENUMERATION_WORK_LIMIT: u128 = 2_000_000_000;

/// Samples used when a random entry cannot be enumerated exactly and the
/// configuration does not say otherwise.
pub const DEFAULT_SAMPLES: u64 = 100_000;

/// Consecutive rejected draws tolerated by [`sample_random_ensemble`].
pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub enum ComponentKind {
    Explicit(Arc<BinaryLinearCode>),
    Repetition(Arc<BinaryLinearCode>),
    Random(Arc<EnsembleExpectation>),
    Mds,
}

/// One admissible component code with the quantities the analysis needs.
#[derive(Debug, Clone)]
pub struct Component {
    kind: ComponentKind,
    n: usize,
    k: usize,
    exit: ExitCoefficients,
    weight2: f64,
    min_distance: usize,
}

impl Component {
    pub fn explicit(code: BinaryLinearCode) -> Result<Self> {
        code.check_admissible()?;
        let exit = code.exit_coefficients()?;
        Ok(Self {
            n: code.length(),
            k: code.dimension(),
            weight2: code.weight_enumerator()?.weight2() as f64,
            min_distance: code.min_distance()?,
            exit,
            kind: ComponentKind::Explicit(Arc::new(code)),
        })
    }

    pub fn repetition(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Inadmissible(format!(
                "repetition length {n} has minimum distance below 2"
            )));
        }
        let code = BinaryLinearCode::repetition(n)?;
        Ok(Self {
            n,
            k: 1,
            exit: code.exit_coefficients()?,
            weight2: if n == 2 { 1.0 } else { 0.0 },
            min_distance: n,
            kind: ComponentKind::Repetition(Arc::new(code)),
        })
    }

    /// An `(n, k)` MDS code under bounded-distance decoding.
    ///
    /// Its weight-2 term is the one matching the slope at zero of the
    /// bounded-distance EXIT function: `C(n, 2)` when `n = k + 1`, else 0.
    pub fn mds(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n || n > 64 {
            return Err(Error::Inadmissible(format!(
                "invalid MDS parameters ({n}, {k})"
            )));
        }
        Ok(Self {
            n,
            k,
            exit: ExitCoefficients::mds(n, k),
            weight2: if n == k + 1 {
                binomial(n, 2) as f64
            } else {
                0.0
            },
            min_distance: n - k + 1,
            kind: ComponentKind::Mds,
        })
    }

    pub fn random(expectation: Arc<EnsembleExpectation>) -> Self {
        let weight2 = expectation.expected_weight2;
        Self {
            n: expectation.n,
            k: expectation.k,
            exit: expectation.exit_coefficients(),
            weight2,
            min_distance: if weight2 > 0.0 { 2 } else { 3 },
            kind: ComponentKind::Random(expectation),
        }
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn length(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.k
    }

    pub fn exit(&self) -> &ExitCoefficients {
        &self.exit
    }

    /// Number (or expected number) of weight-2 codewords.
    pub fn weight2(&self) -> f64 {
        self.weight2
    }

    /// Minimum distance; for random ensembles 2 when weight-2 words occur.
    pub fn min_distance(&self) -> usize {
        self.min_distance
    }

    pub fn is_repetition(&self) -> bool {
        matches!(self.kind, ComponentKind::Repetition(_))
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ComponentKind::Explicit(c) => format!("explicit({})", c.generator().to_text()),
            ComponentKind::Repetition(_) => format!("rep({})", self.n),
            ComponentKind::Random(_) => format!("random({},{})", self.n, self.k),
            ComponentKind::Mds => format!("mds({},{})", self.n, self.k),
        }
    }
}

/// A probability mass function over component codes of common dimension.
#[derive(Debug, Clone)]
pub struct ComponentDistribution {
    components: Vec<Arc<Component>>,
    probabilities: Vec<f64>,
    k: usize,
    mean_length: f64,
    edge_fractions: Vec<f64>,
}

impl ComponentDistribution {
    pub fn new(entries: Vec<(Arc<Component>, f64)>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidDistribution("no entries".into()));
        };
        let k = first.0.dimension();
        if let Some((c, _)) = entries.iter().find(|(c, _)| c.dimension() != k) {
            return Err(Error::InvalidDistribution(format!(
                "mixed dimensions: {} has k = {}, expected {k}",
                c.label(),
                c.dimension()
            )));
        }
        if let Some((c, p)) = entries.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} of {} outside [0, 1]",
                c.label()
            )));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let (components, probabilities): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let mean_length = components
            .iter()
            .zip(&probabilities)
            .map(|(c, p)| p * c.length() as f64)
            .sum::<f64>();
        let edge_fractions = components
            .iter()
            .zip(&probabilities)
            .map(|(c, p)| p * c.length() as f64 / mean_length)
            .collect();
        Ok(Self {
            components,
            probabilities,
            k,
            mean_length,
            edge_fractions,
        })
    }

    pub fn from_config(config: &DistributionConfig) -> Result<Self> {
        let entries = config
            .entries()
            .iter()
            .map(|e| Ok((Arc::new(e.component.build()?), e.p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn components(&self) -> &[Arc<Component>] {
        &self.components
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Component, f64)> {
        self.components
            .iter()
            .map(AsRef::as_ref)
            .zip(self.probabilities.iter().copied())
    }

    pub fn dimension(&self) -> usize {
        self.k
    }

    /// Expected component length.
    pub fn mean_length(&self) -> f64 {
        self.mean_length
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.mean_length
    }

    /// Probability that an edge belongs to each entry.
    pub fn edge_fractions(&self) -> &[f64] {
        &self.edge_fractions
    }

    /// Energy increment over plain slotted ALOHA, in dB.
    pub fn energy_increment_db(&self) -> f64 {
        -10.0 * self.rate().log10()
    }

    /// Expected number of weight-2 codewords over entries of minimum
    /// distance 2 (zero when every entry has distance at least 3).
    pub fn expected_weight2(&self) -> f64 {
        self.iter()
            .filter(|(c, p)| *p > 0.0 && c.min_distance() == 2)
            .map(|(c, p)| p * c.weight2())
            .sum()
    }

    pub fn is_repetition_only(&self) -> bool {
        self.components.iter().all(|c| c.is_repetition())
    }
}

/// Serialized component description (the `type` tag selects the variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ComponentConfig {
    Explicit {
        #[serde(rename = "G")]
        generator: String,
    },
    Random {
        n: usize,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Mds {
        n: usize,
        k: usize,
    },
    Rep {
        n: usize,
    },
}

impl ComponentConfig {
    pub fn build(&self) -> Result<Component> {
        match self {
            Self::Explicit { generator } => {
                Component::explicit(BinaryLinearCode::parse(generator)?)
            }
            Self::Rep { n } => Component::repetition(*n),
            Self::Mds { n, k } => Component::mds(*n, *k),
            Self::Random {
                n,
                k,
                samples,
                seed,
            } => {
                let expectation = match samples {
                    None if exact_enumeration_feasible(*n, *k) => cached_enumeration(*n, *k)?,
                    _ => Arc::new(sample_random_ensemble(
                        *n,
                        *k,
                        samples.unwrap_or(DEFAULT_SAMPLES),
                        seed.unwrap_or(0),
                    )?),
                };
                Ok(Component::random(expectation))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryConfig {
    #[serde(flatten)]
    pub component: ComponentConfig,
    pub p: f64,
}

/// Distribution document: either `{"entries": [...]}` or a bare entry array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionConfig {
    Document { entries: Vec<EntryConfig> },
    List(Vec<EntryConfig>),
}

impl DistributionConfig {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn entries(&self) -> &[EntryConfig] {
        match self {
            Self::Document { entries } | Self::List(entries) => entries,
        }
    }
}

/// Averages over the random-code ensemble of `(n, k)` generator matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleExpectation {
    pub n: usize,
    pub k: usize,
    /// `E[e_g]` for `g = 0..=n`.
    pub expected_information: Vec<f64>,
    pub expected_weight2: f64,
    /// Number of admissible matrices (exact) or accepted samples.
    #[serde(serialize_with = "serialize_count")]
    pub members: u128,
    pub exact: bool,
    /// Standard errors of the sampled estimates; absent when exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub information_std_err: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight2_std_err: Option<f64>,
    #[serde(skip)]
    information_sums: Option<Vec<u128>>,
}

/// JSON numbers stop at 64 bits; larger counts are written as floats.
fn serialize_count<S: serde::Serializer>(
    count: &u128,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    match u64::try_from(*count) {
        Ok(c) => serializer.serialize_u64(c),
        Err(_) => serializer.serialize_f64(*count as f64),
    }
}

impl EnsembleExpectation {
    /// EXIT coefficients; computed from exact integer sums when available.
    pub fn exit_coefficients(&self) -> ExitCoefficients {
        match &self.information_sums {
            Some(sums) => {
                let n = self.n;
                let scale = self.members as f64 * n as f64;
                let terms = (0..n)
                    .filter_map(|t| {
                        let a = (n - t) as i128 * sums[n - t] as i128
                            - (t + 1) as i128 * sums[n - 1 - t] as i128;
                        (a != 0).then(|| (t, a as f64 / scale))
                    })
                    .collect();
                ExitCoefficients::from_terms(n, terms)
            }
            None => ExitCoefficients::from_expected(&self.expected_information),
        }
    }
}

/// Whether [`enumerate_random_ensemble`] accepts `(n, k)`.
pub fn exact_enumeration_feasible(n: usize, k: usize) -> bool {
    enumeration_work(n, k).is_some_and(|w| w <= ENUMERATION_WORK_LIMIT)
}

fn enumeration_work(n: usize, k: usize) -> Option<u128> {
    if k == 0 || k >= n || k > 6 || n > 64 {
        return None;
    }
    let types = (1usize << k) - 1;
    let compositions = binomial(n + types - 1, types - 1);
    compositions.checked_mul(1u128 << types.min(n))
}

fn validate_shape(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n || n > 64 {
        return Err(Error::Domain(format!(
            "random ensemble needs 0 < k < n <= 64, got ({n}, {k})"
        )));
    }
    Ok(())
}

/// Properties of the code spanned by a column-type multiset.
struct TypeStats {
    info: Vec<u128>,
    weight2: u64,
}

/// Rank `k`, and every column lies in the span of the others (a column
/// independent of the rest would give a weight-1 codeword).
fn is_admissible(k: usize, present: &[(u64, usize)]) -> bool {
    if crate::gf2::rank_of(present.iter().map(|(t, _)| *t)) != k {
        return false;
    }
    present.iter().enumerate().all(|(i, &(_, count))| {
        count > 1
            || crate::gf2::rank_of(
                present
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, (v, _))| *v),
            ) == k
    })
}

/// Returns `None` when the multiset does not describe an admissible code.
fn admissible_type_stats(k: usize, present: &[(u64, usize)]) -> Option<TypeStats> {
    if !is_admissible(k, present) {
        return None;
    }
    let weight2 = (1u64..(1u64 << k))
        .filter(|&y| {
            present
                .iter()
                .filter(|(t, _)| (y & t).count_ones() % 2 == 1)
                .map(|(_, c)| c)
                .sum::<usize>()
                == 2
        })
        .count() as u64;
    let info = information_functions_of_types(k, present).values;
    Some(TypeStats { info, weight2 })
}

#[derive(Default)]
struct Sums {
    count: u128,
    info: Vec<u128>,
    weight2: u128,
}

impl Sums {
    fn merge(mut self, other: Sums) -> Sums {
        self.count += other.count;
        self.weight2 += other.weight2;
        if self.info.is_empty() {
            self.info = other.info;
        } else {
            for (a, b) in self.info.iter_mut().zip(other.info) {
                *a += b;
            }
        }
        self
    }
}

/// Exact ensemble expectations by enumerating column-type compositions.
pub fn enumerate_random_ensemble(n: usize, k: usize) -> Result<EnsembleExpectation> {
    validate_shape(n, k)?;
    match enumeration_work(n, k) {
        Some(w) if w <= ENUMERATION_WORK_LIMIT => {}
        _ => {
            return Err(Error::SizeLimit(format!(
                "({n}, {k}) ensemble is too large to enumerate; sample it instead"
            )))
        }
    }
    let types = (1usize << k) - 1;
    // Parallelize over the count of the first column type.
    let sums = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut counts = vec![0usize; types];
            counts[0] = first;
            let mut sums = Sums {
                info: vec![0; n + 1],
                ..Sums::default()
            };
            let weight = binomial(n, first);
            walk_compositions(k, &mut counts, 1, n - first, weight, &mut sums);
            sums
        })
        .reduce(Sums::default, Sums::merge);
    if sums.count == 0 {
        return Err(Error::Domain(format!("no admissible ({n}, {k}) matrices")));
    }
    let count = sums.count as f64;
    Ok(EnsembleExpectation {
        n,
        k,
        expected_information: sums.info.iter().map(|&s| s as f64 / count).collect(),
        expected_weight2: sums.weight2 as f64 / count,
        members: sums.count,
        exact: true,
        information_std_err: None,
        weight2_std_err: None,
        information_sums: Some(sums.info),
    })
}

/// Recursively assigns counts to column types `index..`, `weight` being the
/// number of matrices with the counts fixed so far.
fn walk_compositions(
    k: usize,
    counts: &mut [usize],
    index: usize,
    remaining: usize,
    weight: u128,
    sums: &mut Sums,
) {
    if index + 1 >= counts.len() {
        match counts.get_mut(index) {
            Some(last) => *last = remaining,
            None if remaining > 0 => return,
            None => {}
        }
        let present: Vec<(u64, usize)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(t, &c)| (t as u64 + 1, c))
            .collect();
        if let Some(stats) = admissible_type_stats(k, &present) {
            sums.count += weight;
            sums.weight2 += weight * stats.weight2 as u128;
            for (acc, e) in sums.info.iter_mut().zip(&stats.info) {
                *acc += weight * e;
            }
        }
        return;
    }
    for c in 0..=remaining {
        counts[index] = c;
        let w = weight * binomial(remaining, c);
        walk_compositions(k, counts, index + 1, remaining - c, w, sums);
    }
}

type EnumerationCache = Mutex<HashMap<(usize, usize), Arc<EnsembleExpectation>>>;

fn cached_enumeration(n: usize, k: usize) -> Result<Arc<EnsembleExpectation>> {
    static CACHE: OnceLock<EnumerationCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("cache poisoned").get(&(n, k)) {
        return Ok(hit.clone());
    }
    let computed = Arc::new(enumerate_random_ensemble(n, k)?);
    cache
        .lock()
        .expect("cache poisoned")
        .insert((n, k), computed.clone());
    Ok(computed)
}

/// Monte Carlo ensemble expectations by rejection sampling uniform matrices.
pub fn sample_random_ensemble(
    n: usize,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<EnsembleExpectation> {
    validate_shape(n, k)?;
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = (1u64 << k) - 1;
    let mut mean = vec![0.0f64; n + 1];
    let mut m2 = vec![0.0f64; n + 1];
    let (mut w_mean, mut w_m2) = (0.0f64, 0.0f64);
    let mut accepted = 0u64;
    let mut rejected_in_row = 0u64;
    let mut columns = vec![0u64; n];
    while accepted < samples {
        for c in columns.iter_mut() {
            *c = rng.random::<u64>() & mask;
        }
        let stats = if columns.contains(&0) {
            None
        } else {
            admissible_type_stats(k, &group_columns(&columns))
        };
        let Some(stats) = stats else {
            rejected_in_row += 1;
            if rejected_in_row >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::RejectionLimit(rejected_in_row));
            }
            continue;
        };
        rejected_in_row = 0;
        accepted += 1;
        let a = accepted as f64;
        for (g, &e) in stats.info.iter().enumerate() {
            let x = e as f64;
            let delta = x - mean[g];
            mean[g] += delta / a;
            m2[g] += delta * (x - mean[g]);
        }
        let x = stats.weight2 as f64;
        let delta = x - w_mean;
        w_mean += delta / a;
        w_m2 += delta * (x - w_mean);
    }
    let s = samples as f64;
    let std_err = |m2: f64| {
        if samples > 1 {
            (m2 / (s - 1.0)).sqrt() / s.sqrt()
        } else {
            f64::INFINITY
        }
    };
    Ok(EnsembleExpectation {
        n,
        k,
        expected_information: mean,
        expected_weight2: w_mean,
        members: samples as u128,
        exact: false,
        information_std_err: Some(m2.iter().map(|&v| std_err(v)).collect()),
        weight2_std_err: Some(std_err(w_m2)),
        information_sums: None,
    })
}

fn group_columns(columns: &[u64]) -> Vec<(u64, usize)> {
    let mut types: Vec<(u64, usize)> = Vec::new();
    for &c in columns {
        match types.iter_mut().find(|(t, _)| *t == c) {
            Some((_, count)) => *count += 1,
            None => types.push((c, 1)),
        }
    }
    types
}

/// Draws one admissible generator matrix uniformly from the `(n, k)` ensemble.
pub fn draw_admissible_code<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<BinaryLinearCode> {
    validate_shape(n, k)?;
    let mask = (1u64 << k) - 1;
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        let columns: Vec<u64> = (0..n).map(|_| rng.random::<u64>() & mask).collect();
        if columns.contains(&0) || !is_admissible(k, &group_columns(&columns)) {
            continue;
        }
        let rows = (0..k)
            .map(|i| {
                columns
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, c)| acc | ((c >> i) & 1) << j)
            })
            .collect();
        return BinaryLinearCode::new(crate::gf2::BitMatrix::from_rows(rows, n)?);
    }
    Err(Error::RejectionLimit(MAX_CONSECUTIVE_REJECTIONS))
}
