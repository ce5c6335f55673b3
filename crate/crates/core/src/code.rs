//! Binary linear component codes and their erasure-decoding characteristics.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, XorBasis};

/// Largest dimension accepted by [`BinaryLinearCode::weight_enumerator`].
pub const MAX_ENUMERATION_DIMENSION: usize = 24;

/// Largest number of distinct columns handled by the grouped computation of
/// information functions.
const MAX_DISTINCT_COLUMNS: usize = 20;

/// Codes longer than this with too many distinct columns are rejected instead
/// of falling back to plain subset enumeration.
const MAX_SUBSET_ENUMERATION_LENGTH: usize = 22;

/// An `(n, k)` binary linear code given by a full-rank generator matrix
/// without all-zero columns.
#[derive(Debug, Clone)]
pub struct BinaryLinearCode {
    generator: BitMatrix,
    columns: Vec<u64>,
    info: OnceLock<InformationFunctions>,
    weights: OnceLock<WeightEnumerator>,
}

impl PartialEq for BinaryLinearCode {
    fn eq(&self, other: &Self) -> bool {
        self.generator == other.generator
    }
}

impl BinaryLinearCode {
    pub fn new(generator: BitMatrix) -> Result<Self> {
        let k = generator.row_count();
        let n = generator.col_count();
        if k > 64 {
            return Err(Error::InvalidMatrix(format!("{k} rows exceed 64")));
        }
        if generator.rank() != k {
            return Err(Error::InvalidMatrix(format!(
                "generator rank {} is below its {k} rows",
                generator.rank()
            )));
        }
        let columns: Vec<u64> = (0..n).map(|j| generator.column(j)).collect();
        if let Some(j) = columns.iter().position(|&c| c == 0) {
            return Err(Error::InvalidMatrix(format!(
                "column {j} is all-zero (idle symbol)"
            )));
        }
        Ok(Self {
            generator,
            columns,
            info: OnceLock::new(),
            weights: OnceLock::new(),
        })
    }

    /// Parses a generator in the `"1100,0111"` text format.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(BitMatrix::parse(text)?)
    }

    /// The `(n, 1)` repetition code.
    pub fn repetition(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidMatrix(format!(
                "repetition length {n} out of range"
            )));
        }
        Self::new(BitMatrix::from_rows(vec![crate::gf2::column_mask(n)], n)?)
    }

    /// The `(k + 1, k)` single parity-check code in systematic form.
    pub fn single_parity_check(k: usize) -> Result<Self> {
        if k == 0 || k >= 64 {
            return Err(Error::InvalidMatrix(format!(
                "SPC dimension {k} out of range"
            )));
        }
        let rows = (0..k).map(|i| (1u64 << i) | (1u64 << k)).collect();
        Self::new(BitMatrix::from_rows(rows, k + 1)?)
    }

    pub fn length(&self) -> usize {
        self.generator.col_count()
    }

    pub fn dimension(&self) -> usize {
        self.generator.row_count()
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    /// Columns as row-index masks.
    pub fn columns(&self) -> &[u64] {
        &self.columns
    }

    pub fn information_functions(&self) -> Result<&InformationFunctions> {
        if let Some(info) = self.info.get() {
            return Ok(info);
        }
        let computed = information_functions_of_columns(self.dimension(), &self.columns)?;
        Ok(self.info.get_or_init(|| computed))
    }

    pub fn weight_enumerator(&self) -> Result<&WeightEnumerator> {
        if let Some(w) = self.weights.get() {
            return Ok(w);
        }
        let k = self.dimension();
        if k > MAX_ENUMERATION_DIMENSION {
            return Err(Error::DimensionTooLarge {
                k,
                limit: MAX_ENUMERATION_DIMENSION,
            });
        }
        let rows = self.generator.rows();
        let mut counts = vec![0u64; self.length() + 1];
        let mut word = 0u64;
        counts[0] = 1;
        // Gray-code walk over all 2^k messages.
        for step in 1u64..(1u64 << k) {
            word ^= rows[step.trailing_zeros() as usize];
            counts[word.count_ones() as usize] += 1;
        }
        Ok(self.weights.get_or_init(|| WeightEnumerator { counts }))
    }

    pub fn min_distance(&self) -> Result<usize> {
        Ok(self.weight_enumerator()?.min_distance())
    }

    /// Checks the conditions for use as a component code: `d_min >= 2`.
    pub fn check_admissible(&self) -> Result<()> {
        let d = self.min_distance()?;
        if d < 2 {
            return Err(Error::Inadmissible(format!(
                "minimum distance {d} < 2 for generator {}",
                self.generator.to_text()
            )));
        }
        Ok(())
    }

    /// Encodes `k` equal-length information segments into `n` segments.
    pub fn encode(&self, info: &[Vec<u8>]) -> Vec<Vec<u8>> {
        assert_eq!(
            info.len(),
            self.dimension(),
            "one payload per information segment"
        );
        let len = info.first().map_or(0, Vec::len);
        self.columns
            .iter()
            .map(|&col| {
                let mut out = vec![0u8; len];
                for (i, seg) in info.iter().enumerate() {
                    if (col >> i) & 1 == 1 {
                        xor_into(&mut out, seg);
                    }
                }
                out
            })
            .collect()
    }

    /// MAP erasure decoding over opaque payloads.
    ///
    /// `known` lists `(position, payload)` pairs. Returns every erased position
    /// whose generator column lies in the span of the known columns, together
    /// with its payload (XOR of the known payloads in its representation).
    pub fn map_erasure_decode(&self, known: &[(usize, &[u8])]) -> Result<Vec<(usize, Vec<u8>)>> {
        let n = self.length();
        let mut seen = 0u64;
        for &(pos, _) in known {
            if pos >= n {
                return Err(Error::Domain(format!("position {pos} outside 0..{n}")));
            }
            if seen >> pos & 1 == 1 {
                return Err(Error::Domain(format!("position {pos} listed twice")));
            }
            seen |= 1 << pos;
        }
        let len = known.first().map_or(0, |(_, p)| p.len());
        if known.iter().any(|(_, p)| p.len() != len) {
            return Err(Error::Domain("known payloads differ in length".into()));
        }

        let mut basis = XorBasis::default();
        let mut payload_of = vec![None; n];
        for &(pos, payload) in known {
            payload_of[pos] = Some(payload);
            let col = self.columns[pos];
            if !basis.insert_tagged(col, 1 << pos) {
                let tag = basis.represent(col).expect("dependent column is in span");
                if combine(tag, &payload_of, len) != payload {
                    return Err(Error::InconsistentPayload(pos));
                }
            }
        }

        let mut recovered = Vec::new();
        for j in 0..n {
            if seen >> j & 1 == 1 {
                continue;
            }
            if let Some(tag) = basis.represent(self.columns[j]) {
                recovered.push((j, combine(tag, &payload_of, len)));
            }
        }
        Ok(recovered)
    }

    /// Solves for the `k` information segments when the known columns have
    /// full rank. Payloads are assumed consistent.
    pub fn solve_information(&self, known: &[(usize, &[u8])]) -> Option<Vec<Vec<u8>>> {
        let n = self.length();
        let len = known.first().map_or(0, |(_, p)| p.len());
        let mut basis = XorBasis::default();
        let mut payload_of = vec![None; n];
        for &(pos, payload) in known {
            payload_of[pos] = Some(payload);
            basis.insert_tagged(self.columns[pos], 1 << pos);
        }
        (0..self.dimension())
            .map(|i| {
                basis
                    .represent(1 << i)
                    .map(|tag| combine(tag, &payload_of, len))
            })
            .collect()
    }

    /// MAP extrinsic erasure probability of a burst node using this code.
    pub fn exit_bn(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.exit_coefficients()?.eval(p))
    }

    pub fn exit_coefficients(&self) -> Result<ExitCoefficients> {
        Ok(ExitCoefficients::from_information(
            self.information_functions()?,
        ))
    }
}

fn combine(tag: u64, payload_of: &[Option<&[u8]>], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    let mut t = tag;
    while t != 0 {
        let pos = t.trailing_zeros() as usize;
        xor_into(
            &mut out,
            payload_of[pos].expect("tag refers to known position"),
        );
        t &= t - 1;
    }
    out
}

pub(crate) fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Un-normalized information functions: `values[g]` is the sum of ranks of
/// all `g`-column submatrices of a generator matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InformationFunctions {
    pub values: Vec<u128>,
}

impl InformationFunctions {
    pub fn length(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dimension(&self) -> usize {
        *self.values.last().unwrap_or(&0) as usize
    }
}

/// Codeword counts by Hamming weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightEnumerator {
    pub counts: Vec<u64>,
}

impl WeightEnumerator {
    /// Smallest positive weight with a codeword; 0 for the trivial code.
    pub fn min_distance(&self) -> usize {
        self.counts
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, &c)| c > 0)
            .map_or(0, |(w, _)| w)
    }

    pub fn weight2(&self) -> u64 {
        self.counts.get(2).copied().unwrap_or(0)
    }
}

/// Binomial coefficients `C(n, g)` for `n <= 64`, exact.
pub(crate) fn binomial(n: usize, g: usize) -> u128 {
    if g > n {
        return 0;
    }
    let g = g.min(n - g);
    let mut acc = 1u128;
    for i in 0..g {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Information functions from a list of columns.
pub(crate) fn information_functions_of_columns(
    k: usize,
    columns: &[u64],
) -> Result<InformationFunctions> {
    let mut types: Vec<(u64, usize)> = Vec::new();
    for &c in columns {
        match types.iter_mut().find(|(t, _)| *t == c) {
            Some((_, count)) => *count += 1,
            None => types.push((c, 1)),
        }
    }
    if types.len() <= MAX_DISTINCT_COLUMNS {
        return Ok(information_functions_of_types(k, &types));
    }
    if columns.len() > MAX_SUBSET_ENUMERATION_LENGTH {
        return Err(Error::SizeLimit(format!(
            "{} distinct columns in a length-{} code",
            types.len(),
            columns.len()
        )));
    }
    let n = columns.len();
    let mut values = vec![0u128; n + 1];
    for subset in 0u64..(1u64 << n) {
        let picked: Vec<u64> = (0..n)
            .filter(|&j| subset >> j & 1 == 1)
            .map(|j| columns[j])
            .collect();
        values[picked.len()] += crate::gf2::rank(&picked) as u128;
    }
    Ok(InformationFunctions { values })
}

/// Information functions of a code described by its column multiset.
///
/// Uses inclusion-exclusion over the distinct column values: with `r(T)` the
/// rank of a set `T` of distinct columns and `n_U` the number of columns whose
/// value lies in `U`,
/// `e_g = sum_U C(n_U, g) * sum_{T ⊇ U} (-1)^{|T|-|U|} r(T)`.
pub(crate) fn information_functions_of_types(
    k: usize,
    types: &[(u64, usize)],
) -> InformationFunctions {
    let d = types.len();
    let n: usize = types.iter().map(|(_, c)| c).sum();
    let subsets = 1usize << d;
    let mut weight = vec![0i128; subsets];
    let mut size = vec![0usize; subsets];
    for u in 1..subsets {
        let low = u.trailing_zeros() as usize;
        size[u] = size[u & (u - 1)] + types[low].1;
        weight[u] =
            crate::gf2::rank_of((0..d).filter(|&i| u >> i & 1 == 1).map(|i| types[i].0)) as i128;
    }
    // Superset Moebius transform.
    for bit in 0..d {
        for u in 0..subsets {
            if u >> bit & 1 == 0 {
                weight[u] -= weight[u | (1 << bit)];
            }
        }
    }
    let values = (0..=n)
        .map(|g| {
            let total: i128 = (0..subsets)
                .filter(|&u| weight[u] != 0)
                .map(|u| binomial(size[u], g) as i128 * weight[u])
                .sum();
            debug_assert!(total >= 0);
            total as u128
        })
        .collect::<Vec<_>>();
    debug_assert!(values[n] as usize <= k);
    InformationFunctions { values }
}

/// Burst-node EXIT function in Bernstein form:
/// `f(p) = sum_t c_t p^t (1 - p)^(n - 1 - t)`, storing only non-zero `c_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitCoefficients {
    n: usize,
    terms: Vec<(usize, f64)>,
}

impl ExitCoefficients {
    /// From exact information functions.
    pub fn from_information(info: &InformationFunctions) -> Self {
        let n = info.length();
        let e = |g: usize| info.values[g] as i128;
        let terms = (0..n)
            .filter_map(|t| {
                let a = (n - t) as i128 * e(n - t) - (t + 1) as i128 * e(n - 1 - t);
                (a != 0).then(|| (t, a as f64 / n as f64))
            })
            .collect();
        Self { n, terms }
    }

    /// From (possibly fractional) expected information functions.
    pub fn from_expected(expected: &[f64]) -> Self {
        let n = expected.len() - 1;
        let terms = (0..n)
            .filter_map(|t| {
                let a = (n - t) as f64 * expected[n - t] - (t + 1) as f64 * expected[n - 1 - t];
                (a != 0.0).then(|| (t, a / n as f64))
            })
            .collect();
        Self { n, terms }
    }

    pub(crate) fn from_terms(n: usize, terms: Vec<(usize, f64)>) -> Self {
        Self { n, terms }
    }

    /// Bounded-distance decoding of an `(n, k)` MDS code.
    pub fn mds(n: usize, k: usize) -> Self {
        let terms = (0..k)
            .map(|l| (n - 1 - l, binomial(n - 1, l) as f64))
            .collect();
        Self { n, terms }
    }

    pub fn length(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    /// Exact integral over [0, 1], from the Beta integrals of the basis.
    pub fn area(&self) -> f64 {
        let m = self.n - 1;
        self.terms
            .iter()
            .map(|&(t, c)| c / (self.n as f64 * binomial(m, t) as f64))
            .sum()
    }

    /// Derivative at `p` of the Bernstein form.
    pub fn derivative(&self, p: f64) -> f64 {
        let q = 1.0 - p;
        let m = self.n as i32 - 1;
        self.terms
            .iter()
            .map(|&(t, c)| {
                let t = t as i32;
                let left = if t > 0 {
                    t as f64 * p.powi(t - 1) * q.powi(m - t)
                } else {
                    0.0
                };
                let right = if t < m {
                    (m - t) as f64 * p.powi(t) * q.powi(m - t - 1)
                } else {
                    0.0
                };
                c * (left - right)
            })
            .sum()
    }

    /// Evaluates without a domain check (also used slightly outside [0, 1] by
    /// finite differences).
    pub fn eval(&self, p: f64) -> f64 {
        let q = 1.0 - p;
        let top = self.n as i32 - 1;
        self.terms
            .iter()
            .map(|&(t, c)| c * p.powi(t as i32) * q.powi(top - t as i32))
            .sum()
    }
}

/// EXIT function of an `(n, k)` MDS burst node under bounded-distance decoding.
pub fn exit_mds(n: usize, k: usize, p: f64) -> Result<f64> {
    if k == 0 || k >= n || n > 64 {
        return Err(Error::Domain(format!("invalid MDS parameters ({n}, {k})")));
    }
    check_probability(p)?;
    Ok(ExitCoefficients::mds(n, k).eval(p))
}
