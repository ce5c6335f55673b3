//! Small dense GF(2) matrices packed into machine words.
//!
//! Rows of at most 64 bits are stored as `u64` masks (bit `j` of a row is
//! column `j`). This is enough for component generator matrices; the frame
//! level linear systems of the genie decoder use [`WideRows`] instead.

use crate::error::{Error, Result};

/// Maximum number of columns of a [`BitMatrix`].
pub const MAX_COLUMNS: usize = 64;

/// A dense bit matrix with at most 64 columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: Vec<u64>,
    cols: usize,
}

impl BitMatrix {
    /// Builds a matrix from packed rows. Bits at or beyond `cols` must be zero.
    pub fn from_rows(rows: Vec<u64>, cols: usize) -> Result<Self> {
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidMatrix("matrix must be non-empty".into()));
        }
        if cols > MAX_COLUMNS {
            return Err(Error::InvalidMatrix(format!(
                "{cols} columns exceed the supported maximum of {MAX_COLUMNS}"
            )));
        }
        let mask = column_mask(cols);
        if rows.iter().any(|r| r & !mask != 0) {
            return Err(Error::InvalidMatrix(
                "row has bits beyond the last column".into(),
            ));
        }
        Ok(Self { rows, cols })
    }

    /// Parses the comma separated bit-row text format, e.g. `"1100,0111"`.
    ///
    /// The leftmost character of each row is column 0. Whitespace around rows
    /// is ignored; every row must have the same length.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut cols = None;
        for (i, raw) in text.split(',').enumerate() {
            let row = raw.trim();
            if row.is_empty() {
                return Err(Error::Parse(format!("row {i} is empty")));
            }
            let len = row.chars().count();
            if len > MAX_COLUMNS {
                return Err(Error::Parse(format!(
                    "row {i} has {len} columns, at most {MAX_COLUMNS} are supported"
                )));
            }
            match cols {
                None => cols = Some(len),
                Some(c) if c != len => {
                    return Err(Error::Parse(format!(
                        "row {i} has length {len}, expected {c}"
                    )))
                }
                _ => {}
            }
            let mut bits = 0u64;
            for (j, ch) in row.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => bits |= 1 << j,
                    other => {
                        return Err(Error::Parse(format!(
                            "row {i} contains invalid character {other:?}"
                        )))
                    }
                }
            }
            rows.push(bits);
        }
        Self::from_rows(rows, cols.unwrap_or(0))
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols
    }

    /// Column `j` packed as a row-index bit mask (bit `i` is row `i`).
    ///
    /// Only meaningful for matrices with at most 64 rows.
    pub fn column(&self, j: usize) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (i, r)| acc | (((r >> j) & 1) << i))
    }

    pub fn rank(&self) -> usize {
        rank(&self.rows)
    }

    /// Renders the matrix back into the comma separated text format.
    pub fn to_text(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                (0..self.cols)
                    .map(|j| if (r >> j) & 1 == 1 { '1' } else { '0' })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn column_mask(cols: usize) -> u64 {
    if cols >= 64 {
        u64::MAX
    } else {
        (1u64 << cols) - 1
    }
}

/// GF(2) rank of a set of packed vectors.
pub fn rank(vectors: &[u64]) -> usize {
    rank_of(vectors.iter().copied())
}

/// GF(2) rank of an iterator of packed vectors.
pub fn rank_of(vectors: impl IntoIterator<Item = u64>) -> usize {
    let mut basis = [0u64; 64];
    let mut len = 0;
    for mut v in vectors {
        // Basis members have distinct leading bits, each reduced by its
        // predecessors, so one pass in insertion order reduces fully.
        for &b in &basis[..len] {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis[len] = v;
            len += 1;
            if len == 64 {
                break;
            }
        }
    }
    len
}

/// Incremental row-echelon basis indexed by leading bit.
///
/// Each stored vector carries a `mask` recording which inserted inputs it is
/// the XOR of, so a reduced vector can be expressed over the original inputs.
#[derive(Debug, Clone)]
pub struct XorBasis {
    slots: [(u64, u64); 64],
    len: usize,
}

impl Default for XorBasis {
    fn default() -> Self {
        Self {
            slots: [(0, 0); 64],
            len: 0,
        }
    }
}

impl XorBasis {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts `v`; returns whether the basis grew.
    pub fn insert(&mut self, v: u64) -> bool {
        self.insert_tagged(v, 0)
    }

    /// Inserts `v` tagged with the combination mask `tag`.
    pub fn insert_tagged(&mut self, v: u64, tag: u64) -> bool {
        let (rest, tag) = self.reduce(v, tag);
        if rest == 0 {
            return false;
        }
        let lead = 63 - rest.leading_zeros() as usize;
        self.slots[lead] = (rest, tag);
        self.len += 1;
        true
    }

    /// Reduces `v` against the basis; returns the remainder and the updated tag.
    pub fn reduce(&self, mut v: u64, mut tag: u64) -> (u64, u64) {
        while v != 0 {
            let lead = 63 - v.leading_zeros() as usize;
            let (b, t) = self.slots[lead];
            if b == 0 {
                break;
            }
            v ^= b;
            tag ^= t;
        }
        (v, tag)
    }

    /// Whether `v` lies in the span; if so the tag of its representation.
    pub fn represent(&self, v: u64) -> Option<u64> {
        match self.reduce(v, 0) {
            (0, tag) => Some(tag),
            _ => None,
        }
    }
}

/// Bit rows of arbitrary width for larger linear systems.
#[derive(Debug, Clone)]
pub struct WideRows {
    words: usize,
    cols: usize,
    data: Vec<u64>,
}

impl WideRows {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64).max(1);
        Self {
            words,
            cols,
            data: vec![0; rows * words],
        }
    }

    pub fn row_count(&self) -> usize {
        self.data.len() / self.words
    }

    pub fn col_count(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r * self.words + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        self.data[r * self.words + c / 64] ^= 1 << (c % 64);
    }

    /// Number of set bits of row `r` among columns `0..cols`.
    pub fn ones_before(&self, r: usize, cols: usize) -> usize {
        let row = &self.data[r * self.words..(r + 1) * self.words];
        let full = cols / 64;
        let mut count: usize = row[..full].iter().map(|w| w.count_ones() as usize).sum();
        if !cols.is_multiple_of(64) {
            count += (row[full] & ((1u64 << (cols % 64)) - 1)).count_ones() as usize;
        }
        count
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let w = self.words;
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * w);
            (&lo[src * w..src * w + w], &mut hi[..w])
        } else {
            let (lo, hi) = self.data.split_at_mut(src * w);
            (&hi[..w], &mut lo[dst * w..dst * w + w])
        };
        for (d, s) in b.iter_mut().zip(a) {
            *d ^= *s;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.words;
        for i in 0..w {
            self.data.swap(a * w + i, b * w + i);
        }
    }

    /// Reduces to reduced row-echelon form over the first `pivot_cols` columns.
    ///
    /// Returns the pivot column of each leading row, in row order.
    pub fn rref(&mut self, pivot_cols: usize) -> Vec<usize> {
        let rows = self.row_count();
        let mut pivots = Vec::new();
        let mut next = 0;
        for c in 0..pivot_cols.min(self.cols) {
            if next == rows {
                break;
            }
            let Some(p) = (next..rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(p, next);
            for r in 0..rows {
                if r != next && self.get(r, c) {
                    self.xor_row_into(next, r);
                }
            }
            pivots.push(c);
            next += 1;
        }
        pivots
    }
}
