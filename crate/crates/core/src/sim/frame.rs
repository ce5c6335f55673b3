//! MAC frames as bipartite graphs of bursts and slices.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::code::{xor_into, BinaryLinearCode};
use crate::ensemble::{draw_admissible_code, ComponentDistribution, ComponentKind};
use crate::error::{Error, Result};

/// Payload bytes per segment unless configured otherwise.
pub const DEFAULT_PAYLOAD_BYTES: usize = 16;

/// How many users transmit in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Activation {
    /// Each of `users` transmits independently with `probability`.
    Bernoulli { probability: f64, users: u64 },
    /// Exactly this many users transmit.
    Fixed { active: u64 },
}

impl Activation {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        match *self {
            Self::Fixed { active } => Ok(active),
            Self::Bernoulli { probability, users } => {
                if !(0.0..=1.0).contains(&probability) {
                    return Err(Error::Domain(format!(
                        "activation probability {probability} outside [0, 1]"
                    )));
                }
                let binomial =
                    Binomial::new(users, probability).map_err(|e| Error::Domain(e.to_string()))?;
                Ok(binomial.sample(rng))
            }
        }
    }
}

/// The code a burst was encoded with.
#[derive(Debug, Clone, PartialEq)]
pub enum BurstCode {
    Binary(Arc<BinaryLinearCode>),
    /// An `(n, k)` MDS code, decodable from any `k` segments.
    Mds {
        n: usize,
        k: usize,
    },
}

impl BurstCode {
    pub fn length(&self) -> usize {
        match self {
            Self::Binary(c) => c.length(),
            Self::Mds { n, .. } => *n,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Binary(c) => c.dimension(),
            Self::Mds { k, .. } => *k,
        }
    }

    /// Coded segments for the given information segments.
    ///
    /// MDS parity segments are not computed over an extension field; they are
    /// synthesized deterministically and serve only as ground truth.
    pub fn encode(&self, info: &[Vec<u8>]) -> Vec<Vec<u8>> {
        match self {
            Self::Binary(c) => c.encode(info),
            Self::Mds { n, k } => {
                let mut segments = info.to_vec();
                for j in 0..n - k {
                    let mut parity = info[j % k].clone();
                    for (i, seg) in info.iter().enumerate() {
                        if i != j % k {
                            xor_into(&mut parity, seg);
                        }
                    }
                    for (idx, byte) in parity.iter_mut().enumerate() {
                        *byte = byte.rotate_left((j % 7 + 1) as u32)
                            ^ (idx as u8).wrapping_mul(j as u8 + 1);
                    }
                    segments.push(parity);
                }
                segments
            }
        }
    }
}

/// One user's transmission.
#[derive(Debug, Clone)]
pub struct Burst {
    pub user: usize,
    /// Index of the distribution entry the user picked.
    pub entry: usize,
    pub code: BurstCode,
    /// Slice index of each coded segment, in segment order.
    pub positions: Vec<usize>,
    pub info: Vec<Vec<u8>>,
    pub segments: Vec<Vec<u8>>,
}

/// Received signal of one slice: XOR of the incident segments.
#[derive(Debug, Clone, Default)]
pub struct Slice {
    pub payload: Vec<u8>,
    /// `(burst, segment)` pairs transmitted in this slice.
    pub incident: Vec<(usize, usize)>,
}

impl Slice {
    pub fn multiplicity(&self) -> usize {
        self.incident.len()
    }
}

/// Placement of a burst when building a frame by hand.
#[derive(Debug, Clone)]
pub struct BurstSpec {
    pub code: BurstCode,
    pub positions: Vec<usize>,
    pub info: Vec<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct FrameGraph {
    slots: usize,
    k: usize,
    payload_bytes: usize,
    bursts: Vec<Burst>,
    slices: Vec<Slice>,
}

impl FrameGraph {
    /// Builds a frame of `slots * k` slices from explicit burst placements.
    pub fn from_bursts(
        slots: usize,
        k: usize,
        payload_bytes: usize,
        specs: Vec<BurstSpec>,
    ) -> Result<Self> {
        if slots == 0 || k == 0 {
            return Err(Error::Domain(
                "a frame needs at least one slot and k >= 1".into(),
            ));
        }
        let total = slots * k;
        let mut slices = vec![
            Slice {
                payload: vec![0; payload_bytes],
                incident: Vec::new(),
            };
            total
        ];
        let mut bursts = Vec::with_capacity(specs.len());
        for (b, spec) in specs.into_iter().enumerate() {
            if spec.code.dimension() != k {
                return Err(Error::Domain(format!(
                    "burst {b} has dimension {}, frame has k = {k}",
                    spec.code.dimension()
                )));
            }
            if spec.positions.len() != spec.code.length() {
                return Err(Error::Domain(format!(
                    "burst {b} needs {} positions",
                    spec.code.length()
                )));
            }
            let mut sorted = spec.positions.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&s| s >= total)
            {
                return Err(Error::Domain(format!(
                    "burst {b} positions must be distinct and below {total}"
                )));
            }
            if spec.info.len() != k || spec.info.iter().any(|s| s.len() != payload_bytes) {
                return Err(Error::Domain(format!(
                    "burst {b} needs {k} segments of {payload_bytes} bytes"
                )));
            }
            let segments = spec.code.encode(&spec.info);
            for (seg, &pos) in spec.positions.iter().enumerate() {
                xor_into(&mut slices[pos].payload, &segments[seg]);
                slices[pos].incident.push((b, seg));
            }
            bursts.push(Burst {
                user: b,
                entry: 0,
                code: spec.code,
                positions: spec.positions,
                info: spec.info,
                segments,
            });
        }
        Ok(Self {
            slots,
            k,
            payload_bytes,
            bursts,
            slices,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dimension(&self) -> usize {
        self.k
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload_bytes
    }

    pub fn bursts(&self) -> &[Burst] {
        &self.bursts
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    /// `histogram[d]` is the number of slices of multiplicity `d`.
    pub fn slice_degree_histogram(&self) -> Vec<u64> {
        let mut hist = Vec::new();
        for s in &self.slices {
            let d = s.multiplicity();
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }
}

/// Draws a frame of `slots` slots for `dist` from a seed.
pub fn generate_frame(
    slots: usize,
    dist: &ComponentDistribution,
    activation: Activation,
    payload_bytes: usize,
    seed: u64,
) -> Result<FrameGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_frame_with(slots, dist, activation, payload_bytes, &mut rng)
}

/// Draws a frame using the caller's random stream.
pub fn generate_frame_with<R: Rng + ?Sized>(
    slots: usize,
    dist: &ComponentDistribution,
    activation: Activation,
    payload_bytes: usize,
    rng: &mut R,
) -> Result<FrameGraph> {
    let k = dist.dimension();
    if slots == 0 {
        return Err(Error::Domain("a frame needs at least one slot".into()));
    }
    let total = slots * k;
    if let Some((c, _)) = dist.iter().find(|(c, p)| *p > 0.0 && c.length() > total) {
        return Err(Error::Domain(format!(
            "{} needs {} distinct slices but the frame has {total}",
            c.label(),
            c.length()
        )));
    }
    let active = activation.draw(rng)?;
    let picker = WeightedIndex::new(dist.probabilities())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut specs = Vec::with_capacity(active as usize);
    let mut entries = Vec::with_capacity(active as usize);
    for _ in 0..active {
        let entry = picker.sample(rng);
        let component = &dist.components()[entry];
        let code = match component.kind() {
            ComponentKind::Explicit(c) | ComponentKind::Repetition(c) => {
                BurstCode::Binary(c.clone())
            }
            ComponentKind::Random(_) => {
                BurstCode::Binary(Arc::new(draw_admissible_code(component.length(), k, rng)?))
            }
            ComponentKind::Mds => BurstCode::Mds {
                n: component.length(),
                k,
            },
        };
        let positions = sample(rng, total, code.length()).into_vec();
        let info = (0..k)
            .map(|_| {
                let mut seg = vec![0u8; payload_bytes];
                rng.fill_bytes(&mut seg);
                seg
            })
            .collect();
        specs.push(BurstSpec {
            code,
            positions,
            info,
        });
        entries.push(entry);
    }
    let mut frame = FrameGraph::from_bursts(slots, k, payload_bytes, specs)?;
    for (burst, entry) in frame.bursts.iter_mut().zip(entries) {
        burst.entry = entry;
    }
    Ok(frame)
}
