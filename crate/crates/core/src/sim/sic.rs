//! Iterative successive interference cancellation over a frame graph.

use serde::Serialize;

use super::frame::{BurstCode, FrameGraph};
use crate::code::xor_into;

/// Iteration limit used when the caller has no preference.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000;

/// Decoding result for one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserStatus {
    pub user: usize,
    pub recovered: bool,
    /// Decoder iteration (1-based) in which the user's burst was resolved.
    pub iteration: Option<usize>,
    /// Recovered information segments, present when `recovered`.
    #[serde(skip)]
    pub info: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeOutcome {
    pub users: Vec<UserStatus>,
    pub iterations: usize,
    /// Slices still carrying unresolved interference.
    pub residual_slices: usize,
}

impl DecodeOutcome {
    pub fn recovered_count(&self) -> usize {
        self.users.iter().filter(|u| u.recovered).count()
    }

    /// Users in the order they were resolved (ties by user index).
    pub fn recovery_order(&self) -> Vec<usize> {
        let mut done: Vec<_> = self
            .users
            .iter()
            .filter_map(|u| u.iteration.map(|it| (it, u.user)))
            .collect();
        done.sort_unstable();
        done.into_iter().map(|(_, u)| u).collect()
    }
}

/// Peels the frame: collect segments from singleton slices, decode each
/// touched burst with its component code, cancel everything newly learned,
/// and repeat until nothing changes or `max_iterations` is reached.
pub fn sic_decode(frame: &FrameGraph, max_iterations: usize) -> DecodeOutcome {
    let bursts = frame.bursts();
    let mut payloads: Vec<Vec<u8>> = frame.slices().iter().map(|s| s.payload.clone()).collect();
    let mut incident: Vec<Vec<(usize, usize)>> =
        frame.slices().iter().map(|s| s.incident.clone()).collect();
    let mut known: Vec<Vec<Option<Vec<u8>>>> =
        bursts.iter().map(|b| vec![None; b.code.length()]).collect();
    let mut cancelled: Vec<Vec<bool>> = bursts
        .iter()
        .map(|b| vec![false; b.code.length()])
        .collect();
    let mut resolved: Vec<Option<usize>> = vec![None; bursts.len()];
    let mut info: Vec<Option<Vec<Vec<u8>>>> = vec![None; bursts.len()];

    let mut iterations = 0;
    while iterations < max_iterations {
        let mut touched = Vec::new();
        for (s, inc) in incident.iter().enumerate() {
            if let [(b, seg)] = inc[..] {
                if known[b][seg].is_none() {
                    known[b][seg] = Some(payloads[s].clone());
                    touched.push(b);
                }
            }
        }
        if touched.is_empty() {
            break;
        }
        iterations += 1;
        touched.sort_unstable();
        touched.dedup();

        for &b in &touched {
            if resolved[b].is_some() {
                continue;
            }
            let burst = &bursts[b];
            match &burst.code {
                BurstCode::Binary(code) => {
                    let available: Vec<(usize, &[u8])> = known[b]
                        .iter()
                        .enumerate()
                        .filter_map(|(j, p)| p.as_deref().map(|p| (j, p)))
                        .collect();
                    let found = code
                        .map_erasure_decode(&available)
                        .expect("slice bookkeeping keeps segment payloads consistent");
                    if available.len() + found.len() == code.length() {
                        info[b] = code.solve_information(&available);
                    }
                    for (j, payload) in found {
                        known[b][j] = Some(payload);
                    }
                }
                BurstCode::Mds { k, .. } => {
                    let count = known[b].iter().filter(|p| p.is_some()).count();
                    if count >= *k {
                        for (j, slot) in known[b].iter_mut().enumerate() {
                            slot.get_or_insert_with(|| burst.segments[j].clone());
                        }
                        info[b] = Some(burst.segments[..*k].to_vec());
                    }
                }
            }
            if known[b].iter().all(Option::is_some) {
                resolved[b] = Some(iterations);
            }
        }

        for &b in &touched {
            for (j, &pos) in bursts[b].positions.iter().enumerate() {
                let Some(payload) = &known[b][j] else {
                    continue;
                };
                if cancelled[b][j] {
                    continue;
                }
                cancelled[b][j] = true;
                let at = incident[pos]
                    .iter()
                    .position(|&e| e == (b, j))
                    .expect("cancelled segment is incident to its slice");
                incident[pos].swap_remove(at);
                xor_into(&mut payloads[pos], payload);
            }
        }
    }

    let users = bursts
        .iter()
        .enumerate()
        .map(|(b, burst)| UserStatus {
            user: burst.user,
            recovered: resolved[b].is_some(),
            iteration: resolved[b],
            info: info[b].take(),
        })
        .collect();
    DecodeOutcome {
        users,
        iterations,
        residual_slices: incident.iter().filter(|i| !i.is_empty()).count(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::code::BinaryLinearCode;
    use crate::sim::frame::BurstSpec;

    fn spec(code: BinaryLinearCode, positions: Vec<usize>, seed: u8) -> BurstSpec {
        let k = code.dimension();
        BurstSpec {
            code: BurstCode::Binary(Arc::new(code)),
            positions,
            info: (0..k)
                .map(|i| vec![seed.wrapping_mul(31).wrapping_add(i as u8); 4])
                .collect(),
        }
    }

    fn rep(n: usize) -> BinaryLinearCode {
        BinaryLinearCode::repetition(n).unwrap()
    }

    #[test]
    fn peeling_with_repetition_codes() {
        // b1 on s1, s2; b2 on s2, s3, s4; b3 on s1, s4.
        let frame = FrameGraph::from_bursts(
            4,
            1,
            4,
            vec![
                spec(rep(2), vec![0, 1], 1),
                spec(rep(3), vec![1, 2, 3], 2),
                spec(rep(2), vec![0, 3], 3),
            ],
        )
        .unwrap();
        let out = sic_decode(&frame, 10);
        assert_eq!(out.recovered_count(), 3);
        assert_eq!(out.users[1].iteration, Some(1));
        assert_eq!(out.users[0].iteration, Some(2));
        assert_eq!(out.users[2].iteration, Some(2));
        assert_eq!(out.residual_slices, 0);
        for (u, b) in out.users.iter().zip(frame.bursts()) {
            assert_eq!(u.info.as_ref(), Some(&b.info));
        }
    }

    #[test]
    fn stopping_set() {
        let frame = FrameGraph::from_bursts(
            2,
            1,
            4,
            vec![spec(rep(2), vec![0, 1], 1), spec(rep(2), vec![0, 1], 2)],
        )
        .unwrap();
        let out = sic_decode(&frame, 10);
        assert_eq!(out.recovered_count(), 0);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.residual_slices, 2);
    }

    #[test]
    fn mds_any_k_rule() {
        let frame = FrameGraph::from_bursts(
            4,
            2,
            4,
            vec![BurstSpec {
                code: BurstCode::Mds { n: 3, k: 2 },
                positions: vec![0, 3, 5],
                info: vec![vec![9; 4], vec![7; 4]],
            }],
        )
        .unwrap();
        let out = sic_decode(&frame, 5);
        assert!(out.users[0].recovered);
        assert_eq!(out.users[0].info.as_ref().unwrap(), &frame.bursts()[0].info);
    }
}
