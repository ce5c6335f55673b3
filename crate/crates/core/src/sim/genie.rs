//! Genie decoder: Gaussian elimination on the whole frame.
//!
//! Unknowns are the information segments of every burst; each non-empty
//! slice contributes one equation whose coefficients are the generator
//! columns of the segments placed in it. A user is recovered when all of its
//! unknowns are uniquely determined.

use super::frame::{BurstCode, FrameGraph};
use super::sic::{DecodeOutcome, UserStatus};
use crate::error::{Error, Result};
use crate::gf2::WideRows;

pub fn genie_decode(frame: &FrameGraph) -> Result<DecodeOutcome> {
    let k = frame.dimension();
    let bursts = frame.bursts();
    let mut columns = Vec::with_capacity(bursts.len());
    for (b, burst) in bursts.iter().enumerate() {
        match &burst.code {
            BurstCode::Binary(code) => columns.push(code.columns()),
            BurstCode::Mds { .. } => {
                return Err(Error::Unsupported(format!(
                    "burst {b} uses an MDS code, which has no binary linear system"
                )))
            }
        }
    }
    let unknowns = bursts.len() * k;
    let bits = frame.payload_bytes() * 8;
    let equations: Vec<usize> = (0..frame.slices().len())
        .filter(|&s| frame.slices()[s].multiplicity() > 0)
        .collect();
    let mut system = WideRows::zeros(equations.len(), unknowns + bits);
    for (row, &s) in equations.iter().enumerate() {
        let slice = &frame.slices()[s];
        for &(b, seg) in &slice.incident {
            let col = columns[b][seg];
            for i in 0..k {
                if (col >> i) & 1 == 1 {
                    system.flip(row, b * k + i);
                }
            }
        }
        for (byte_idx, byte) in slice.payload.iter().enumerate() {
            for bit in 0..8 {
                if (byte >> bit) & 1 == 1 {
                    system.flip(row, unknowns + byte_idx * 8 + bit);
                }
            }
        }
    }
    let pivots = system.rref(unknowns);

    // Value of each determined unknown, as payload bytes.
    let mut solved: Vec<Option<Vec<u8>>> = vec![None; unknowns];
    for (row, &unknown) in pivots.iter().enumerate() {
        if system.ones_before(row, unknowns) != 1 {
            continue;
        }
        let mut value = vec![0u8; frame.payload_bytes()];
        for (byte_idx, byte) in value.iter_mut().enumerate() {
            for bit in 0..8 {
                if system.get(row, unknowns + byte_idx * 8 + bit) {
                    *byte |= 1 << bit;
                }
            }
        }
        solved[unknown] = Some(value);
    }

    let users = bursts
        .iter()
        .enumerate()
        .map(|(b, burst)| {
            let info: Option<Vec<Vec<u8>>> = (0..k).map(|i| solved[b * k + i].clone()).collect();
            UserStatus {
                user: burst.user,
                recovered: info.is_some(),
                iteration: info.as_ref().map(|_| 1),
                info,
            }
        })
        .collect::<Vec<_>>();
    let residual_slices = frame
        .slices()
        .iter()
        .filter(|s| s.incident.iter().any(|&(b, _)| !users[b].recovered))
        .count();
    Ok(DecodeOutcome {
        users,
        iterations: 1,
        residual_slices,
    })
}
