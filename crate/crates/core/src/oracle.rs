//! Brute-force code searches used to grade the calibration loops.
//!
//! All searches use the noise-free analog objective, so they see exactly the
//! optimum the loops are chasing without digitization or dither.

use alloc::vec::Vec;

use crate::scenario::Scenario;
use crate::Result;

/// Circular distance between two 8-bit phase codes.
pub fn code_distance(a: u8, b: u8) -> u8 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}

/// Best of two candidates: higher value, then the lexicographically smaller
/// tuple, so the result does not depend on evaluation order.
fn better(a: (f64, &[u8]), b: (f64, &[u8])) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Objective over all 256 codes of loop `loop_index` with every other
/// element at `base`. Returns the argmax and the full curve.
pub fn oracle_single(
    scn: &Scenario,
    radius_r: f64,
    base: &[u8],
    loop_index: usize,
) -> Result<(u8, Vec<f64>)> {
    let element = *scn
        .loop_elements
        .get(loop_index)
        .ok_or(crate::Error::IndexOutOfRange {
            index: loop_index,
            len: scn.loop_elements.len(),
        })?;
    let mut codes = base.to_vec();
    let mut curve = Vec::with_capacity(256);
    for c in 0..=255u8 {
        codes[element] = c;
        curve.push(scn.objective_at(radius_r, &codes)?);
    }
    let mut best = 0u8;
    for c in 1..=255u8 {
        if curve[usize::from(c)] > curve[usize::from(best)] {
            best = c;
        }
    }
    Ok((best, curve))
}

/// Joint optimum over all loop codes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOptimum {
    /// Loop codes in loop order.
    pub codes: Vec<u8>,
    /// Every element's code with the loop codes inserted into `base`.
    pub element_codes: Vec<u8>,
    pub objective: f64,
    pub evaluations: u64,
}

/// Stride-16 grid over every loop code, then exhaustive refinement within
/// +-8 codes per axis, re-centred until the best point is interior.
pub fn oracle_joint(scn: &Scenario, radius_r: f64, base: &[u8]) -> Result<JointOptimum> {
    let n = scn.loop_elements.len();
    let mut codes = base.to_vec();
    let mut evaluations = 0u64;
    let mut eval = |loop_codes: &[u8]| -> Result<f64> {
        for (&e, &c) in scn.loop_elements.iter().zip(loop_codes) {
            codes[e] = c;
        }
        evaluations += 1;
        scn.objective_at(radius_r, &codes)
    };

    let coarse: Vec<u8> = (0..16).map(|k| k * 16).collect();
    let mut best_codes = alloc::vec![0u8; n];
    let mut best_val = f64::NEG_INFINITY;
    for_each_tuple(
        n,
        |i| coarse[i],
        coarse.len(),
        |t| {
            let v = eval(t)?;
            if better((v, t), (best_val, &best_codes)) {
                best_val = v;
                best_codes.copy_from_slice(t);
            }
            Ok(())
        },
    )?;

    // each pass searches a 17-wide cube around the incumbent
    for _ in 0..64 {
        let centre = best_codes.clone();
        let offsets: Vec<i16> = (-8..=8).collect();
        for_each_tuple(
            n,
            |i| offsets[i] as u8,
            offsets.len(),
            |off| {
                let t: Vec<u8> = centre
                    .iter()
                    .zip(off)
                    .map(|(&c, &o)| c.wrapping_add(o))
                    .collect();
                let v = eval(&t)?;
                if better((v, &t), (best_val, &best_codes)) {
                    best_val = v;
                    best_codes.copy_from_slice(&t);
                }
                Ok(())
            },
        )?;
        let on_face = best_codes
            .iter()
            .zip(&centre)
            .any(|(&b, &c)| code_distance(b, c) == 8);
        if !on_face {
            break;
        }
    }

    let mut element_codes = base.to_vec();
    for (&e, &c) in scn.loop_elements.iter().zip(&best_codes) {
        element_codes[e] = c;
    }
    Ok(JointOptimum {
        codes: best_codes,
        element_codes,
        objective: best_val,
        evaluations,
    })
}

/// Calls `f` for every tuple in the `dims`-fold product of `len` values,
/// the value at position `i` given by `value(i)`.
fn for_each_tuple<V, F>(dims: usize, value: V, len: usize, mut f: F) -> Result<()>
where
    V: Fn(usize) -> u8,
    F: FnMut(&[u8]) -> Result<()>,
{
    let mut idx = alloc::vec![0usize; dims];
    let mut tuple: Vec<u8> = idx.iter().map(|&i| value(i)).collect();
    loop {
        f(&tuple)?;
        let mut d = 0;
        loop {
            if d == dims {
                return Ok(());
            }
            idx[d] += 1;
            if idx[d] < len {
                tuple[d] = value(idx[d]);
                break;
            }
            idx[d] = 0;
            tuple[d] = value(0);
            d += 1;
        }
    }
}

/// Indices of strict local maxima of a circular curve.
pub fn local_maxima(curve: &[f64]) -> Vec<usize> {
    let n = curve.len();
    (0..n)
        .filter(|&i| {
            let prev = curve[(i + n - 1) % n];
            let next = curve[(i + 1) % n];
            curve[i] > prev && curve[i] >= next
        })
        .collect()
}
