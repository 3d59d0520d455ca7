//! Maximum-likelihood sequence detection over the Poisson channel.
//!
//! The path metric is `Σ_n y[n]·ln λ̃[n] − λ̃[n]`, where `λ̃` is the mean the
//! candidate bit sequence would produce. A trellis over the last `band − 1`
//! bits makes this exact when `band` equals the channel memory; a shorter
//! band ignores taps beyond it. Blocks start from an all-zero history.

use std::cmp::Ordering;

use super::{check_stream, Csi};
use crate::error::{Error, Result};

/// Longest band for which the trellis is allocated.
pub const MAX_BAND: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MlsdOutput {
    pub bits: Vec<bool>,
    /// Log-likelihood (up to the `ln y!` constant) of the returned sequence.
    pub metric: f64,
    /// Branch metric evaluations performed.
    pub branch_ops: u64,
}

/// Branch metric of one symbol given the last `band` bits (`history` bit 0 is
/// the current symbol, bit `i` the symbol `i` steps back).
fn branch_metric(y: &[f64], csi: &Csi, history: u32, band: usize, log_floor: f64) -> f64 {
    let mut metric = 0.0;
    for (q, &yq) in y.iter().enumerate() {
        let mut mean = csi.lambda_s;
        for lag in 0..band {
            if history >> lag & 1 == 1 {
                mean += csi.pulse * csi.taps.at(lag, q);
            }
        }
        metric += yq * mean.max(log_floor).ln() - mean;
    }
    metric
}

/// Viterbi detection with a `2^(band−1)`-state trellis. Equal metrics resolve
/// to the lexicographically smaller bit sequence.
pub fn mlsd_viterbi(y: &[f64], csi: &Csi, band: usize, log_floor: f64) -> Result<MlsdOutput> {
    let n = csi.samples_per_symbol();
    let s = check_stream(y, n)?;
    if band == 0 || band > csi.taps.memory() {
        return Err(Error::config(
            "detector.band",
            format!("band L''={band} must be in 1..={}", csi.taps.memory()),
        ));
    }
    if band > MAX_BAND {
        return Err(Error::config(
            "detector.band",
            format!("band L''={band} exceeds the trellis limit {MAX_BAND}"),
        ));
    }
    let states = 1usize << (band - 1);
    let mut metric = vec![f64::NEG_INFINITY; states];
    metric[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; states];
    // survivor[k][state] = which of the two incoming branches won
    let mut survivor = vec![0u8; s * states];
    let mut row = vec![0u8; states];
    let mut branch_ops = 0u64;
    let trellis = Trellis { band, states };

    for (k, sym) in y.chunks(n).enumerate() {
        for (state, slot) in next.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_choice = 0u8;
            for choice in 0..2u8 {
                let (prev, bit) = trellis.predecessor(state as u32, choice);
                let pm = metric[prev as usize];
                if pm == f64::NEG_INFINITY {
                    continue;
                }
                branch_ops += 1;
                let history = (prev << 1) | bit as u32;
                let cand = pm + branch_metric(sym, csi, history, band, log_floor);
                let take = match cand.partial_cmp(&best) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => {
                        let a = trellis.path_via(&survivor, k, state as u32, choice);
                        let b = trellis.path_via(&survivor, k, state as u32, best_choice);
                        a < b
                    }
                    _ => false,
                };
                if take {
                    best = cand;
                    best_choice = choice;
                }
            }
            *slot = best;
            row[state] = best_choice;
        }
        survivor[k * states..(k + 1) * states].copy_from_slice(&row);
        std::mem::swap(&mut metric, &mut next);
    }

    let mut best_state = 0usize;
    for st in 1..states {
        match metric[st].partial_cmp(&metric[best_state]) {
            Some(Ordering::Greater) => best_state = st,
            Some(Ordering::Equal) => {
                let a = trellis.traceback(&survivor, s, st as u32);
                let b = trellis.traceback(&survivor, s, best_state as u32);
                if a < b {
                    best_state = st;
                }
            }
            _ => {}
        }
    }
    let bits = trellis.traceback(&survivor, s, best_state as u32);
    Ok(MlsdOutput {
        bits,
        metric: metric[best_state],
        branch_ops,
    })
}

/// State `st` holds the last `band − 1` bits, bit 0 the most recent.
struct Trellis {
    band: usize,
    states: usize,
}

impl Trellis {
    /// Predecessor state and input bit of incoming branch `choice`.
    fn predecessor(&self, st: u32, choice: u8) -> (u32, bool) {
        if self.band == 1 {
            (0, choice == 1)
        } else {
            ((st >> 1) | ((choice as u32) << (self.band - 2)), st & 1 == 1)
        }
    }

    /// Full path of length `k + 1` entering `st` at step `k` via `choice`.
    fn path_via(&self, survivor: &[u8], k: usize, st: u32, choice: u8) -> Vec<bool> {
        let (prev, bit) = self.predecessor(st, choice);
        let mut path = self.traceback(survivor, k, prev);
        path.push(bit);
        path
    }

    /// Bits of the survivor ending in `st` after `steps` symbols, oldest first.
    fn traceback(&self, survivor: &[u8], steps: usize, st: u32) -> Vec<bool> {
        let mut bits = vec![false; steps];
        let mut st = st;
        for k in (0..steps).rev() {
            let (prev, bit) = self.predecessor(st, survivor[k * self.states + st as usize]);
            bits[k] = bit;
            st = prev;
        }
        bits
    }
}
