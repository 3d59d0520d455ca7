//! Pilot-based channel estimation.
//!
//! The receiver knows the pilot emissions, so the observed block is linear
//! in the taps: `y = X·h + λ_s·1 + noise`. `λ_s` is taken from a silent
//! prefix and the taps from least squares on the pilot part, with negative
//! solution entries clamped to zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::{SamplingGrid, TapVector};
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Default length of the silent noise-only prefix, in samples.
pub const DEFAULT_SILENT_SAMPLES: usize = 50;

/// Longest run of equal bits in the default pilot pattern.
pub const PILOT_MAX_RUN: usize = 3;

const PILOT_SEED: u64 = 0x5E_ED0F_9170;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotBlock {
    bits: Vec<bool>,
}

impl PilotBlock {
    /// Pilot of `bits.len()` symbols for a channel of `memory` symbols.
    pub fn new(bits: Vec<bool>, memory: usize) -> Result<Self> {
        if bits.len() < memory {
            return Err(Error::config(
                "csi.pilot_symbols",
                format!("pilot length P={} must be at least L={memory}", bits.len()),
            ));
        }
        Ok(Self { bits })
    }

    /// Fixed pseudorandom pattern with no run longer than [`PILOT_MAX_RUN`].
    pub fn default_pattern(len: usize, memory: usize) -> Result<Self> {
        let mut rng = StreamKey::new(PILOT_SEED, Purpose::Pilot, 0, 0).rng();
        let mut bits: Vec<bool> = Vec::with_capacity(len);
        for i in 0..len {
            let mut b: bool = rng.random();
            if i >= PILOT_MAX_RUN && bits[i - PILOT_MAX_RUN..].iter().all(|&p| p == b) {
                b = !b;
            }
            bits.push(b);
        }
        Self::new(bits, memory)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Pattern as a `0`/`1` string, for recording in outputs.
    pub fn pattern_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Sample mean of a noise-only interval.
pub fn estimate_noise_rate(silent: &[f64]) -> Result<f64> {
    if silent.is_empty() {
        return Err(Error::Estimation("silent prefix is empty".into()));
    }
    Ok(silent.iter().sum::<f64>() / silent.len() as f64)
}

/// Least-squares taps from the samples `y` observed during the pilot block.
/// A bit-1 pilot emits `pulse` molecules at its symbol start.
pub fn ls_channel_estimate(
    pilots: &PilotBlock,
    pulse: f64,
    y: &[f64],
    lambda_s: f64,
    grid: &SamplingGrid,
) -> Result<TapVector> {
    let n = grid.samples_per_symbol;
    let taps = grid.num_taps();
    let rows = pilots.len() * n;
    if y.len() != rows {
        return Err(Error::Usage(format!(
            "pilot block needs {rows} samples, got {}",
            y.len()
        )));
    }
    let mut x = DMatrix::<f64>::zeros(rows, taps);
    for (k, &b) in pilots.bits().iter().enumerate() {
        if !b {
            continue;
        }
        let start = k * n;
        for j in 0..taps.min(rows - start) {
            x[(start + j, j)] = pulse;
        }
    }
    let rhs = DVector::from_iterator(rows, y.iter().map(|v| v - lambda_s));
    let qr = x.qr();
    let r = qr.r();
    let scale = (0..taps).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || (0..taps).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return Err(Error::Estimation(
            "pilot emissions do not identify every tap (rank-deficient)".into(),
        ));
    }
    let qty = qr.q().transpose() * rhs;
    let h = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Estimation("singular least-squares system".into()))?;
    TapVector::new(h.iter().map(|v| v.max(0.0)).collect(), n)
}
