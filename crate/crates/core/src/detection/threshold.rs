//! Fixed, adaptive and asynchronous threshold detectors for on-off keying.

use super::{check_stream, Decisions};
use crate::equalization::derivative_apply;
use crate::error::{Error, Result};

/// Symbol energy: `ŝ[k] = 1` iff the sum of the symbol's samples exceeds `gamma`.
pub fn ftd_detect(y: &[f64], samples_per_symbol: usize, gamma: f64) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    let mut out = Decisions::with_capacity(s);
    for sym in y.chunks(samples_per_symbol) {
        let e: f64 = sym.iter().sum();
        out.push(e > gamma, e);
    }
    Ok(out)
}

/// No-ISI maximum-likelihood threshold between `Poisson(2M·h1 + λ_s)` and
/// `Poisson(λ_s)`.
///
/// With `λ_s = 0` the likelihood ratio is infinite for any arrival, so the
/// returned threshold lies strictly between 0 and `min(1, 2M·h1)`: any
/// arrival decides bit 1.
pub fn ftd_optimal_threshold(m: f64, h1: f64, lambda_s: f64) -> Result<f64> {
    let signal = 2.0 * m * h1;
    if !(signal > 0.0) || lambda_s < 0.0 {
        return Err(Error::Domain(format!(
            "threshold needs 2M·h1 > 0 and λ_s >= 0 (got {signal}, {lambda_s})"
        )));
    }
    if lambda_s == 0.0 {
        return Ok((0.5 * signal).min(0.5));
    }
    Ok(signal / ((signal + lambda_s) / lambda_s).ln())
}

/// Compares each symbol's energy with the previous symbol's energy; the first
/// symbol falls back to `gamma`.
pub fn atd_detect(y: &[f64], samples_per_symbol: usize, gamma: f64) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    let mut out = Decisions::with_capacity(s);
    let mut prev: Option<f64> = None;
    for sym in y.chunks(samples_per_symbol) {
        let e: f64 = sym.iter().sum();
        let threshold = prev.unwrap_or(gamma);
        out.push(e > threshold, e - threshold);
        prev = Some(e);
    }
    Ok(out)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest single sample of the symbol against `gamma`.
pub fn ads_detect(y: &[f64], samples_per_symbol: usize, gamma: f64) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    let mut out = Decisions::with_capacity(s);
    for sym in y.chunks(samples_per_symbol) {
        let peak = max_of(sym);
        out.push(peak > gamma, peak);
    }
    Ok(out)
}

/// ADS on the `m`-th order derivative of the block, ignoring the last `m`
/// samples of every symbol.
pub fn dm_ads_detect(y: &[f64], samples_per_symbol: usize, m: usize, gamma: f64) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    if m >= samples_per_symbol {
        return Err(Error::config(
            "detector.m",
            format!("derivative order m={m} must be below samples per symbol N={samples_per_symbol}"),
        ));
    }
    let ym = derivative_apply(y, m);
    let usable = samples_per_symbol - m;
    let mut out = Decisions::with_capacity(s);
    for sym in ym.chunks(samples_per_symbol) {
        let peak = max_of(&sym[..usable]);
        out.push(peak > gamma, peak);
    }
    Ok(out)
}
