//! Pre-processing and pre-coding blocks that can sit in front of any detector.

use crate::channel::{EmissionSchedule, TapVector};
use crate::error::{Error, Result};

/// Applies the forward-difference matrix `m` times:
/// `y'[n] = y[n+1] − y[n]`, with the last row `y'[last] = −y[last]`.
pub fn derivative_apply(y: &[f64], m: usize) -> Vec<f64> {
    let mut out = y.to_vec();
    derivative_in_place(&mut out, m);
    out
}

pub fn derivative_in_place(y: &mut [f64], m: usize) {
    let len = y.len();
    if len == 0 {
        return;
    }
    for _ in 0..m {
        for n in 0..len - 1 {
            y[n] = y[n + 1] - y[n];
        }
        y[len - 1] = -y[len - 1];
    }
}

/// `Dᵐ` applied to the tap vector, for inspecting tail compression.
pub fn derivative_taps(h: &TapVector, m: usize) -> Vec<f64> {
    derivative_apply(h.as_slice(), m)
}

/// Estimated ISI on each sample of symbol `k` from the decided emissions of
/// the previous `feedback` symbols: `Î_q[k] = Σ_{i=2}^{L'+1} h[(i−1)N+q]·x̂[k−i+1]`,
/// capped at the channel memory.
pub fn isi_estimate(taps: &TapVector, decided: &[f64], k: usize, feedback: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let max_lag = feedback.min(taps.memory().saturating_sub(1)).min(k);
    for lag in 1..=max_lag {
        let x = decided[k - lag];
        if x == 0.0 {
            continue;
        }
        for (q, o) in out.iter_mut().enumerate() {
            *o += x * taps.at(lag, q);
        }
    }
}

/// Subtracts the decision-feedback ISI estimate from every sample.
/// `decided[k]` is the emission the receiver believes was sent for symbol `k`.
pub fn dfe_subtract(y: &[f64], decided: &[f64], taps: &TapVector, feedback: usize) -> Result<Vec<f64>> {
    let n = taps.samples_per_symbol();
    if !y.len().is_multiple_of(n) || y.len() / n != decided.len() {
        return Err(Error::Usage(format!(
            "{} samples do not match {} decisions at {n} samples/symbol",
            y.len(),
            decided.len()
        )));
    }
    let mut isi = vec![0.0; n];
    let mut out = y.to_vec();
    for (k, sym) in out.chunks_mut(n).enumerate() {
        isi_estimate(taps, decided, k, feedback, &mut isi);
        sym.iter_mut().zip(&isi).for_each(|(v, i)| *v -= i);
    }
    Ok(out)
}

/// ATRaCT-style transmitter pre-equalization for on-off keying.
///
/// Each bit-1 emission is chosen so that the expected count in its symbol
/// window (its own contribution plus the ISI predicted from earlier
/// emissions) equals a constant level; bit-0 emits nothing. The schedule is
/// then rescaled so the block averages `m` molecules per bit.
pub fn atract_precode(bits: &[bool], taps: &TapVector, m: f64) -> Result<EmissionSchedule> {
    let n = taps.samples_per_symbol();
    let own: f64 = (0..n).map(|q| taps.at(0, q)).sum();
    if !(own > 0.0) {
        return Err(Error::Domain("first-symbol taps are zero; cannot pre-equalize".into()));
    }
    let level = 2.0 * m * own;
    let mut amounts = vec![0.0; bits.len()];
    let mut isi = vec![0.0; n];
    let memory = taps.memory();
    for k in 0..bits.len() {
        if !bits[k] {
            continue;
        }
        isi_estimate(taps, &amounts, k, memory, &mut isi);
        let predicted: f64 = isi.iter().sum();
        amounts[k] = (level - predicted).max(0.0) / own;
    }
    let total: f64 = amounts.iter().sum();
    if total > 0.0 {
        let scale = m * bits.len() as f64 / total;
        amounts.iter_mut().for_each(|a| *a *= scale);
    }
    let mut x = EmissionSchedule::zeros(1, bits.len(), n);
    for (k, a) in amounts.into_iter().enumerate() {
        x.channels[0][k * n] = a;
    }
    Ok(x)
}

/// Two-type A−B pre-equalization: every type-A emission is mirrored on type B
/// `delay` samples later with `scale` times the molecules. The receiver uses
/// `y_A − y_B`.
pub fn ab_preequalize(primary: &EmissionSchedule, delay: usize, scale: f64) -> Result<EmissionSchedule> {
    if primary.num_channels() != 1 {
        return Err(Error::Usage("A−B pre-equalization needs a single-type schedule".into()));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("A−B scale must be >= 0 (got {scale})")));
    }
    let a = &primary.channels[0];
    let mut b = vec![0.0; a.len()];
    if delay < a.len() {
        for (dst, src) in b[delay..].iter_mut().zip(a) {
            *dst = scale * src;
        }
    }
    Ok(EmissionSchedule {
        channels: vec![a.clone(), b],
        samples_per_symbol: primary.samples_per_symbol,
        symbols: primary.symbols,
    })
}

/// Receiver statistic of the A−B scheme; may be negative.
pub fn ab_difference(y_a: &[f64], y_b: &[f64]) -> Vec<f64> {
    y_a.iter().zip(y_b).map(|(a, b)| a - b).collect()
}

/// Effective single-type impulse response `h[k] − s·h[k−d]`.
pub fn ab_effective_taps(h: &[f64], delay: usize, scale: f64) -> Vec<f64> {
    (0..h.len())
        .map(|k| h[k] - if k >= delay { scale * h[k - delay] } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_taps, mean_arrivals, ChannelGeometry, NoiseModel, SamplingGrid};

    #[test]
    fn derivative_small_example() {
        assert_eq!(derivative_apply(&[1.0, 2.0, 4.0], 1), vec![1.0, 2.0, -4.0]);
        assert_eq!(derivative_apply(&[1.0, 2.0, 4.0], 0), vec![1.0, 2.0, 4.0]);
        assert_eq!(derivative_apply(&[1.0, 2.0, 4.0], 2), vec![1.0, -6.0, 4.0]);
    }

    #[test]
    fn derivative_annihilates_constants_away_from_boundary() {
        let y = vec![3.5; 12];
        for m in 1..4 {
            let d = derivative_apply(&y, m);
            for v in &d[..12 - m] {
                assert_eq!(*v, 0.0);
            }
            assert!(d[12 - m..].iter().any(|v| *v != 0.0));
        }
    }

    #[test]
    fn isi_estimate_respects_feedback_and_memory() {
        let taps = TapVector::new(vec![0.5, 0.25, 0.125, 0.0625], 1).unwrap();
        let decided = [10.0, 20.0, 40.0];
        let mut out = [0.0];
        isi_estimate(&taps, &decided, 3, 10, &mut out);
        assert!((out[0] - (0.25 * 40.0 + 0.125 * 20.0 + 0.0625 * 10.0)).abs() < 1e-12);
        isi_estimate(&taps, &decided, 3, 1, &mut out);
        assert!((out[0] - 10.0).abs() < 1e-12);
        isi_estimate(&taps, &decided, 0, 10, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn dfe_with_zero_history_is_identity() {
        let taps = TapVector::new(vec![0.3, 0.2, 0.1, 0.05], 2).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(dfe_subtract(&y, &[0.0; 3], &taps, 1).unwrap(), y);
    }

    #[test]
    fn dfe_perfect_decisions_isolate_symbol_response() {
        let geom = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
        let grid = SamplingGrid::new(0.1, 5, 6, 0.0).unwrap();
        let h = build_taps(&geom, &grid).unwrap();
        let emit = [100.0, 0.0, 100.0, 100.0, 0.0, 100.0, 100.0, 100.0];
        let mut x = EmissionSchedule::zeros(1, emit.len(), 5);
        for (k, e) in emit.iter().enumerate() {
            x.channels[0][k * 5] = *e;
        }
        let lambda = 0.7;
        let y = mean_arrivals(&x, &h, &NoiseModel::new(lambda).unwrap()).unwrap();
        let z = dfe_subtract(&y.channels[0], &emit, &h, 6).unwrap();
        for (k, e) in emit.iter().enumerate() {
            for q in 0..5 {
                let want = e * h.at(0, q) + lambda;
                assert!((z[k * 5 + q] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ab_with_zero_scale_is_plain() {
        let mut x = EmissionSchedule::zeros(1, 4, 1);
        x.channels[0][1] = 5.0;
        let ab = ab_preequalize(&x, 1, 0.0).unwrap();
        assert!(ab.channels[1].iter().all(|v| *v == 0.0));
        let ab = ab_preequalize(&x, 1, 0.5).unwrap();
        assert_eq!(ab.channels[1], vec![0.0, 0.0, 2.5, 0.0]);
    }
}
