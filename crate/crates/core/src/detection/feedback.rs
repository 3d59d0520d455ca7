//! Decision-feedback detectors: MLDA and ADDF.
//!
//! Both estimate the mean ISI on every sample of the current symbol from the
//! tap vector and the last `L'` decisions, starting from an all-zero history
//! at the block start.

use super::{check_stream, Csi, Decisions, DetectorConfig};
use crate::equalization::isi_estimate;
use crate::error::Result;

/// Adaptive MLDA threshold for one-sample symbols:
/// `γ[k] = 2M·h1 / ln((2M·h1 + I + N·λ_s) / (I + N·λ_s))`.
pub fn mlda_threshold(pulse_h1: f64, isi: f64, noise: f64, log_floor: f64) -> f64 {
    let base = (isi + noise).max(log_floor);
    pulse_h1 / ((pulse_h1 + base) / base).ln()
}

/// Poisson log-likelihood ratio of bit 1 vs bit 0 for one symbol given the
/// per-sample ISI means.
pub(crate) fn symbol_llr(y: &[f64], csi: &Csi, isi: &[f64], log_floor: f64) -> f64 {
    let mut llr = 0.0;
    for (q, (&yq, &iq)) in y.iter().zip(isi).enumerate() {
        let signal = csi.pulse * csi.taps.at(0, q);
        let l0 = (iq + csi.lambda_s).max(log_floor);
        let l1 = (signal + iq + csi.lambda_s).max(log_floor);
        llr += yq * (l1 / l0).ln() - (l1 - l0);
    }
    llr
}

/// MLDA: symbol-by-symbol likelihood ratio test with decision-feedback ISI
/// estimates. The statistic is the log-likelihood ratio, compared with 0.
pub fn mlda_detect(y: &[f64], cfg: &DetectorConfig, csi: &Csi) -> Result<Decisions> {
    let n = csi.samples_per_symbol();
    let s = check_stream(y, n)?;
    let mut out = Decisions::with_capacity(s);
    let mut decided = vec![0.0; s];
    let mut isi = vec![0.0; n];
    for (k, sym) in y.chunks(n).enumerate() {
        isi_estimate(&csi.taps, &decided, k, cfg.feedback_memory, &mut isi);
        let llr = symbol_llr(sym, csi, &isi, cfg.log_floor);
        let bit = llr > 0.0;
        decided[k] = if bit { csi.pulse } else { 0.0 };
        out.push(bit, llr);
    }
    Ok(out)
}

/// MLDA with externally supplied ISI means `isi[k][q]` (e.g. the true ISI
/// for a genie-aided receiver).
pub fn mlda_detect_with_isi(y: &[f64], csi: &Csi, isi: &[Vec<f64>], log_floor: f64) -> Result<Decisions> {
    let n = csi.samples_per_symbol();
    let s = check_stream(y, n)?;
    let mut out = Decisions::with_capacity(s);
    for (sym, i) in y.chunks(n).zip(isi) {
        let llr = symbol_llr(sym, csi, i, log_floor);
        out.push(llr > 0.0, llr);
    }
    Ok(out)
}

/// ADDF: the largest ISI-corrected sample of the symbol against `gamma`.
/// Corrected samples may be negative.
pub fn addf_detect(y: &[f64], cfg: &DetectorConfig, csi: &Csi) -> Result<Decisions> {
    let n = csi.samples_per_symbol();
    let s = check_stream(y, n)?;
    let mut out = Decisions::with_capacity(s);
    let mut decided = vec![0.0; s];
    let mut isi = vec![0.0; n];
    for (k, sym) in y.chunks(n).enumerate() {
        isi_estimate(&csi.taps, &decided, k, cfg.feedback_memory, &mut isi);
        let peak = sym
            .iter()
            .zip(&isi)
            .map(|(v, i)| v - i)
            .fold(f64::NEG_INFINITY, f64::max);
        let bit = peak > cfg.gamma;
        decided[k] = if bit { csi.pulse } else { 0.0 };
        out.push(bit, peak);
    }
    Ok(out)
}
