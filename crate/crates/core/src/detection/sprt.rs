//! Per-symbol sequential probability ratio test with decision feedback.
//!
//! Samples of the current symbol are consumed one at a time. After `q`
//! samples the Poisson likelihood ratio between "bit 1" and "bit 0" (means
//! from the tap vector plus the fed-back ISI estimate) is compared with
//! Wald's thresholds. A symbol still undecided after its last sample is
//! settled by the nearer hypothesis mean vector.

use super::{check_stream, Csi, Decisions, DetectorConfig};
use crate::equalization::isi_estimate;
use crate::error::{Error, Result};

/// Detection and false-alarm targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtTargets {
    pub p_d: f64,
    pub p_fa: f64,
}

impl Default for SprtTargets {
    fn default() -> Self {
        Self { p_d: 0.99, p_fa: 0.01 }
    }
}

impl SprtTargets {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_fa && self.p_fa < self.p_d && self.p_d < 1.0) {
            return Err(Error::config(
                "detector.sprt",
                format!("need 0 < P_FA < P_D < 1 (P_D={}, P_FA={})", self.p_d, self.p_fa),
            ));
        }
        Ok(())
    }
}

/// `A = (1 − P_D)/(1 − P_FA)`, `B = P_D/P_FA`.
pub fn sprt_thresholds(t: &SprtTargets) -> Result<(f64, f64)> {
    t.validate()?;
    Ok(((1.0 - t.p_d) / (1.0 - t.p_fa), t.p_d / t.p_fa))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SprtOutput {
    pub decisions: Decisions,
    /// Samples consumed before each decision.
    pub samples_used: Vec<usize>,
    /// Symbols settled by the minimum-distance truncation rule.
    pub truncated: usize,
}

/// DFE-SPRT detection of an on-off keyed stream.
pub fn dfe_sprt_detect(y: &[f64], cfg: &DetectorConfig, csi: &Csi) -> Result<SprtOutput> {
    let (a, b) = sprt_thresholds(&cfg.sprt)?;
    let (ln_a, ln_b) = (a.ln(), b.ln());
    let n = csi.samples_per_symbol();
    let s = check_stream(y, n)?;
    let mut decisions = Decisions::with_capacity(s);
    let mut samples_used = Vec::with_capacity(s);
    let mut truncated = 0;
    let mut decided = vec![0.0; s];
    let mut isi = vec![0.0; n];
    let mut mean0 = vec![0.0; n];
    let mut mean1 = vec![0.0; n];

    for (k, sym) in y.chunks(n).enumerate() {
        isi_estimate(&csi.taps, &decided, k, cfg.feedback_memory, &mut isi);
        for q in 0..n {
            mean0[q] = (isi[q] + csi.lambda_s).max(cfg.log_floor);
            mean1[q] = (csi.pulse * csi.taps.at(0, q) + isi[q] + csi.lambda_s).max(cfg.log_floor);
        }
        let mut llr = 0.0;
        let mut outcome = None;
        for q in 0..n {
            llr += sym[q] * (mean1[q] / mean0[q]).ln() - (mean1[q] - mean0[q]);
            if llr <= ln_a {
                outcome = Some((false, q + 1));
                break;
            }
            if llr >= ln_b {
                outcome = Some((true, q + 1));
                break;
            }
        }
        let (bit, used) = match outcome {
            Some(o) => o,
            None => {
                truncated += 1;
                let d0: f64 = sym.iter().zip(&mean0).map(|(v, m)| (v - m).powi(2)).sum();
                let d1: f64 = sym.iter().zip(&mean1).map(|(v, m)| (v - m).powi(2)).sum();
                (d1 < d0, n)
            }
        };
        decided[k] = if bit { csi.pulse } else { 0.0 };
        decisions.push(bit, llr);
        samples_used.push(used);
    }
    Ok(SprtOutput {
        decisions,
        samples_used,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TapVector;
    use crate::detection::DetectorKind;

    #[test]
    fn wald_thresholds() {
        let (a, b) = sprt_thresholds(&SprtTargets { p_d: 0.99, p_fa: 0.01 }).unwrap();
        assert!((a - 0.01 / 0.99).abs() < 1e-15);
        assert!((a - 0.0101).abs() < 1e-4);
        assert!((b - 99.0).abs() < 1e-12);
        assert!(sprt_thresholds(&SprtTargets { p_d: 0.2, p_fa: 0.2 }).is_err());
        assert!(sprt_thresholds(&SprtTargets { p_d: 1.0, p_fa: 0.2 }).is_err());
    }

    #[test]
    fn undecided_symbols_use_minimum_distance() {
        // weak per-sample evidence never crosses the thresholds
        let csi = Csi::new(TapVector::new(vec![0.01, 0.01], 2).unwrap(), 10.0, 10.0);
        let cfg = DetectorConfig::new(DetectorKind::DfeSprt);
        let out = dfe_sprt_detect(&[10.2, 10.2, 9.9, 9.9], &cfg, &csi).unwrap();
        assert_eq!(out.truncated, 2);
        assert_eq!(out.decisions.bits, vec![true, false]);
        assert_eq!(out.samples_used, vec![2, 2]);
    }

    #[test]
    fn strong_evidence_stops_early() {
        let csi = Csi::new(TapVector::new(vec![0.5, 0.1, 0.1, 0.05, 0.05, 0.0], 3).unwrap(), 0.5, 100.0);
        let cfg = DetectorConfig::new(DetectorKind::DfeSprt);
        let out = dfe_sprt_detect(&[55.0, 9.0, 10.0, 0.0, 5.0, 5.0], &cfg, &csi).unwrap();
        assert_eq!(out.decisions.bits, vec![true, false]);
        assert_eq!(out.samples_used[0], 1);
    }
}
