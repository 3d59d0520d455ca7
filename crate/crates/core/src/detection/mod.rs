//! Detectors and equalizing receivers.
//!
//! Binary on-off streams are handled by the threshold family ([`threshold`]),
//! the decision-feedback family ([`feedback`]), sequence detection
//! ([`mlsd`]) and the sequential test ([`sprt`]). Multi-level and multi-type
//! schemes use maximum-count rules ([`mcd`]).
//!
//! Ties always resolve to bit 0 or to the lowest index; every comparison
//! against a threshold is strict.

pub mod feedback;
pub mod mcd;
pub mod mlsd;
pub mod sprt;
pub mod threshold;

use std::fmt;
use std::str::FromStr;

use crate::channel::{SampleSeries, TapVector};
use crate::error::{Error, Result};
use crate::modulation::{SchemeDescriptor, SchemeKind};

pub use feedback::{addf_detect, mlda_detect, mlda_detect_with_isi, mlda_threshold};
pub use mcd::{mcd_detect, mcpm_two_stage_detect};
pub use mlsd::{mlsd_viterbi, MlsdOutput};
pub use sprt::{dfe_sprt_detect, sprt_thresholds, SprtTargets};
pub use threshold::{ads_detect, atd_detect, dm_ads_detect, ftd_detect, ftd_optimal_threshold};

/// Floor substituted for zero rates inside logarithms.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Ftd,
    Atd,
    Mlda,
    Mlsd,
    BandedMlsd,
    Ads,
    Addf,
    DmAds,
    DfeSprt,
    Mcd,
    Mcpm2Stage,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 11] = [
        DetectorKind::Ftd,
        DetectorKind::Atd,
        DetectorKind::Mlda,
        DetectorKind::Mlsd,
        DetectorKind::BandedMlsd,
        DetectorKind::Ads,
        DetectorKind::Addf,
        DetectorKind::DmAds,
        DetectorKind::DfeSprt,
        DetectorKind::Mcd,
        DetectorKind::Mcpm2Stage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Ftd => "ftd",
            DetectorKind::Atd => "atd",
            DetectorKind::Mlda => "mlda",
            DetectorKind::Mlsd => "mlsd",
            DetectorKind::BandedMlsd => "banded-mlsd",
            DetectorKind::Ads => "ads",
            DetectorKind::Addf => "addf",
            DetectorKind::DmAds => "dm-ads",
            DetectorKind::DfeSprt => "dfe-sprt",
            DetectorKind::Mcd => "mcd",
            DetectorKind::Mcpm2Stage => "mcpm-2stage",
        }
    }

    /// Detectors that need the tap vector and noise floor.
    pub fn needs_csi(&self) -> bool {
        matches!(
            self,
            DetectorKind::Mlda
                | DetectorKind::Mlsd
                | DetectorKind::BandedMlsd
                | DetectorKind::Addf
                | DetectorKind::DfeSprt
        )
    }

    /// Detectors whose decision compares a statistic against `gamma`.
    pub fn uses_gamma(&self) -> bool {
        matches!(
            self,
            DetectorKind::Ftd
                | DetectorKind::Ads
                | DetectorKind::Addf
                | DetectorKind::DmAds
                | DetectorKind::Mcpm2Stage
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("detector.kind", format!("unknown detector `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub gamma: f64,
    /// Past decisions used for ISI estimation (`L'`).
    pub feedback_memory: usize,
    /// Derivative order `m` for the Dᵐ-ADS receiver.
    pub derivative_order: usize,
    pub sprt: SprtTargets,
    /// Trellis memory `L''` in symbols for sequence detection.
    pub band: usize,
    pub log_floor: f64,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            gamma: 0.0,
            feedback_memory: usize::MAX,
            derivative_order: 0,
            sprt: SprtTargets::default(),
            band: 1,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_feedback(mut self, feedback_memory: usize) -> Self {
        self.feedback_memory = feedback_memory;
        self
    }

    pub fn with_derivative(mut self, m: usize) -> Self {
        self.derivative_order = m;
        self
    }

    pub fn with_band(mut self, band: usize) -> Self {
        self.band = band;
        self
    }

    pub fn with_sprt(mut self, sprt: SprtTargets) -> Self {
        self.sprt = sprt;
        self
    }

    /// Checks the invariants that do not depend on the channel.
    pub fn validate(&self, samples_per_symbol: usize, memory: usize) -> Result<()> {
        if self.kind == DetectorKind::DmAds && self.derivative_order >= samples_per_symbol {
            return Err(Error::config(
                "detector.m",
                format!(
                    "derivative order m={} must be below samples per symbol N={samples_per_symbol}",
                    self.derivative_order
                ),
            ));
        }
        if matches!(self.kind, DetectorKind::Mlsd | DetectorKind::BandedMlsd)
            && (self.band == 0 || self.band > memory)
        {
            return Err(Error::config(
                "detector.band",
                format!("band L''={} must be in 1..={memory}", self.band),
            ));
        }
        if self.kind == DetectorKind::DfeSprt {
            self.sprt.validate()?;
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::config("detector.log_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Receiver-side channel knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct Csi {
    pub taps: TapVector,
    pub lambda_s: f64,
    /// Molecules emitted for a bit-1.
    pub pulse: f64,
}

impl Csi {
    pub fn new(taps: TapVector, lambda_s: f64, pulse: f64) -> Self {
        Self {
            taps,
            lambda_s,
            pulse,
        }
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.taps.samples_per_symbol()
    }
}

/// Hard decisions plus the per-symbol statistic each decision was based on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decisions {
    pub bits: Vec<bool>,
    pub stats: Vec<f64>,
}

impl Decisions {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            bits: Vec::with_capacity(n),
            stats: Vec::with_capacity(n),
        }
    }

    pub(crate) fn push(&mut self, bit: bool, stat: f64) {
        self.bits.push(bit);
        self.stats.push(stat);
    }
}

pub(crate) fn require_csi(csi: Option<&Csi>, kind: DetectorKind) -> Result<&Csi> {
    csi.ok_or_else(|| Error::config("detector.csi", format!("{kind} needs channel state information")))
}

pub(crate) fn check_stream(y: &[f64], n: usize) -> Result<usize> {
    if n == 0 || !y.len().is_multiple_of(n) {
        return Err(Error::Usage(format!(
            "{} samples is not a whole number of {n}-sample symbols",
            y.len()
        )));
    }
    Ok(y.len() / n)
}

/// Detects an on-off keyed stream with any binary detector.
pub fn detect_binary(
    y: &[f64],
    samples_per_symbol: usize,
    cfg: &DetectorConfig,
    csi: Option<&Csi>,
) -> Result<Decisions> {
    match cfg.kind {
        DetectorKind::Ftd => ftd_detect(y, samples_per_symbol, cfg.gamma),
        DetectorKind::Atd => atd_detect(y, samples_per_symbol, cfg.gamma),
        DetectorKind::Ads => ads_detect(y, samples_per_symbol, cfg.gamma),
        DetectorKind::DmAds => dm_ads_detect(y, samples_per_symbol, cfg.derivative_order, cfg.gamma),
        DetectorKind::Mlda => mlda_detect(y, cfg, require_csi(csi, cfg.kind)?),
        DetectorKind::Addf => addf_detect(y, cfg, require_csi(csi, cfg.kind)?),
        DetectorKind::DfeSprt => dfe_sprt_detect(y, cfg, require_csi(csi, cfg.kind)?).map(|o| o.decisions),
        DetectorKind::Mlsd | DetectorKind::BandedMlsd => {
            let csi = require_csi(csi, cfg.kind)?;
            let band = if cfg.kind == DetectorKind::Mlsd {
                csi.taps.memory()
            } else {
                cfg.band
            };
            let out = mlsd_viterbi(y, csi, band, cfg.log_floor)?;
            let stats = vec![0.0; out.bits.len()];
            Ok(Decisions {
                bits: out.bits,
                stats,
            })
        }
        DetectorKind::Mcd | DetectorKind::Mcpm2Stage => Err(Error::config(
            "detector.kind",
            format!("{} is not a binary on-off detector", cfg.kind),
        )),
    }
}

/// Recovers the bit stream of any scheme from its received series.
///
/// Binary on-off streams accept every binary detector; PPM and the
/// molecule-type schemes use maximum-count detection; MCPM uses the
/// two-stage detector; D-MoSK and MCSK threshold each type-stream.
pub fn demodulate(
    y: &SampleSeries,
    scheme: &SchemeDescriptor,
    samples_per_symbol: usize,
    cfg: &DetectorConfig,
    csi: Option<&Csi>,
) -> Result<Decisions> {
    if y.num_channels() != scheme.num_channels() {
        return Err(Error::Usage(format!(
            "{} receive channels for a {}-channel scheme",
            y.num_channels(),
            scheme.num_channels()
        )));
    }
    match scheme.kind {
        SchemeKind::Bcsk => detect_binary(y.channel(0), samples_per_symbol, cfg, csi),
        SchemeKind::Ppm => mcd::ppm_detect(y.channel(0), samples_per_symbol, scheme.order),
        SchemeKind::Mcpm => {
            mcpm_two_stage_detect(y.channel(0), samples_per_symbol, scheme.order, cfg.gamma)
        }
        SchemeKind::Mosk | SchemeKind::Mssk => mcd::mosk_detect(y, samples_per_symbol),
        SchemeKind::Gmosk => mcd::gmosk_detect(y, samples_per_symbol, scheme),
        SchemeKind::Maaf => mcd::maaf_detect(y, samples_per_symbol, scheme),
        SchemeKind::Dmosk => mcd::dual_type_detect(y, samples_per_symbol, cfg.gamma, 2),
        SchemeKind::Mcsk => mcd::dual_type_detect(y, samples_per_symbol, cfg.gamma, 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("nope".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let dm = DetectorConfig::new(DetectorKind::DmAds).with_derivative(5);
        assert!(dm.validate(5, 40).is_err());
        assert!(dm.with_derivative(4).validate(5, 40).is_ok());
        let ml = DetectorConfig::new(DetectorKind::BandedMlsd).with_band(5);
        assert!(ml.validate(1, 4).is_err());
        let sp = DetectorConfig::new(DetectorKind::DfeSprt).with_sprt(SprtTargets {
            p_d: 0.1,
            p_fa: 0.2,
        });
        assert!(sp.validate(5, 4).is_err());
    }

    #[test]
    fn coherent_detector_without_csi_errors() {
        let y = vec![0.0; 10];
        let err = detect_binary(&y, 5, &DetectorConfig::new(DetectorKind::Mlda), None).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
