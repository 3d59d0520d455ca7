//! Seeded Monte Carlo BER engine, parameter optimization and sweeps.
//!
//! Every block draws its bits and arrivals from streams keyed by
//! `(seed, block)`, so links that share a scheme and precoder see identical
//! channel realizations at a point (common random numbers), and results do
//! not depend on the thread count. Blocks start with an empty channel and
//! cold detector feedback.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    build_taps, lagged_taps, simulate_arrivals_coupled, simulate_arrivals_gaussian, simulate_arrivals_in_block,
    EmissionSchedule, NoiseModel, SampleSeries, SamplingGrid, TapVector,
};
use crate::config::{ArrivalModel, CsiMode, ExperimentConfig, LinkSpec, NoiseSpec, OptParam, Precoder, SweepVar};
use crate::detection::{demodulate, Csi, DetectorConfig, DetectorKind};
use crate::equalization::{ab_difference, ab_preequalize, atract_precode};
use crate::error::{Error, Result};
use crate::estimation::{estimate_noise_rate, ls_channel_estimate, PilotBlock};
use crate::modulation::{bits_per_symbol, modulate, scheme_grid, PowerBudget, SchemeDescriptor};
use crate::rng::{derive_seed, Purpose, StreamKey};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// `λ_s = M / (N·10^(snr/10))` with `N` samples per bit.
pub fn snr_to_noise(m: f64, samples_per_bit: f64, snr_db: f64) -> Result<f64> {
    let snr = 10f64.powf(snr_db / 10.0);
    if !(snr > 0.0) || !(samples_per_bit > 0.0) || !(m >= 0.0) {
        return Err(Error::Domain(format!(
            "cannot convert SNR {snr_db} dB with M={m}, N={samples_per_bit}"
        )));
    }
    Ok(m / (samples_per_bit * snr))
}

/// Wilson score interval for `errors` out of `trials` at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// One BER measurement for one link at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub scheme: String,
    pub detector: String,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Tuned parameter values, in tuning order.
    pub optimized: Vec<(String, f64)>,
    pub seed: u64,
    pub runtime_s: f64,
}

impl BerReport {
    pub fn new(bits: u64, errors: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits);
        Self {
            sweep_var: SweepVar::M,
            sweep_value: 0.0,
            scheme: String::new(),
            detector: String::new(),
            bits,
            errors,
            ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
            ci_low,
            ci_high,
            optimized: Vec::new(),
            seed: 0,
            runtime_s: 0.0,
        }
    }
}

/// A link bound to the channel of one sweep point.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    pub scheme: SchemeDescriptor,
    pub detector: DetectorConfig,
    pub precoder: Precoder,
    pub leakage: f64,
    pub grid: SamplingGrid,
    /// True channel, including the timing offset.
    pub taps: TapVector,
    /// Channel of the synchronized link, known to a precoding transmitter.
    pub synced_taps: TapVector,
    /// Samples by which `taps` runs ahead of the receiver clock.
    pub lead: usize,
    pub noise: NoiseModel,
    pub budget: PowerBudget,
    /// Receiver channel knowledge (synchronized or estimated).
    pub csi: Option<Csi>,
    pub block_symbols: usize,
    pub bits_per_symbol: usize,
    pub arrivals: ArrivalModel,
}

impl PreparedLink {
    pub fn new(cfg: &ExperimentConfig, link: &LinkSpec) -> Result<Self> {
        let scheme = link.scheme;
        let b = bits_per_symbol(&scheme)?;
        let grid = scheme_grid(&scheme, cfg.t_b, cfg.samples_per_slot, cfg.memory, cfg.tau)?;
        let (taps, lead) = lagged_taps(&cfg.geometry, &grid)?;
        let synced_taps = build_taps(&cfg.geometry, &grid.with_tau(0.0))?;
        let lambda_s = match cfg.noise {
            NoiseSpec::SnrDb(s) => snr_to_noise(cfg.m, grid.samples_per_symbol as f64 / b as f64, s)?,
            NoiseSpec::Rate(l) => l,
        };
        let mut p = Self {
            scheme,
            detector: link.detector,
            precoder: link.precoder,
            leakage: link.leakage,
            grid,
            taps,
            synced_taps,
            lead,
            noise: NoiseModel::new(lambda_s)?,
            budget: PowerBudget::new(cfg.m)?,
            csi: None,
            block_symbols: cfg.sim.block_symbols,
            bits_per_symbol: b,
            arrivals: cfg.sim.arrivals,
        };
        if link.detector.kind.needs_csi() {
            p.csi = Some(match cfg.sim.csi {
                CsiMode::Oracle => Csi::new(p.synced_taps.clone(), lambda_s, 2.0 * cfg.m),
                CsiMode::Estimated => p.estimate_csi(cfg)?,
            });
        }
        Ok(p)
    }

    fn estimate_csi(&self, cfg: &ExperimentConfig) -> Result<Csi> {
        let n = self.grid.samples_per_symbol;
        let pulse = 2.0 * self.budget.m;
        let pilots = PilotBlock::default_pattern(cfg.pilot_symbols(), cfg.memory)?;
        let mut x = EmissionSchedule::zeros(1, pilots.len(), n);
        for (k, &b) in pilots.bits().iter().enumerate() {
            if b {
                x.channels[0][k * n] = pulse;
            }
        }
        let seed = derive_seed(cfg.sim.seed, Purpose::Pilot as u64);
        let y = simulate_arrivals_in_block(&x, &self.synced_taps, &self.noise, seed, 0)?;
        let mut rng = StreamKey::new(seed, Purpose::Pilot, 0, 1).rng();
        let silent: Vec<f64> = (0..cfg.sim.silent_samples)
            .map(|_| crate::channel::poisson_draw(&mut rng, self.noise.lambda_s))
            .collect();
        let lambda_hat = estimate_noise_rate(&silent)?;
        let taps = ls_channel_estimate(&pilots, pulse, y.channel(0), lambda_hat, &self.grid)?;
        Ok(Csi::new(taps, lambda_hat, pulse))
    }

    pub fn bits_per_block(&self) -> usize {
        self.block_symbols * self.bits_per_symbol
    }

    /// Random equiprobable bits of block `block`.
    pub fn block_bits(&self, seed: u64, block: u64) -> Vec<bool> {
        let mut rng = StreamKey::new(seed, Purpose::Bits, block, 0).rng();
        (0..self.bits_per_block()).map(|_| rng.random()).collect()
    }

    pub fn transmit(&self, bits: &[bool]) -> Result<EmissionSchedule> {
        match self.precoder {
            Precoder::None => modulate(bits, &self.scheme, &self.budget, &self.grid),
            Precoder::Atract => atract_precode(bits, &self.synced_taps, self.budget.m),
            Precoder::Ab { delay, scale } => {
                let share = PowerBudget::new(self.budget.m / (1.0 + scale))?;
                let primary = modulate(bits, &self.scheme, &share, &self.grid)?;
                ab_preequalize(&primary, delay, scale)
            }
        }
    }

    /// Samples the receiver observes for block `block`, with the sent bits.
    pub fn receive(&self, seed: u64, block: u64) -> Result<(Vec<bool>, SampleSeries)> {
        let bits = self.block_bits(seed, block);
        let mut x = self.transmit(&bits)?;
        let len = x.len();
        if self.lead > 0 {
            let extra = self.lead.div_ceil(x.samples_per_symbol);
            x.symbols += extra;
            for ch in &mut x.channels {
                ch.resize(x.symbols * x.samples_per_symbol, 0.0);
            }
        }
        let y = match self.arrivals {
            ArrivalModel::Gaussian => simulate_arrivals_gaussian(&x, &self.taps, &self.noise, seed, block)?,
            ArrivalModel::Poisson if self.leakage > 0.0 => {
                let c = x.num_channels();
                let coupling: Vec<Vec<f64>> = (0..c)
                    .map(|i| (0..c).map(|j| if i == j { 1.0 } else { self.leakage }).collect())
                    .collect();
                simulate_arrivals_coupled(&x, &self.taps, &coupling, &self.noise, seed, block)?
            }
            ArrivalModel::Poisson => simulate_arrivals_in_block(&x, &self.taps, &self.noise, seed, block)?,
        };
        let y = SampleSeries {
            channels: y
                .channels
                .into_iter()
                .map(|c| c[self.lead..self.lead + len].to_vec())
                .collect(),
        };
        let y = match self.precoder {
            Precoder::Ab { .. } => SampleSeries {
                channels: vec![ab_difference(y.channel(0), y.channel(1))],
            },
            _ => y,
        };
        Ok((bits, y))
    }

    pub fn detect(&self, y: &SampleSeries) -> Result<Vec<bool>> {
        let scheme = match self.precoder {
            Precoder::Ab { .. } => SchemeDescriptor::bcsk(),
            _ => self.scheme,
        };
        let d = demodulate(y, &scheme, self.grid.samples_per_symbol, &self.detector, self.csi.as_ref())?;
        Ok(d.bits)
    }

    fn errors_in(&self, bits: &[bool], y: &SampleSeries) -> Result<u64> {
        let decided = self.detect(y)?;
        if decided.len() != bits.len() {
            return Err(Error::Usage(format!(
                "detector returned {} bits for {} sent",
                decided.len(),
                bits.len()
            )));
        }
        Ok(bits.iter().zip(&decided).filter(|(a, b)| a != b).count() as u64)
    }

    /// Bits and bit errors of one block.
    pub fn block_errors(&self, seed: u64, block: u64) -> Result<(u64, u64)> {
        let (bits, y) = self.receive(seed, block)?;
        Ok((bits.len() as u64, self.errors_in(&bits, &y)?))
    }
}

/// Simulates blocks in fixed chunks until the stopping rule is met.
pub fn run_link(p: &PreparedLink, cfg: &ExperimentConfig) -> Result<(u64, u64)> {
    let s = &cfg.sim;
    let chunk = s.chunk_blocks as u64;
    let (mut bits, mut errors, mut next) = (0u64, 0u64, 0u64);
    loop {
        let parts = (next..next + chunk)
            .into_par_iter()
            .map(|b| p.block_errors(s.seed, b))
            .collect::<Result<Vec<_>>>()?;
        for (b, e) in parts {
            bits += b;
            errors += e;
        }
        next += chunk;
        if (errors >= s.target_errors && bits >= s.min_bits) || bits >= s.max_bits {
            return Ok((bits, errors));
        }
    }
}

/// Parameter values chosen by the optimizer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tuned {
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub derivative: Option<usize>,
    pub ab: Option<(usize, f64)>,
    /// Bit errors on the training set at the chosen values.
    pub training_errors: u64,
    pub training_bits: u64,
}

impl Tuned {
    pub fn apply(&self, link: &mut LinkSpec) {
        if let Some(a) = self.alpha {
            link.scheme.alpha = a;
        }
        if let Some(m) = self.derivative {
            link.detector.derivative_order = m;
        }
        if let Some((delay, scale)) = self.ab {
            link.precoder = Precoder::Ab { delay, scale };
        }
        if let Some(g) = self.gamma {
            link.detector.gamma = g;
        }
    }

    /// `(name, value)` pairs for reporting.
    pub fn params(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if let Some(a) = self.alpha {
            out.push(("alpha".into(), a));
        }
        if let Some(m) = self.derivative {
            out.push(("m".into(), m as f64));
        }
        if let Some((d, s)) = self.ab {
            out.push(("ab_delay".into(), d as f64));
            out.push(("ab_scale".into(), s));
        }
        if let Some(g) = self.gamma {
            out.push(("gamma".into(), g));
        }
        out
    }

    pub fn training_ber(&self) -> f64 {
        if self.training_bits == 0 {
            0.0
        } else {
            self.training_errors as f64 / self.training_bits as f64
        }
    }
}

/// Received training blocks, reused by every candidate of one search.
struct TrainingSet {
    blocks: Vec<(Vec<bool>, SampleSeries)>,
    bits: u64,
}

fn training_seed(cfg: &ExperimentConfig) -> u64 {
    derive_seed(cfg.sim.seed, Purpose::Training as u64)
}

fn training_set(p: &PreparedLink, cfg: &ExperimentConfig) -> Result<TrainingSet> {
    let per = p.bits_per_block() as u64;
    let n = cfg.optimizer.training_bits.div_ceil(per).max(1);
    let seed = training_seed(cfg);
    let blocks = (0..n)
        .into_par_iter()
        .map(|b| p.receive(seed, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet { blocks, bits: n * per })
}

fn training_errors(p: &PreparedLink, set: &TrainingSet) -> Result<u64> {
    set.blocks
        .par_iter()
        .map(|(bits, y)| p.errors_in(bits, y))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Index of the best score; among equal minima, the middle of the first run
/// of consecutive minima.
fn plateau_argmin(scores: &[u64]) -> usize {
    let best = *scores.iter().min().unwrap_or(&0);
    let start = scores.iter().position(|&s| s == best).unwrap_or(0);
    let len = scores[start..].iter().take_while(|&&s| s == best).count();
    start + (len - 1) / 2
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Range of decision statistics the threshold can usefully sit in.
fn gamma_range(p: &PreparedLink, set: &TrainingSet) -> Result<(f64, f64)> {
    let mut probe = p.clone();
    if probe.detector.kind == DetectorKind::Atd {
        probe.detector.kind = DetectorKind::Ftd;
    }
    let scheme = match p.precoder {
        Precoder::Ab { .. } => SchemeDescriptor::bcsk(),
        _ => p.scheme,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in [f64::INFINITY, f64::NEG_INFINITY] {
        probe.detector.gamma = g;
        for (_, y) in &set.blocks {
            let d = demodulate(y, &scheme, p.grid.samples_per_symbol, &probe.detector, p.csi.as_ref())?;
            for s in d.stats.into_iter().filter(|s| s.is_finite()) {
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("no finite detector statistics to place a threshold".into()));
    }
    // one step below the smallest statistic decides every symbol as 1
    Ok((lo - 1.0, hi))
}

/// Coarse grid over the statistic range, then repeated local refinement.
fn search_gamma(p: &mut PreparedLink, set: &TrainingSet, cfg: &ExperimentConfig) -> Result<(f64, u64)> {
    let o = &cfg.optimizer;
    let (lo, hi) = gamma_range(p, set)?;
    let mut cands = linspace(lo, hi, o.grid_points);
    let mut best = (cands[0], u64::MAX);
    for round in 0..=o.refine_rounds {
        let scores = cands
            .iter()
            .map(|&g| {
                p.detector.gamma = g;
                training_errors(p, set)
            })
            .collect::<Result<Vec<_>>>()?;
        let i = plateau_argmin(&scores);
        if scores[i] < best.1 || round == 0 {
            best = (cands[i], scores[i]);
        }
        if round == o.refine_rounds || cands.len() < 2 {
            break;
        }
        let a = cands[i.saturating_sub(1)];
        let b = cands[(i + 1).min(cands.len() - 1)];
        cands = linspace(a, b, o.refine_points);
    }
    p.detector.gamma = best.0;
    Ok(best)
}

/// Tunes the parameters a link asks for on training data drawn from a
/// separate seed, with the receiver assuming a synchronized channel.
pub fn tune_link(cfg: &ExperimentConfig, link: &LinkSpec) -> Result<Tuned> {
    let wants_gamma = link.optimizes(OptParam::Gamma) && link.detector.kind.uses_gamma();
    let synced = cfg.at(SweepVar::Tau, 0.0);
    let mut tuned = Tuned::default();
    if link.optimize.is_empty() {
        return Ok(tuned);
    }

    let inner = |l: &LinkSpec| -> Result<(Option<f64>, u64, u64)> {
        let mut p = PreparedLink::new(&synced, l)?;
        let set = training_set(&p, &synced)?;
        if wants_gamma {
            let (g, e) = search_gamma(&mut p, &set, &synced)?;
            Ok((Some(g), e, set.bits))
        } else {
            Ok((None, training_errors(&p, &set)?, set.bits))
        }
    };

    let o = &cfg.optimizer;
    if link.optimizes(OptParam::Alpha) {
        let mut grid = o.alpha_grid.clone();
        let mut chosen = None;
        for round in 0..2 {
            let results = grid
                .iter()
                .map(|&a| {
                    let mut l = link.clone();
                    l.scheme.alpha = a;
                    inner(&l)
                })
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<u64> = results.iter().map(|r| r.1).collect();
            let i = plateau_argmin(&scores);
            if chosen.as_ref().is_none_or(|c: &(f64, (Option<f64>, u64, u64))| scores[i] < c.1 .1) {
                chosen = Some((grid[i], results[i]));
            }
            if round == 1 || grid.len() < 2 {
                break;
            }
            let step = (grid[1] - grid[0]).abs() / 2.0;
            let c = grid[i];
            grid = [c - step, c - step / 2.0, c + step / 2.0, c + step]
                .into_iter()
                .filter(|a| *a > 0.5 && *a < 1.0)
                .collect();
            if grid.is_empty() {
                break;
            }
        }
        let (a, (g, e, n)) = chosen.ok_or_else(|| Error::Domain("empty alpha grid".into()))?;
        tuned.alpha = Some(a);
        tuned.gamma = g;
        tuned.training_errors = e;
        tuned.training_bits = n;
    } else if link.optimizes(OptParam::Derivative) {
        let max_m = o.max_derivative.min(cfg.samples_per_slot.saturating_sub(1));
        let results = (0..=max_m)
            .map(|m| {
                let mut l = link.clone();
                l.detector.derivative_order = m;
                inner(&l)
            })
            .collect::<Result<Vec<_>>>()?;
        let scores: Vec<u64> = results.iter().map(|r| r.1).collect();
        let i = scores
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| **s)
            .map(|(i, _)| i)
            .unwrap_or(0);
        tuned.derivative = Some(i);
        (tuned.gamma, tuned.training_errors, tuned.training_bits) = results[i];
    } else if link.optimizes(OptParam::Ab) {
        let mut best: Option<((usize, f64), (Option<f64>, u64, u64))> = None;
        for delay in 1..=o.ab_max_delay {
            for &scale in &o.ab_scales {
                let mut l = link.clone();
                l.precoder = Precoder::Ab { delay, scale };
                let r = inner(&l)?;
                if best.as_ref().is_none_or(|b| r.1 < b.1 .1) {
                    best = Some(((delay, scale), r));
                }
            }
        }
        let (ab, (g, e, n)) = best.ok_or_else(|| Error::Domain("empty A−B search range".into()))?;
        tuned.ab = Some(ab);
        (tuned.gamma, tuned.training_errors, tuned.training_bits) = (g, e, n);
    } else {
        (tuned.gamma, tuned.training_errors, tuned.training_bits) = inner(link)?;
    }
    Ok(tuned)
}

/// Optimizes one parameter of link `link_index` (γ is re-tuned inside any
/// outer search when the detector has a threshold).
pub fn optimize_parameter(cfg: &ExperimentConfig, link_index: usize, param: OptParam) -> Result<Tuned> {
    let link = cfg
        .links
        .get(link_index)
        .ok_or_else(|| Error::Usage(format!("no link with index {link_index}")))?;
    let mut l = link.clone();
    l.optimize = vec![param];
    if param != OptParam::Gamma && l.detector.kind.uses_gamma() {
        l.optimize.push(OptParam::Gamma);
    }
    let mut c = cfg.clone();
    c.links = vec![l.clone()];
    c.validate()?;
    tune_link(&c, &l)
}

fn measure(cfg: &ExperimentConfig, link: &LinkSpec, tuned: &Tuned, started: Instant) -> Result<BerReport> {
    let mut l = link.clone();
    tuned.apply(&mut l);
    let p = PreparedLink::new(cfg, &l)?;
    let (bits, errors) = run_link(&p, cfg)?;
    let mut r = BerReport::new(bits, errors);
    r.sweep_var = cfg.sweep.var;
    r.sweep_value = cfg.value_of(cfg.sweep.var);
    r.scheme = l.scheme.label();
    r.detector = l.label.clone();
    r.optimized = tuned.params();
    r.seed = cfg.sim.seed;
    r.runtime_s = started.elapsed().as_secs_f64();
    Ok(r)
}

/// Every link at the configuration's current point.
pub fn run_point(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<BerReport>> {
    let mut c = cfg.clone();
    c.sim.seed = seed;
    c.validate()?;
    c.links
        .par_iter()
        .map(|l| {
            let t0 = Instant::now();
            let tuned = tune_link(&c, l)?;
            measure(&c, l, &tuned, t0)
        })
        .collect()
}

/// One report per (sweep value, link), in grid order then link order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<BerReport>> {
    cfg.validate()?;
    let var = cfg.sweep.var;
    // receivers are tuned for the synchronized channel, so a τ sweep tunes once
    let shared: Option<Vec<Tuned>> = if var == SweepVar::Tau {
        Some(cfg.links.par_iter().map(|l| tune_link(cfg, l)).collect::<Result<_>>()?)
    } else {
        None
    };
    let jobs: Vec<(f64, usize)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..cfg.links.len()).map(move |i| (v, i)))
        .collect();
    jobs.par_iter()
        .map(|&(v, i)| {
            let t0 = Instant::now();
            let point = cfg.at(var, v);
            let link = &point.links[i];
            let tuned = match &shared {
                Some(t) => t[i].clone(),
                None => tune_link(&point, link)?,
            };
            measure(&point, link, &tuned, t0)
        })
        .collect()
}

/// BER against receiver lag `τ`, with receivers tuned at `τ = 0`.
pub fn offset_sweep(cfg: &ExperimentConfig, taus: &[f64]) -> Result<Vec<BerReport>> {
    let mut c = cfg.clone();
    c.sweep.var = SweepVar::Tau;
    c.sweep.values = taus.to_vec();
    sweep(&c)
}
