//! LTI-Poisson diffusive channel.
//!
//! A point transmitter releases molecules at distance `r0` from the centre of
//! a fully absorbing spherical receiver of radius `r_r`. The first-hitting
//! statistics of a single molecule give the channel impulse response; sampling
//! its cumulative distribution on the receiver's clock gives the tap vector,
//! and arrivals are Poisson with mean equal to the emissions convolved with the
//! taps plus a constant external noise floor.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use libm::erfc;

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Physical link parameters. Distances in micrometres, diffusion coefficient
/// in µm²/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub r0: f64,
    pub r_r: f64,
    pub diff_coef: f64,
}

impl ChannelGeometry {
    pub fn new(r0: f64, r_r: f64, diff_coef: f64) -> Result<Self> {
        let g = Self { r0, r_r, diff_coef };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_r > 0.0 && self.r0 > self.r_r && self.r0.is_finite()) {
            return Err(Error::Domain(format!(
                "geometry requires r0 > r_r > 0 (r0={}, r_r={})",
                self.r0, self.r_r
            )));
        }
        if !(self.diff_coef > 0.0 && self.diff_coef.is_finite()) {
            return Err(Error::Domain(format!(
                "diffusion coefficient must be positive (got {})",
                self.diff_coef
            )));
        }
        Ok(())
    }

    /// Probability that a molecule is ever absorbed.
    pub fn total_hit_probability(&self) -> f64 {
        self.r_r / self.r0
    }

    /// Time at which the first-hitting density peaks.
    pub fn peak_time(&self) -> f64 {
        let d = self.r0 - self.r_r;
        d * d / (6.0 * self.diff_coef)
    }
}

/// Density of the first-hitting time at `t` seconds.
pub fn first_hit_density(t: f64, geom: &ChannelGeometry) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("first_hit_density needs t > 0 (got {t})")));
    }
    let d = geom.r0 - geom.r_r;
    let dt4 = 4.0 * geom.diff_coef * t;
    let scale = geom.r_r / geom.r0;
    let norm = d / (std::f64::consts::PI * dt4 * t * t).sqrt();
    Ok(scale * norm * (-d * d / dt4).exp())
}

/// Probability that a molecule has been absorbed by time `t`.
pub fn cumulative_hit(t: f64, geom: &ChannelGeometry) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("cumulative_hit needs t >= 0 (got {t})")));
    }
    Ok(cdf_unchecked(t, geom))
}

fn cdf_unchecked(t: f64, geom: &ChannelGeometry) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let d = geom.r0 - geom.r_r;
    if t.is_infinite() {
        return geom.r_r / geom.r0;
    }
    geom.r_r / geom.r0 * erfc(d / (4.0 * geom.diff_coef * t).sqrt())
}

/// Receiver sampling clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    /// Symbol duration in seconds.
    pub t_sym: f64,
    pub samples_per_symbol: usize,
    /// Channel memory in symbols.
    pub memory: usize,
    /// Receiver clock lag behind the transmitter, seconds. Negative leads.
    pub tau: f64,
}

impl SamplingGrid {
    pub fn new(t_sym: f64, samples_per_symbol: usize, memory: usize, tau: f64) -> Result<Self> {
        let g = Self {
            t_sym,
            samples_per_symbol,
            memory,
            tau,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_sym > 0.0 && self.t_sym.is_finite()) {
            return Err(Error::Domain(format!("t_sym must be positive (got {})", self.t_sym)));
        }
        if self.samples_per_symbol == 0 {
            return Err(Error::Domain("samples per symbol must be >= 1".into()));
        }
        if self.memory == 0 {
            return Err(Error::Domain("channel memory must be >= 1 symbol".into()));
        }
        if !self.tau.is_finite() {
            return Err(Error::Domain("tau must be finite".into()));
        }
        Ok(())
    }

    /// Sampling period.
    pub fn t_s(&self) -> f64 {
        self.t_sym / self.samples_per_symbol as f64
    }

    pub fn num_taps(&self) -> usize {
        self.memory * self.samples_per_symbol
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }
}

/// Discrete channel impulse response: hit probability per sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TapVector {
    taps: Vec<f64>,
    samples_per_symbol: usize,
}

impl TapVector {
    /// Wraps raw taps. Every tap must be nonnegative and the length a multiple
    /// of `samples_per_symbol`.
    pub fn new(taps: Vec<f64>, samples_per_symbol: usize) -> Result<Self> {
        if samples_per_symbol == 0 || taps.is_empty() || !taps.len().is_multiple_of(samples_per_symbol) {
            return Err(Error::Domain(format!(
                "tap length {} is not a positive multiple of {}",
                taps.len(),
                samples_per_symbol
            )));
        }
        if taps.iter().any(|h| !(*h >= 0.0) || !h.is_finite()) {
            return Err(Error::Domain("taps must be finite and nonnegative".into()));
        }
        Ok(Self {
            taps,
            samples_per_symbol,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    /// Memory in symbols.
    pub fn memory(&self) -> usize {
        self.taps.len() / self.samples_per_symbol
    }

    /// Tap seen on sample `q` (0-based) of the symbol `lag` symbols after the
    /// emission. Zero beyond the memory.
    #[inline]
    pub fn at(&self, lag: usize, q: usize) -> f64 {
        self.taps
            .get(lag * self.samples_per_symbol + q)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Taps restricted to the first `memory` symbols.
    pub fn truncated(&self, memory: usize) -> Self {
        let n = (memory * self.samples_per_symbol).min(self.taps.len());
        Self {
            taps: self.taps[..n].to_vec(),
            samples_per_symbol: self.samples_per_symbol,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|h| h * factor).collect(),
            samples_per_symbol: self.samples_per_symbol,
        }
    }
}

/// Builds `h[k] = F(k·t_s + τ) − F((k−1)·t_s + τ)`, clamping negative times
/// to zero.
pub fn build_taps(geom: &ChannelGeometry, grid: &SamplingGrid) -> Result<TapVector> {
    geom.validate()?;
    grid.validate()?;
    let ts = grid.t_s();
    let n = grid.num_taps();
    let mut cdf_prev = cdf_unchecked((grid.tau).max(0.0), geom);
    let mut taps = Vec::with_capacity(n);
    for k in 1..=n {
        let cdf = cdf_unchecked((k as f64 * ts + grid.tau).max(0.0), geom);
        taps.push((cdf - cdf_prev).max(0.0));
        cdf_prev = cdf;
    }
    TapVector::new(taps, grid.samples_per_symbol)
}

/// Channel seen by a receiver lagging by `τ > 0` that keeps every molecule.
///
/// With plain [`build_taps`] the part of a pulse arriving before its own
/// (lagged) window opens is lost. Here it is counted in the preceding
/// samples instead: the returned taps are those of a grid shifted back by
/// `lead` whole samples, and receiver sample `n` is the shifted channel's
/// sample `n + lead`. For `τ <= 0` this is `build_taps` with `lead = 0`.
pub fn lagged_taps(geom: &ChannelGeometry, grid: &SamplingGrid) -> Result<(TapVector, usize)> {
    grid.validate()?;
    if grid.tau <= 0.0 {
        return Ok((build_taps(geom, grid)?, 0));
    }
    let t_s = grid.t_s();
    let lead = (grid.tau / t_s - 1e-9).ceil().max(0.0) as usize;
    let n = grid.samples_per_symbol;
    let shifted = SamplingGrid {
        tau: grid.tau - lead as f64 * t_s,
        memory: grid.memory + lead.div_ceil(n),
        ..*grid
    };
    Ok((build_taps(geom, &shifted)?, lead))
}

/// External interference, molecules per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub lambda_s: f64,
}

impl NoiseModel {
    pub fn new(lambda_s: f64) -> Result<Self> {
        if !(lambda_s >= 0.0 && lambda_s.is_finite()) {
            return Err(Error::Domain(format!("lambda_s must be >= 0 (got {lambda_s})")));
        }
        Ok(Self { lambda_s })
    }
}

/// Molecules released at each sample instant, one sequence per molecule type
/// or transmit antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSchedule {
    pub channels: Vec<Vec<f64>>,
    pub samples_per_symbol: usize,
    pub symbols: usize,
}

impl EmissionSchedule {
    pub fn zeros(num_channels: usize, symbols: usize, samples_per_symbol: usize) -> Self {
        Self {
            channels: vec![vec![0.0; symbols * samples_per_symbol]; num_channels],
            samples_per_symbol,
            symbols,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.symbols * self.samples_per_symbol
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_molecules(&self) -> f64 {
        self.channels.iter().flatten().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (c, ch) in self.channels.iter().enumerate() {
            if ch.len() != self.len() {
                return Err(Error::Domain(format!(
                    "channel {c} has {} samples, expected {}",
                    ch.len(),
                    self.len()
                )));
            }
            if ch.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::Domain(format!("channel {c} has a negative emission")));
            }
        }
        Ok(())
    }
}

/// Received counts per sample and channel. Poisson-mode entries are
/// nonnegative integers stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub channels: Vec<Vec<f64>>,
}

impl SampleSeries {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }
}

fn check_compatible(x: &EmissionSchedule, h: &TapVector) -> Result<()> {
    x.validate()?;
    if x.samples_per_symbol != h.samples_per_symbol() {
        return Err(Error::Domain(format!(
            "schedule has {} samples/symbol but taps have {}",
            x.samples_per_symbol,
            h.samples_per_symbol()
        )));
    }
    Ok(())
}

/// Causal convolution `Σ_k x[n−k+1]·h[k]` over one block, dropping arrivals
/// past the block end.
pub fn convolve(x: &[f64], taps: &[f64], out: &mut [f64]) {
    let len = out.len();
    for (n, &a) in x.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let end = (n + taps.len()).min(len);
        for (o, h) in out[n..end].iter_mut().zip(taps) {
            *o += a * h;
        }
    }
}

/// Mean arrival rate per sample: emissions convolved with taps plus the
/// noise floor, with an optional cross-channel coupling matrix
/// (`coupling[tx][rx]` scales the taps from transmit channel `tx` to receive
/// channel `rx`).
pub fn mean_arrivals_coupled(
    x: &EmissionSchedule,
    h: &TapVector,
    coupling: Option<&[Vec<f64>]>,
    noise: &NoiseModel,
) -> Result<Vec<Vec<f64>>> {
    check_compatible(x, h)?;
    let len = x.len();
    let n_rx = coupling.map_or(x.num_channels(), |c| c.first().map_or(0, |r| r.len()));
    if let Some(c) = coupling {
        if c.len() != x.num_channels() || c.iter().any(|r| r.len() != n_rx) {
            return Err(Error::Domain("coupling matrix shape mismatch".into()));
        }
    }
    let mut means = vec![vec![noise.lambda_s; len]; n_rx];
    match coupling {
        None => {
            for (mean, xc) in means.iter_mut().zip(&x.channels) {
                convolve(xc, h.as_slice(), mean);
            }
        }
        Some(c) => {
            let mut conv = vec![0.0; len];
            for (tx, xc) in x.channels.iter().enumerate() {
                conv.iter_mut().for_each(|v| *v = 0.0);
                convolve(xc, h.as_slice(), &mut conv);
                for (rx, mean) in means.iter_mut().enumerate() {
                    let g = c[tx][rx];
                    if g != 0.0 {
                        mean.iter_mut().zip(&conv).for_each(|(m, v)| *m += g * v);
                    }
                }
            }
        }
    }
    Ok(means)
}

/// Deterministic channel output `H·x + λ_s·j`.
pub fn mean_arrivals(x: &EmissionSchedule, h: &TapVector, noise: &NoiseModel) -> Result<SampleSeries> {
    Ok(SampleSeries {
        channels: mean_arrivals_coupled(x, h, None, noise)?,
    })
}

pub(crate) fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    // Poisson::new only fails for non-positive or non-finite rates.
    Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(0.0)
}

fn draw_poisson(means: Vec<Vec<f64>>, seed: u64, block: u64) -> SampleSeries {
    let channels = means
        .into_iter()
        .enumerate()
        .map(|(c, mean)| {
            let mut rng = StreamKey::new(seed, Purpose::Arrivals, block, c as u64).rng();
            mean.into_iter().map(|l| poisson_draw(&mut rng, l)).collect()
        })
        .collect();
    SampleSeries { channels }
}

/// Poisson arrivals for block 0 of `seed`.
pub fn simulate_arrivals(
    x: &EmissionSchedule,
    h: &TapVector,
    noise: &NoiseModel,
    seed: u64,
) -> Result<SampleSeries> {
    simulate_arrivals_in_block(x, h, noise, seed, 0)
}

/// Poisson arrivals using the stream of `(seed, block, channel)`.
pub fn simulate_arrivals_in_block(
    x: &EmissionSchedule,
    h: &TapVector,
    noise: &NoiseModel,
    seed: u64,
    block: u64,
) -> Result<SampleSeries> {
    Ok(draw_poisson(mean_arrivals_coupled(x, h, None, noise)?, seed, block))
}

/// Poisson arrivals over a coupled multi-antenna link.
pub fn simulate_arrivals_coupled(
    x: &EmissionSchedule,
    h: &TapVector,
    coupling: &[Vec<f64>],
    noise: &NoiseModel,
    seed: u64,
    block: u64,
) -> Result<SampleSeries> {
    Ok(draw_poisson(
        mean_arrivals_coupled(x, h, Some(coupling), noise)?,
        seed,
        block,
    ))
}

/// Gaussian approximation `y = H·x + λ_s·j + η`, `η ~ N(0, diag(H·x) + λ_s·I)`.
pub fn simulate_arrivals_gaussian(
    x: &EmissionSchedule,
    h: &TapVector,
    noise: &NoiseModel,
    seed: u64,
    block: u64,
) -> Result<SampleSeries> {
    let means = mean_arrivals_coupled(x, h, None, noise)?;
    let channels = means
        .into_iter()
        .enumerate()
        .map(|(c, mean)| {
            let mut rng = StreamKey::new(seed, Purpose::Arrivals, block, c as u64).rng();
            mean.into_iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + m.sqrt() * z
                })
                .collect()
        })
        .collect();
    Ok(SampleSeries { channels })
}
