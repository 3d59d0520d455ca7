#![allow(dead_code)]

use dimc::channel::{SampleSeries, TapVector};
use dimc::detection::{mlsd_viterbi, Csi};
use rand::Rng;

/// P(X <= k) for X ~ Poisson(lambda), by summing the pmf.
pub fn poisson_cdf(k: f64, lambda: f64) -> f64 {
    if k < 0.0 {
        return 0.0;
    }
    let kmax = k.floor() as u64;
    let mut p = (-lambda).exp();
    let mut acc = p;
    for i in 1..=kmax {
        p *= lambda / i as f64;
        acc += p;
    }
    acc.min(1.0)
}

pub fn ln_factorial(k: f64) -> f64 {
    (1..=k as u64).map(|i| (i as f64).ln()).sum()
}

pub fn poisson_ln_pmf(k: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k * lambda.ln() - lambda - ln_factorial(k)
}

/// Exhaustive maximum-likelihood sequence search with the Viterbi metric and
/// its tie rule (lexicographically smallest sequence wins).
pub fn brute_force_mlsd(y: &[f64], csi: &Csi, log_floor: f64) -> Vec<bool> {
    let n = csi.samples_per_symbol();
    let s = y.len() / n;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for code in 0u32..(1 << s) {
        let bits: Vec<bool> = (0..s).map(|i| code >> (s - 1 - i) & 1 == 1).collect();
        let mut metric = 0.0;
        for k in 0..s {
            for q in 0..n {
                let mut mean = csi.lambda_s;
                for lag in 0..csi.taps.memory().min(k + 1) {
                    if bits[k - lag] {
                        mean += csi.pulse * csi.taps.at(lag, q);
                    }
                }
                metric += y[k * n + q] * mean.max(log_floor).ln() - mean;
            }
        }
        if metric > best.0 {
            best = (metric, bits);
        }
    }
    best.1
}

pub fn random_instance<R: Rng>(rng: &mut R, s: usize, l: usize, n: usize) -> (Vec<f64>, Csi) {
    let taps: Vec<f64> = (0..l * n).map(|i| rng.random::<f64>() * 0.3 / (1.0 + i as f64)).collect();
    let csi = Csi::new(TapVector::new(taps, n).unwrap(), rng.random::<f64>() * 2.0 + 0.05, 40.0);
    let bits: Vec<bool> = (0..s).map(|_| rng.random()).collect();
    let mut y = vec![0.0; s * n];
    for k in 0..s {
        for q in 0..n {
            let mut mean = csi.lambda_s;
            for lag in 0..l.min(k + 1) {
                if bits[k - lag] {
                    mean += csi.pulse * csi.taps.at(lag, q);
                }
            }
            y[k * n + q] = rand_distr::Distribution::sample(&rand_distr::Poisson::new(mean).unwrap(), rng);
        }
    }
    (y, csi)
}

/// Viterbi/brute-force disagreements over `count` random instances.
pub fn viterbi_mismatches(count: usize, seed: u64) -> usize {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..count {
        let s = rng.random_range(1..=10);
        let l = rng.random_range(1..=4);
        let n = rng.random_range(1..=3);
        let (y, csi) = random_instance(&mut rng, s, l, n);
        let v = mlsd_viterbi(&y, &csi, l, 1e-12).unwrap();
        if v.bits != brute_force_mlsd(&y, &csi, 1e-12) {
            bad += 1;
        }
    }
    bad
}

pub fn series(v: Vec<f64>) -> SampleSeries {
    SampleSeries { channels: vec![v] }
}

use dimc::config::{parse_config, ExperimentConfig};
use dimc::harness::BerReport;

/// Configuration with the standard geometry and the given extra sections
/// and links.
pub fn config_with(grid: &str, power: &str, harness: &str, sweep: &str, links: &str) -> ExperimentConfig {
    let text = format!(
        "[channel]\nr0 = 10.0\nr_r = 5.0\ndiff_coef = 80.0\n[grid]\n{grid}\n[power]\n{power}\n[harness]\n{harness}\n[sweep]\n{sweep}\n{links}"
    );
    parse_config(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

pub fn link(label: &str, body: &str) -> String {
    format!("[[link]]\nlabel = \"{label}\"\n{body}\n")
}

pub fn find<'a>(reports: &'a [BerReport], value: f64, detector: &str) -> &'a BerReport {
    reports
        .iter()
        .find(|r| (r.sweep_value - value).abs() <= 1e-9 * value.abs().max(1.0) && r.detector == detector)
        .unwrap_or_else(|| panic!("no report for {detector} at {value}"))
}

/// `a` is below `b` with disjoint 95% intervals.
pub fn clearly_below(a: &BerReport, b: &BerReport) -> bool {
    a.ci_high < b.ci_low
}

pub fn max_ber(reports: &[BerReport], detector: &str) -> f64 {
    reports
        .iter()
        .filter(|r| r.detector == detector)
        .map(|r| r.ber)
        .fold(f64::NEG_INFINITY, f64::max)
}

use dimc::channel::{first_hit_density, ChannelGeometry};
use dimc::modulation::{SchemeDescriptor, SchemeKind};

/// One descriptor per scheme family, with non-default orders.
pub fn schemes() -> Vec<SchemeDescriptor> {
    use SchemeKind::*;
    vec![
        SchemeDescriptor::bcsk(),
        SchemeDescriptor::of(Ppm, 2),
        SchemeDescriptor::of(Ppm, 8),
        SchemeDescriptor::of(Mcpm, 4),
        SchemeDescriptor::of(Mcpm, 8).with_alpha(0.6),
        SchemeDescriptor::of(Mosk, 4),
        SchemeDescriptor::of(Mssk, 8),
        SchemeDescriptor::of(Dmosk, 2),
        SchemeDescriptor::of(Mcsk, 2),
        SchemeDescriptor::of(Gmosk, 4).with_active(2),
        SchemeDescriptor::of(Gmosk, 6).with_active(3),
        SchemeDescriptor::of(Maaf, 16).with_info_bits(2),
        SchemeDescriptor::of(Maaf, 16).with_info_bits(3),
    ]
}

/// Composite Simpson of `f_hit` on a log-time axis, `t = e^x`.
pub fn log_time_quadrature(g: &ChannelGeometry, x0: f64, x1: f64, intervals: usize) -> f64 {
    let h = (x1 - x0) / intervals as f64;
    let f = |x: f64| {
        let t = x.exp();
        first_hit_density(t, g).unwrap() * t
    };
    let mut acc = f(x0) + f(x1);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(x0 + i as f64 * h);
    }
    acc * h / 3.0
}
