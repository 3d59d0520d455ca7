mod common;

use common::log_time_quadrature;
use dimc::channel::*;
use dimc::rng::{Purpose, StreamKey};

fn geometries() -> Vec<ChannelGeometry> {
    vec![
        ChannelGeometry::new(10.0, 5.0, 80.0).unwrap(),
        ChannelGeometry::new(15.0, 5.0, 80.0).unwrap(),
        ChannelGeometry::new(8.0, 2.0, 150.0).unwrap(),
    ]
}

#[test]
fn density_integrates_to_hit_probability() {
    for g in geometries() {
        let total = log_time_quadrature(&g, (1e-8f64).ln(), (1e32f64).ln(), 400_000);
        assert!((total - g.r_r / g.r0).abs() < 1e-6, "{g:?}: {total}");
    }
}

#[test]
fn cdf_tends_to_hit_probability() {
    for g in geometries() {
        assert_eq!(cumulative_hit(0.0, &g).unwrap(), 0.0);
        let far = cumulative_hit(1e16, &g).unwrap();
        assert!((far - g.r_r / g.r0).abs() < 1e-6);
        let partial = log_time_quadrature(&g, (1e-8f64).ln(), (2.0f64).ln(), 200_000);
        assert!((partial - cumulative_hit(2.0, &g).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn cdf_derivative_is_density() {
    for g in geometries() {
        for &t in &[0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 3.0, 10.0] {
            let h = t * 1e-6;
            let fd = (cumulative_hit(t + h, &g).unwrap() - cumulative_hit(t - h, &g).unwrap()) / (2.0 * h);
            let f = first_hit_density(t, &g).unwrap();
            assert!(((fd - f) / f).abs() < 1e-8, "t={t}: {fd} vs {f}");
        }
    }
}

#[test]
fn fig5_geometry_has_single_peak_and_heavy_tail() {
    let g = ChannelGeometry::new(15.0, 5.0, 80.0).unwrap();
    let ts: Vec<f64> = (1..4000).map(|i| i as f64 * 1e-3).collect();
    let f: Vec<f64> = ts.iter().map(|&t| first_hit_density(t, &g).unwrap()).collect();
    let peaks = (1..f.len() - 1).filter(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1]).count();
    assert_eq!(peaks, 1);
    let tp = g.peak_time();
    let fp = first_hit_density(tp, &g).unwrap();
    // at ten times the peak time the density is still a few percent of its peak
    assert!(first_hit_density(10.0 * tp, &g).unwrap() > 0.02 * fp);
    assert!(first_hit_density(tp / 10.0, &g).unwrap() < 1e-3 * fp);
}

#[test]
fn taps_telescope_to_the_cdf() {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let grid = SamplingGrid::new(0.1, 5, 40, 0.0).unwrap();
    let h = build_taps(&g, &grid).unwrap();
    let end = grid.num_taps() as f64 * grid.t_s();
    assert!((h.sum() - cumulative_hit(end, &g).unwrap()).abs() < 1e-12);
    assert!(h.sum() < 0.5);
    assert_eq!(h.as_slice()[0], cumulative_hit(0.02, &g).unwrap());
}

#[test]
fn integer_sample_lags_shift_the_taps() {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let grid = SamplingGrid::new(0.1, 5, 8, 0.0).unwrap();
    let h0 = build_taps(&g, &grid).unwrap();
    for shift in 1..4 {
        let hs = build_taps(&g, &grid.with_tau(shift as f64 * grid.t_s())).unwrap();
        for k in 0..h0.len() - shift {
            assert!((hs.as_slice()[k] - h0.as_slice()[k + shift]).abs() < 1e-15);
        }
    }
}

#[test]
fn noise_only_mean() {
    let x = EmissionSchedule::zeros(1, 200_000, 5);
    let h = TapVector::new(vec![0.1; 5], 5).unwrap();
    let y = simulate_arrivals(&x, &h, &NoiseModel::new(2.0).unwrap(), 3).unwrap();
    let mean = y.channel(0).iter().sum::<f64>() / y.channel(0).len() as f64;
    assert!((mean - 2.0).abs() < 0.01, "{mean}");
}

#[test]
fn poisson_counts_are_equidispersed() {
    let x = EmissionSchedule::zeros(1, 1_000_000, 1);
    let h = TapVector::new(vec![0.1], 1).unwrap();
    for lambda in [0.7, 4.0, 35.0] {
        let y = simulate_arrivals(&x, &h, &NoiseModel::new(lambda).unwrap(), 11).unwrap();
        let v = y.channel(0);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let ratio = var / mean;
        assert!((0.98..=1.02).contains(&ratio), "λ={lambda}: {ratio}");
        assert!(v.iter().all(|a| a.fract() == 0.0 && *a >= 0.0));
    }
}

#[test]
fn poisson_pmf_chi_square() {
    let lambda = 3.0;
    let x = EmissionSchedule::zeros(1, 200_000, 1);
    let h = TapVector::new(vec![0.1], 1).unwrap();
    let y = simulate_arrivals(&x, &h, &NoiseModel::new(lambda).unwrap(), 5).unwrap();
    let mut counts = [0f64; 11];
    for &v in y.channel(0) {
        counts[(v as usize).min(10)] += 1.0;
    }
    let n = y.channel(0).len() as f64;
    let mut pmf = [0f64; 11];
    let mut p = (-lambda).exp();
    for (k, slot) in pmf.iter_mut().enumerate().take(10) {
        *slot = p;
        p *= lambda / (k + 1) as f64;
    }
    pmf[10] = 1.0 - pmf[..10].iter().sum::<f64>();
    let chi2: f64 = counts.iter().zip(&pmf).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
    // 10 degrees of freedom, 0.999 quantile
    assert!(chi2 < 29.59, "{chi2}");
}

#[test]
fn deterministic_mode_is_exact() {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let grid = SamplingGrid::new(0.1, 5, 6, 0.0).unwrap();
    let h = build_taps(&g, &grid).unwrap();
    let mut x = EmissionSchedule::zeros(1, 10, 5);
    for (k, a) in [(0, 400.0), (10, 250.0), (35, 90.0)] {
        x.channels[0][k] = a;
    }
    let y = mean_arrivals(&x, &h, &NoiseModel::new(0.3).unwrap()).unwrap();
    for n in 0..50 {
        let mut expect = 0.3;
        for (k, a) in [(0usize, 400.0), (10, 250.0), (35, 90.0)] {
            if n >= k && n - k < h.len() {
                expect += a * h.as_slice()[n - k];
            }
        }
        assert!((y.channel(0)[n] - expect).abs() < 1e-12);
    }
}

#[test]
fn gaussian_mode_matches_poisson_moments() {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let grid = SamplingGrid::new(0.1, 5, 4, 0.0).unwrap();
    let h = build_taps(&g, &grid).unwrap();
    let noise = NoiseModel::new(2.0).unwrap();
    let mut x = EmissionSchedule::zeros(1, 6, 5);
    x.channels[0][0] = 300.0;
    x.channels[0][10] = 300.0;
    let mean = mean_arrivals(&x, &h, &noise).unwrap();
    let runs = 20_000;
    let len = x.len();
    let mut acc = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for b in 0..runs {
        let p = simulate_arrivals_in_block(&x, &h, &noise, 1, b).unwrap();
        let q = simulate_arrivals_gaussian(&x, &h, &noise, 2, b).unwrap();
        for n in 0..len {
            acc[0][n] += p.channel(0)[n];
            acc[1][n] += p.channel(0)[n].powi(2);
            acc[2][n] += q.channel(0)[n];
            acc[3][n] += q.channel(0)[n].powi(2);
        }
    }
    let r = runs as f64;
    for n in 0..len {
        let lam = mean.channel(0)[n];
        let (mp, mg) = (acc[0][n] / r, acc[2][n] / r);
        let (vp, vg) = (acc[1][n] / r - mp * mp, acc[3][n] / r - mg * mg);
        let se_mean = (2.0 * lam / r).sqrt();
        assert!((mp - mg).abs() < 5.0 * se_mean, "mean at {n}: {mp} vs {mg}");
        let se_var = ((2.0 * lam * lam + lam) * 2.0 / r).sqrt();
        assert!((vp - vg).abs() < 5.0 * se_var, "var at {n}: {vp} vs {vg}");
    }
}

#[test]
fn streams_depend_only_on_their_key() {
    use rand::Rng;
    let a: Vec<u64> = {
        let mut r = StreamKey::new(9, Purpose::Arrivals, 4, 1).rng();
        (0..8).map(|_| r.random()).collect()
    };
    // drawing other streams first changes nothing
    let _ = StreamKey::new(9, Purpose::Arrivals, 3, 1).rng().random::<u64>();
    let mut r = StreamKey::new(9, Purpose::Arrivals, 4, 1).rng();
    let b: Vec<u64> = (0..8).map(|_| r.random()).collect();
    assert_eq!(a, b);
    let mut r = StreamKey::new(9, Purpose::Bits, 4, 1).rng();
    let c: Vec<u64> = (0..8).map(|_| r.random()).collect();
    assert_ne!(a, c);
}
