mod common;

use common::*;
use dimc::config::{OptParam, SweepVar};
use dimc::detection::ftd_optimal_threshold;
use dimc::channel::{build_taps, ChannelGeometry};
use dimc::harness::*;
use dimc::modulation::scheme_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn no_isi(m: f64, lambda_s: f64, links: &str) -> dimc::config::ExperimentConfig {
    no_isi_at(0.1, m, lambda_s, links)
}

fn no_isi_at(t_b: f64, m: f64, lambda_s: f64, links: &str) -> dimc::config::ExperimentConfig {
    config_with(
        &format!("t_b = {t_b}\nsamples_per_slot = 1\nmemory = 1"),
        &format!("m = {m}\nlambda_s = {lambda_s}"),
        "block_symbols = 1000\nmin_bits = 50000\nmax_bits = 50000\ntarget_errors = 1",
        &format!("var = \"m\"\nvalues = [{m}]"),
        links,
    )
}

#[test]
fn snr_operating_points() {
    assert!((snr_to_noise(1000.0, 5.0, 10.0).unwrap() - 20.0).abs() < 1e-12);
    assert!((snr_to_noise(100.0, 5.0, 20.0).unwrap() - 0.2).abs() < 1e-12);
    assert!(snr_to_noise(100.0, 5.0, 300.0).unwrap() < 1e-28);
}

#[test]
fn noiseless_matched_links_make_no_errors() {
    let links = [
        link("bcsk", "scheme = \"bcsk\"\ndetector = \"ftd\"\ngamma = 0.5"),
        link("ppm", "scheme = \"ppm\"\norder = 4\ndetector = \"mcd\""),
        link("mosk", "scheme = \"mosk\"\norder = 8\ndetector = \"mcd\""),
        link("gmosk", "scheme = \"gmosk\"\norder = 4\nactive = 2\ndetector = \"mcd\""),
        link("maaf", "scheme = \"maaf\"\norder = 16\ninfo_bits = 2\ndetector = \"mcd\""),
        link("mcsk", "scheme = \"mcsk\"\ndetector = \"ftd\"\ngamma = 0.5"),
    ]
    .concat();
    // long symbols, so a pulse peaks inside its own sub-slot
    let cfg = no_isi_at(0.4, 10_000.0, 0.0, &links);
    for r in sweep(&cfg).unwrap() {
        assert_eq!(r.errors, 0, "{}", r.detector);
        assert!(r.bits >= 50_000);
    }
}

#[test]
fn same_seed_same_reports() {
    let links = link("ftd", "scheme = \"bcsk\"\ndetector = \"ftd\"\noptimize = [\"gamma\"]")
        + &link("mlda", "scheme = \"bcsk\"\ndetector = \"mlda\"");
    let cfg = config_with(
        "t_b = 0.1\nsamples_per_slot = 5\nmemory = 10",
        "m = 100\nsnr_db = 10",
        "min_bits = 20000\nmax_bits = 20000\nseed = 99",
        "var = \"m\"\nvalues = [50, 100]",
        &links,
    );
    let strip = |mut v: Vec<BerReport>| {
        v.iter_mut().for_each(|r| r.runtime_s = 0.0);
        v
    };
    let a = strip(sweep(&cfg).unwrap());
    let b = strip(sweep(&cfg).unwrap());
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = strip(pool.install(|| sweep(&cfg)).unwrap());
    assert_eq!(a, c);
    let mut other = cfg.clone();
    other.sim.seed = 100;
    assert_ne!(a, strip(sweep(&other).unwrap()));
}

#[test]
fn offset_sweep_at_zero_is_the_plain_run() {
    let links = link("ftd", "scheme = \"bcsk\"\ndetector = \"ftd\"\noptimize = [\"gamma\"]")
        + &link("sprt", "scheme = \"bcsk\"\ndetector = \"dfe-sprt\"");
    let cfg = config_with(
        "t_b = 0.1\nsamples_per_slot = 5\nmemory = 10",
        "m = 200\nsnr_db = 20",
        "min_bits = 20000\nmax_bits = 20000",
        "var = \"m\"\nvalues = [200]",
        &links,
    );
    let plain = sweep(&cfg).unwrap();
    let offset = offset_sweep(&cfg, &[0.0]).unwrap();
    for (a, b) in plain.iter().zip(&offset) {
        assert_eq!((a.bits, a.errors, &a.optimized), (b.bits, b.errors, &b.optimized));
    }
}

#[test]
fn gamma_search_finds_the_analytic_threshold() {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    for (m, lambda_s) in [(30.0, 1.0), (60.0, 3.0)] {
        let cfg = no_isi(m, lambda_s, &link("ftd", "scheme = \"bcsk\"\ndetector = \"ftd\"\noptimize = [\"gamma\"]"));
        let grid = scheme_grid(&cfg.links[0].scheme, cfg.t_b, 1, 1, 0.0).unwrap();
        let h1 = build_taps(&g, &grid).unwrap().sum();
        let analytic = ftd_optimal_threshold(m, h1, lambda_s).unwrap();
        let tuned = optimize_parameter(&cfg, 0, OptParam::Gamma).unwrap();
        let gamma = tuned.gamma.unwrap();
        // counts are integers, so every γ in one unit cell gives the same decisions
        assert!((gamma - analytic).abs() <= 1.0, "M={m}: {gamma} vs {analytic}");
    }
}

#[test]
fn wilson_interval_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for &(p, n) in &[(0.01, 2000u64), (0.2, 500), (0.001, 20_000)] {
        let reps = 2000;
        let covered = (0..reps)
            .filter(|_| {
                let e = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
                let (lo, hi) = wilson_interval(e, n);
                lo <= p && p <= hi
            })
            .count();
        let rate = covered as f64 / reps as f64;
        assert!((0.93..=0.97).contains(&rate), "p={p}: {rate}");
    }
}

#[test]
fn links_at_a_point_share_channel_realizations() {
    let links = link("ftd", "scheme = \"bcsk\"\ndetector = \"ftd\"")
        + &link("ads", "scheme = \"bcsk\"\ndetector = \"ads\"")
        + &link("mlda", "scheme = \"bcsk\"\ndetector = \"mlda\"");
    let cfg = config_with(
        "t_b = 0.1\nsamples_per_slot = 5\nmemory = 10",
        "m = 100\nsnr_db = 10",
        "",
        "var = \"m\"\nvalues = [100]",
        &links,
    );
    let prepared: Vec<PreparedLink> = cfg.links.iter().map(|l| PreparedLink::new(&cfg, l).unwrap()).collect();
    for block in 0..3 {
        let first = prepared[0].receive(5, block).unwrap();
        for p in &prepared[1..] {
            assert_eq!(p.receive(5, block).unwrap(), first);
        }
    }
    assert_ne!(prepared[0].receive(5, 0).unwrap(), prepared[0].receive(5, 1).unwrap());
}

#[test]
fn tau_sweep_records_the_offset() {
    let cfg = config_with(
        "t_b = 0.1\nsamples_per_slot = 5\nmemory = 10",
        "m = 100\nsnr_db = 20",
        "min_bits = 10000\nmax_bits = 10000",
        "var = \"tau\"\nvalues = [0.0, 0.02]",
        &link("ftd", "scheme = \"bcsk\"\ndetector = \"ftd\"\ngamma = 5"),
    );
    let r = sweep(&cfg).unwrap();
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|x| x.sweep_var == SweepVar::Tau));
    assert_eq!(r[1].sweep_value, 0.02);
}
