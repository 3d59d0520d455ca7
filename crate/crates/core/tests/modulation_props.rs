mod common;

use common::schemes;
use dimc::channel::{mean_arrivals, EmissionSchedule, NoiseModel, SamplingGrid, TapVector};
use dimc::config::{parse_config, ExperimentConfig};
use dimc::detection::{demodulate, DetectorConfig, DetectorKind};
use dimc::harness::PreparedLink;
use dimc::modulation::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bits(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn grid_for(scheme: &SchemeDescriptor, n: usize) -> SamplingGrid {
    scheme_grid(scheme, 0.1, n, 1, 0.0).unwrap()
}

#[test]
fn bits_per_symbol_oracles() {
    // floor(log2 C(K, K_A)) with C from the multiplicative formula
    for (k, ka) in [(4usize, 2usize), (6, 3), (8, 2), (10, 4)] {
        let c: f64 = (0..ka).map(|i| (k - i) as f64 / (i + 1) as f64).product();
        let expect = c.round().log2().floor() as usize;
        let s = SchemeDescriptor::of(SchemeKind::Gmosk, k).with_active(ka);
        assert_eq!(bits_per_symbol(&s).unwrap(), expect);
    }
    assert_eq!(bits_per_symbol(&SchemeDescriptor::of(SchemeKind::Gmosk, 4).with_active(2)).unwrap(), 2);
    assert_eq!(bits_per_symbol(&SchemeDescriptor::of(SchemeKind::Mcpm, 4)).unwrap(), 3);
    assert_eq!(bits_per_symbol(&SchemeDescriptor::bcsk()).unwrap(), 1);
    let m = maaf_frame_map(16, 4).unwrap();
    assert_eq!((m.streams(), m.types_per_stream()), (1, 16));
}

#[test]
fn power_audit_every_scheme() {
    let m = 250.0;
    let budget = PowerBudget::new(m).unwrap();
    for s in schemes() {
        let b = bits_per_symbol(&s).unwrap();
        let grid = grid_for(&s, 2);
        let bits = random_bits(100_000 * b, 17);
        let x = modulate(&bits, &s, &budget, &grid).unwrap();
        let per_bit = x.total_molecules() / bits.len() as f64;
        assert!((per_bit / m - 1.0).abs() < 0.01, "{}: {per_bit}", s.label());
    }
}

fn link_config(link: &str) -> ExperimentConfig {
    let text = format!(
        r#"
[channel]
r0 = 10.0
r_r = 5.0
diff_coef = 80.0
[grid]
t_b = 0.3333333333333333
samples_per_slot = 1
memory = 12
[power]
m = 300.0
snr_db = 10.0
[harness]
block_symbols = 100000
[sweep]
var = "m"
values = [300.0]
[[link]]
label = "x"
scheme = "bcsk"
detector = "ftd"
{link}
"#
    );
    parse_config(&text).unwrap()
}

#[test]
fn power_audit_precoded_links() {
    for extra in ["precoder = \"atract\"", "precoder = \"ab\"\nab_delay = 2\nab_scale = 0.6"] {
        let cfg = link_config(extra);
        let p = PreparedLink::new(&cfg, &cfg.links[0]).unwrap();
        let bits = p.block_bits(5, 0);
        let x = p.transmit(&bits).unwrap();
        let per_bit = x.total_molecules() / bits.len() as f64;
        assert!((per_bit / cfg.m - 1.0).abs() < 0.01, "{extra}: {per_bit}");
    }
}

fn identity_taps(n: usize) -> TapVector {
    let mut h = vec![0.0; n];
    h[0] = 1.0;
    TapVector::new(h, n).unwrap()
}

fn noiseless_round_trip(s: &SchemeDescriptor, bits: &[bool], n: usize) -> Vec<bool> {
    let m = 100.0;
    let grid = grid_for(s, n);
    let x: EmissionSchedule = modulate(bits, s, &PowerBudget::new(m).unwrap(), &grid).unwrap();
    let y = mean_arrivals(&x, &identity_taps(grid.samples_per_symbol), &NoiseModel::new(0.0).unwrap()).unwrap();
    let gamma = match s.kind {
        SchemeKind::Mcpm => 2.0 * bits_per_symbol(s).unwrap() as f64 * m * 0.5,
        _ => m,
    };
    let det = match s.kind {
        SchemeKind::Bcsk | SchemeKind::Dmosk | SchemeKind::Mcsk => DetectorKind::Ftd,
        SchemeKind::Mcpm => DetectorKind::Mcpm2Stage,
        _ => DetectorKind::Mcd,
    };
    let cfg = DetectorConfig::new(det).with_gamma(gamma);
    demodulate(&y, s, grid.samples_per_symbol, &cfg, None).unwrap().bits
}

#[test]
fn bcsk_example_emissions() {
    let grid = grid_for(&SchemeDescriptor::bcsk(), 1);
    let x = modulate(&[true, false, true], &SchemeDescriptor::bcsk(), &PowerBudget::new(500.0).unwrap(), &grid).unwrap();
    assert_eq!(x.channels[0], vec![1000.0, 0.0, 1000.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_single_tap_round_trip(idx in 0usize..13, seed in any::<u64>(), symbols in 1usize..40, n in 1usize..4) {
        let s = schemes()[idx];
        let b = bits_per_symbol(&s).unwrap();
        let bits = random_bits(symbols * b, seed);
        prop_assert_eq!(noiseless_round_trip(&s, &bits, n), bits);
    }

    #[test]
    fn emissions_are_nonnegative_and_aligned(idx in 0usize..13, seed in any::<u64>(), symbols in 1usize..30) {
        let s = schemes()[idx];
        let b = bits_per_symbol(&s).unwrap();
        let grid = grid_for(&s, 3);
        let x = modulate(&random_bits(symbols * b, seed), &s, &PowerBudget::new(40.0).unwrap(), &grid).unwrap();
        prop_assert_eq!(x.symbols, symbols);
        prop_assert_eq!(x.num_channels(), s.num_channels());
        let slot = grid.samples_per_symbol / s.slots_per_symbol();
        for ch in &x.channels {
            prop_assert_eq!(ch.len(), symbols * grid.samples_per_symbol);
            for (i, v) in ch.iter().enumerate() {
                prop_assert!(*v >= 0.0);
                if *v > 0.0 {
                    prop_assert_eq!(i % slot, 0);
                }
            }
        }
    }
}
