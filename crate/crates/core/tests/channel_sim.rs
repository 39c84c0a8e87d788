use std::f64::consts::PI;

use nlos_csi::channel_sim::{
    add_estimation_noise, cir_to_csi, compute_rssi, evolve_fading, generate_cir, simulate_session, ChannelCondition,
    FadingState, SimConfig,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn full_set_config() -> SimConfig {
    SimConfig { subcarriers: (0..64).collect(), ..Default::default() }
}

/// Frequency response by the textbook formula, without index reduction.
fn direct_dft(h: &[Complex64], subcarriers: &[i32], n_fft: usize) -> Vec<Complex64> {
    subcarriers
        .iter()
        .map(|&n| {
            h.iter()
                .enumerate()
                .map(|(m, &tap)| {
                    let angle = -2.0 * PI * n as f64 * m as f64 / n_fft as f64;
                    tap * Complex64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

fn taps(values: &[(f64, f64)]) -> Vec<Complex64> {
    values.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
}

proptest! {
    #[test]
    fn parseval_holds_on_the_full_index_set(values in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=8)) {
        let h = taps(&values);
        let csi = cir_to_csi(&h, &full_set_config()).unwrap();
        let freq: f64 = csi.iter().map(|x| x.norm_sqr()).sum::<f64>() / 64.0;
        let time: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((freq - time).abs() <= 1e-12 * time.max(1e-300));
    }

    #[test]
    fn cir_to_csi_matches_direct_sum(values in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=8)) {
        let h = taps(&values);
        let cfg = SimConfig::default();
        let fast = cir_to_csi(&h, &cfg).unwrap();
        let slow = direct_dft(&h, &cfg.subcarriers, 64);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cir_to_csi_is_linear(
        h1 in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 8),
        h2 in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 8),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let (h1, h2) = (taps(&h1), taps(&h2));
        let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let cfg = SimConfig::default();
        let mixed: Vec<Complex64> = h1.iter().zip(&h2).map(|(x, y)| a * x + b * y).collect();
        let lhs = cir_to_csi(&mixed, &cfg).unwrap();
        let c1 = cir_to_csi(&h1, &cfg).unwrap();
        let c2 = cir_to_csi(&h2, &cfg).unwrap();
        for ((l, x), y) in lhs.iter().zip(&c1).zip(&c2) {
            prop_assert!((l - (a * x + b * y)).norm() < 1e-12);
        }
    }

    #[test]
    fn simulated_records_are_well_formed(seed in any::<u64>(), code in 0u8..3, count in 1usize..20) {
        let cfg = SimConfig::default();
        let cond = ChannelCondition::from_code(code).unwrap();
        let records = simulate_session(&cfg, cond, count, seed).unwrap();
        prop_assert_eq!(records.len(), count);
        for (k, r) in records.iter().enumerate() {
            prop_assert_eq!(r.sequence_number as usize, k);
            prop_assert_eq!(r.condition, cond);
            prop_assert_eq!(r.csi.len(), cfg.num_streams);
            for s in &r.csi {
                prop_assert_eq!(s.len(), 56);
                prop_assert!(s.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
            }
        }
    }
}

#[test]
fn delay_zero_tap_is_flat() {
    let mut h = vec![Complex64::new(0.0, 0.0); 8];
    h[0] = Complex64::new(1.0, 0.0);
    let csi = cir_to_csi(&h, &SimConfig::default()).unwrap();
    assert!(csi.iter().all(|x| (x - Complex64::new(1.0, 0.0)).norm() == 0.0));
}

/// Independent draws of one stream's taps: zero correlation, no Doppler.
fn independent_draws(condition: ChannelCondition, draws: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let cfg = SimConfig { fading_correlation: 0.0, max_doppler_hz: 0.0, num_streams: 1, ..Default::default() };
    let mut state = FadingState::new(&cfg, condition, seed).unwrap();
    (0..draws)
        .map(|_| {
            evolve_fading(&mut state, &cfg);
            generate_cir(&cfg, &state, 0).unwrap()
        })
        .collect()
}

#[test]
fn structure_nlos_power_profile() {
    let draws = independent_draws(ChannelCondition::NlosStructure, 1_000_000, 11);
    let n = draws.len() as f64;
    let total: f64 = draws.iter().map(|h| h.iter().map(|x| x.norm_sqr()).sum::<f64>()).sum::<f64>() / n;
    assert!((total - 1.0).abs() < 0.01, "mean total power {total}");
    let profile: Vec<f64> = (0..8).map(|m| (-0.5 * m as f64).exp()).collect();
    let psum: f64 = profile.iter().sum();
    for m in 0..8 {
        let p = draws.iter().map(|h| h[m].norm_sqr()).sum::<f64>() / n;
        let expected = profile[m] / psum;
        assert!((p / expected - 1.0).abs() < 0.02, "tap {m}: {p} vs {expected}");
    }
}

#[test]
fn los_rician_factor_estimate() {
    let draws = independent_draws(ChannelCondition::Los, 1_000_000, 12);
    let n = draws.len() as f64;
    let mean: Complex64 = draws.iter().map(|h| h[0]).sum::<Complex64>() / n;
    let var = draws.iter().map(|h| (h[0] - mean).norm_sqr()).sum::<f64>() / n;
    let k_hat = mean.norm_sqr() / var;
    assert!((k_hat / 10.0 - 1.0).abs() < 0.05, "K estimate {k_hat}");
}

fn diffuse_series(rho: f64, steps: usize, seed: u64) -> Vec<Vec<Vec<Complex64>>> {
    let cfg = SimConfig { fading_correlation: rho, ..Default::default() };
    let mut state = FadingState::new(&cfg, ChannelCondition::NlosStructure, seed).unwrap();
    // [stream][tap][time]
    let mut out = vec![vec![Vec::with_capacity(steps); cfg.num_taps]; cfg.num_streams];
    for _ in 0..steps {
        evolve_fading(&mut state, &cfg);
        for (s, per_stream) in out.iter_mut().enumerate() {
            for (m, v) in generate_cir(&cfg, &state, s).unwrap().into_iter().enumerate() {
                per_stream[m].push(v);
            }
        }
    }
    out
}

/// Normalized variance and lag-1 autocorrelation, averaged over all series.
fn series_stats(series: &[Vec<Vec<Complex64>>]) -> (f64, f64) {
    let profile = nlos_csi::channel_sim::TapProfile::new(&SimConfig::default(), ChannelCondition::NlosStructure, 0.0);
    let (mut var_ratio, mut acf, mut count) = (0.0, 0.0, 0.0);
    for per_stream in series {
        for (m, xs) in per_stream.iter().enumerate() {
            let expected = profile.diffuse_std[m].powi(2);
            let n = xs.len() as f64;
            let power = xs.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
            let lag1: f64 = xs.windows(2).map(|w| (w[1] * w[0].conj()).re).sum::<f64>() / (n - 1.0);
            var_ratio += power / expected;
            acf += lag1 / power;
            count += 1.0;
        }
    }
    (var_ratio / count, acf / count)
}

#[test]
fn ar1_autocorrelation_and_stationarity() {
    let (var_ratio, acf) = series_stats(&diffuse_series(0.99, 100_000, 21));
    assert!((acf - 0.99).abs() < 0.01, "lag-1 autocorrelation {acf}");
    assert!((var_ratio - 1.0).abs() < 0.02, "variance ratio {var_ratio}");
}

#[test]
fn zero_correlation_gives_independent_taps() {
    let (var_ratio, acf) = series_stats(&diffuse_series(0.0, 20_000, 22));
    assert!(acf.abs() < 0.01, "lag-1 autocorrelation {acf}");
    assert!((var_ratio - 1.0).abs() < 0.02);
}

#[test]
fn estimation_noise_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zeros = vec![Complex64::new(0.0, 0.0); 1_000_000];
    let noisy = add_estimation_noise(&zeros, 1.0, &mut rng).unwrap();
    let n = noisy.len() as f64;
    let mean: Complex64 = noisy.iter().sum::<Complex64>() / n;
    let var = noisy.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / n;
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
    assert!(mean.re.abs() < 0.01 && mean.im.abs() < 0.01);

    let base: Vec<Complex64> = (0..1_000_000).map(|k| Complex64::from_polar(3.0, k as f64)).collect();
    let noisy = add_estimation_noise(&base, 1.0, &mut rng).unwrap();
    let diff: Complex64 = noisy.iter().zip(&base).map(|(a, b)| a - b).sum::<Complex64>() / n;
    assert!(diff.re.abs() < 0.01 && diff.im.abs() < 0.01);
    assert!(add_estimation_noise(&base[..3], -1.0, &mut rng).is_err());
}

#[test]
fn rssi_calibration() {
    let ones = vec![vec![Complex64::new(1.0, 0.0); 56]];
    assert_eq!(compute_rssi(&ones, 45.0).unwrap(), 45);
    let tens = vec![vec![Complex64::new(0.0, 10.0); 56]];
    assert_eq!(compute_rssi(&tens, 45.0).unwrap(), 65);
    assert!(compute_rssi::<Vec<Complex64>>(&[], 45.0).is_err());

    let cfg = SimConfig::default();
    let mut los = Vec::new();
    let mut nlos = Vec::new();
    for seed in 0..20 {
        los.extend(simulate_session(&cfg, ChannelCondition::Los, 500, seed).unwrap());
        nlos.extend(simulate_session(&cfg, ChannelCondition::NlosStructure, 500, 100 + seed).unwrap());
    }
    let above = los.iter().filter(|r| r.rssi > 40).count() as f64 / los.len() as f64;
    assert!(above >= 0.95, "LOS RSSI above 40: {above}");
    let mean =
        |rs: &[nlos_csi::channel_sim::PacketRecord]| rs.iter().map(|r| r.rssi as f64).sum::<f64>() / rs.len() as f64;
    assert!(mean(&los) > mean(&nlos));
}

fn mean_cv(condition: ChannelCondition) -> f64 {
    let cfg = SimConfig::default();
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..10 {
        for r in simulate_session(&cfg, condition, 200, 1000 + seed).unwrap() {
            for s in &r.csi {
                let amps: Vec<f64> = s.iter().map(|c| (c.re as f64).hypot(c.im as f64)).collect();
                let m = amps.iter().sum::<f64>() / amps.len() as f64;
                let sd = (amps.iter().map(|a| (a - m).powi(2)).sum::<f64>() / amps.len() as f64).sqrt();
                total += sd / m;
                count += 1.0;
            }
        }
    }
    total / count
}

#[test]
fn los_is_flatter_across_subcarriers() {
    let los = mean_cv(ChannelCondition::Los);
    let nlos = mean_cv(ChannelCondition::NlosStructure);
    assert!(los < nlos, "LOS CV {los} vs NLOS CV {nlos}");
}

#[test]
fn identical_seeds_give_identical_sessions() {
    let cfg = SimConfig::default();
    for cond in ChannelCondition::ALL {
        let a = simulate_session(&cfg, cond, 50, 77).unwrap();
        let b = simulate_session(&cfg, cond, 50, 77).unwrap();
        assert_eq!(a, b);
        let c = simulate_session(&cfg, cond, 50, 78).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn noiseless_session_rssi_reflects_path_loss() {
    let cfg = SimConfig { noise_var: 0.0, rician_k_los: f64::INFINITY, ..Default::default() };
    let records = simulate_session(&cfg, ChannelCondition::Los, 5, 1).unwrap();
    // pure specular unit tap: |H| = 1 everywhere
    assert!(records.iter().all(|r| r.rssi == 50));
}
