use std::collections::{HashMap, HashSet};

use nlos_csi::channel_sim::{simulate_campaign, CampaignPlan, ChannelCondition, SimConfig};
use nlos_csi::dataset::{
    decode_dataset, denormalize, encode_dataset, largest_remainder, normalize, partition_sessions, read_dataset, split,
    write_dataset, Dataset, NormStats, SequenceSample, StreamSelection, WindowOptions, DEFAULT_RATIOS,
};
use nlos_csi::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_dataset(seed: u64) -> Dataset {
    let cfg = SimConfig { num_streams: 2, ..Default::default() };
    let plan = CampaignPlan { los_packets: 200, nlos_structure_packets: 300, nlos_body_packets: 160, session_len: 40 };
    let mut ds = Dataset::new(
        cfg.subcarriers.clone(),
        cfg.dft_size,
        cfg.num_streams,
        simulate_campaign(&cfg, &plan, seed).unwrap(),
    )
    .unwrap();
    ds.metadata = serde_json::json!({"seed": seed});
    ds
}

#[test]
fn encoding_round_trips_exactly() {
    let ds = small_dataset(1);
    let bytes = encode_dataset(&ds).unwrap();
    assert_eq!(decode_dataset(&bytes).unwrap(), ds);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    write_dataset(&path, &ds).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), ds);
}

#[test]
fn truncation_reports_the_failing_record() {
    let ds = small_dataset(2);
    let bytes = encode_dataset(&ds).unwrap();
    let record_size = 4 + 1 + 2 + 2 * 56 * 8;
    let body_start = bytes.len() - ds.num_records() * record_size;
    for k in [0usize, 1, 17, ds.num_records() - 1] {
        let cut = body_start + k * record_size + record_size / 2;
        match decode_dataset(&bytes[..cut]) {
            Err(Error::Parse { record, last_complete, .. }) => {
                assert_eq!(record, k);
                assert_eq!(last_complete, k.checked_sub(1));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }
    assert!(matches!(decode_dataset(&bytes[..2]), Err(Error::Parse { record: 0, .. })));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_dataset(&extra), Err(Error::Parse { .. })));
}

#[test]
fn bad_magic_is_rejected() {
    let ds = small_dataset(3);
    let mut bytes = encode_dataset(&ds).unwrap();
    let pos = bytes.windows(4).position(|w| w == b"nlos").unwrap();
    bytes[pos] = b'x';
    assert!(matches!(decode_dataset(&bytes), Err(Error::Parse { record: 0, last_complete: None, .. })));
}

#[test]
fn windows_follow_the_record_layout() {
    let ds = small_dataset(4);
    let opts = WindowOptions { p: 7, stride: 5, streams: StreamSelection::All, include_rssi: true };
    let samples = ds.windows(&opts).unwrap();
    let expected: usize = ds.sessions.iter().map(|s| 2 * ((s.records.len() - 7) / 5 + 1)).sum();
    assert_eq!(samples.len(), expected);
    for s in samples.iter().step_by(13) {
        let o = s.origin.unwrap();
        let session = &ds.sessions[o.session];
        assert_eq!(s.label, session.condition.label());
        assert_eq!(s.dim(), 113);
        for (t, x) in s.steps.iter().enumerate() {
            let r = &session.records[o.start + t];
            assert_eq!(x[0], r.rssi as f64);
            for (k, c) in r.csi[o.stream].iter().enumerate() {
                assert_eq!((x[1 + 2 * k], x[2 + 2 * k]), (c.re as f64, c.im as f64));
            }
        }
    }
    let csi_only = ds.windows(&WindowOptions { include_rssi: false, ..opts }).unwrap();
    assert_eq!(csi_only[0].dim(), 112);
    assert_eq!(csi_only[0].steps[0][..], samples[0].steps[0][1..]);
}

#[test]
fn windows_longer_than_sessions_are_empty() {
    let ds = small_dataset(5);
    assert!(ds.windows(&WindowOptions::new(41, true)).unwrap().is_empty());
    assert!(ds.windows(&WindowOptions { streams: StreamSelection::Single(2), ..WindowOptions::new(5, true) }).is_err());
}

fn session_split(seed: u64) -> (Vec<SequenceSample>, nlos_csi::dataset::DatasetSplit) {
    let samples = small_dataset(6).windows(&WindowOptions::new(10, true)).unwrap();
    let out = split(samples.clone(), DEFAULT_RATIOS, seed).unwrap();
    (samples, out)
}

#[test]
fn sessions_never_straddle_partitions() {
    let (samples, out) = session_split(11);
    assert_eq!(out.train.len() + out.validation.len() + out.test.len(), samples.len());
    let sessions =
        |set: &[SequenceSample]| -> HashSet<usize> { set.iter().map(|s| s.origin.unwrap().session).collect() };
    let (a, b, c) = (sessions(&out.train), sessions(&out.validation), sessions(&out.test));
    assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
    for set in [&out.train, &out.validation, &out.test] {
        assert!(set.iter().any(|s| s.label == 1) && set.iter().any(|s| s.label == 0));
    }
}

#[test]
fn session_partition_matches_split() {
    let (samples, out) = session_split(12);
    let keys: Vec<(usize, u8)> = samples.iter().map(|s| (s.origin.unwrap().session, s.label)).collect();
    let assign: HashMap<usize, usize> = partition_sessions(&keys, DEFAULT_RATIOS, 12).unwrap();
    for (part, set) in [&out.train, &out.validation, &out.test].into_iter().enumerate() {
        assert!(set.iter().all(|s| assign[&s.origin.unwrap().session] == part));
    }
}

#[test]
fn split_is_deterministic() {
    let (_, a) = session_split(13);
    let (_, b) = session_split(13);
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn statistics_come_from_training_only() {
    let (_, out) = session_split(14);
    let recomputed = NormStats::from_samples(&out.train, 113);
    assert_eq!(recomputed, out.stats);
    let norm = out.normalized().unwrap();
    let count = (norm.train.len() * 10) as f64;
    for d in 0..113 {
        let vals = norm.train.iter().flat_map(|s| s.steps.iter().map(move |x| x[d]));
        let mean = vals.clone().sum::<f64>() / count;
        let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        assert!(mean.abs() < 1e-9, "dim {d}: mean {mean}");
        assert!((var - 1.0).abs() < 1e-9, "dim {d}: var {var}");
    }
}

#[test]
fn untagged_samples_split_by_largest_remainder() {
    let samples: Vec<SequenceSample> =
        (0..101).map(|k| SequenceSample { steps: vec![vec![k as f64]], label: (k % 2) as u8, origin: None }).collect();
    let out = split(samples, DEFAULT_RATIOS, 0).unwrap();
    let counts = largest_remainder(101, &DEFAULT_RATIOS);
    assert_eq!([out.train.len(), out.validation.len(), out.test.len()], counts);
}

#[test]
fn bad_ratios_are_a_config_error() {
    let samples = small_dataset(7).windows(&WindowOptions::new(10, true)).unwrap();
    assert!(matches!(split(samples.clone(), [0.5, 0.5, 0.5], 0), Err(Error::Config(_))));
    assert!(matches!(split(samples, [1.0, 0.0, 0.0], 0), Err(Error::Config(_))));
}

#[test]
fn campaign_counts_follow_the_plan() {
    let ds = small_dataset(8);
    assert_eq!(ds.count(ChannelCondition::Los), 200);
    assert_eq!(ds.count(ChannelCondition::NlosStructure), 300);
    assert_eq!(ds.count(ChannelCondition::NlosBody), 160);
    assert!(ds.sessions.iter().all(|s| s.records.len() <= 40));
}

proptest! {
    #[test]
    fn largest_remainder_is_exact_and_close(n in 0usize..10_000, a in 1u32..100, b in 1u32..100, c in 1u32..100) {
        let total = (a + b + c) as f64;
        let ratios = [a as f64 / total, b as f64 / total, c as f64 / total];
        let counts = largest_remainder(n, &ratios);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (k, r) in counts.iter().zip(ratios) {
            prop_assert!((*k as f64 - r * n as f64).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn normalize_then_denormalize_is_identity(seed in any::<u64>(), dim in 1usize..8, len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = NormStats {
            mean: (0..dim).map(|_| rng.gen_range(-50.0..50.0)).collect(),
            std: (0..dim).map(|_| rng.gen_range(0.01..20.0)).collect(),
        };
        let sample = SequenceSample {
            steps: (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-100.0..100.0)).collect()).collect(),
            label: 1,
            origin: None,
        };
        let back = denormalize(&normalize(&sample, &stats).unwrap(), &stats).unwrap();
        for (x, y) in back.steps.iter().flatten().zip(sample.steps.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
