//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nlos_csi::baselines::{feature_value, FeatureContext, FeatureKind};
use nlos_csi::channel_sim::{simulate_session, ChannelCondition, SimConfig};
use nlos_csi::eval::ScoredSample;
use nlos_csi::lstm::{Gate, LstmParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Floor on the denominator of the gradient relative error. Central
/// differences with step 1e-5 carry about 1e-11 of absolute error, so
/// components smaller than this are compared in absolute terms.
pub const GRAD_REL_FLOOR: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

type Matrix = Vec<Vec<f64>>;

struct GateMats {
    w: Matrix,
    u: Matrix,
    b: Vec<f64>,
}

fn rows(flat: &[f64], cols: usize) -> Matrix {
    flat.chunks(cols).map(|r| r.to_vec()).collect()
}

fn matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Output `ŷ` from a plain nested-matrix LSTM.
pub fn oracle_output(params: &LstmParams, xs: &[Vec<f64>]) -> f64 {
    let (dx, dh) = (params.input_dim(), params.hidden_dim());
    let gate = |g: Gate| GateMats { w: rows(params.w(g), dx), u: rows(params.u(g), dh), b: params.b(g).to_vec() };
    let (gf, gi, go, gc) = (gate(Gate::Forget), gate(Gate::Input), gate(Gate::Output), gate(Gate::Cell));
    let pre = |g: &GateMats, x: &[f64], h: &[f64]| -> Vec<f64> {
        let wx = matvec(&g.w, x);
        let uh = matvec(&g.u, h);
        (0..dh).map(|k| wx[k] + uh[k] + g.b[k]).collect()
    };
    let mut h = vec![0.0; dh];
    let mut c = vec![0.0; dh];
    for x in xs {
        let f: Vec<f64> = pre(&gf, x, &h).into_iter().map(logistic).collect();
        let i: Vec<f64> = pre(&gi, x, &h).into_iter().map(logistic).collect();
        let o: Vec<f64> = pre(&go, x, &h).into_iter().map(logistic).collect();
        let g: Vec<f64> = pre(&gc, x, &h).into_iter().map(f64::tanh).collect();
        for k in 0..dh {
            c[k] = f[k] * c[k] + i[k] * g[k];
        }
        h = (0..dh).map(|k| o[k] * c[k].tanh()).collect();
    }
    let z: f64 = params.v().iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + params.head_bias();
    logistic(z)
}

pub fn oracle_loss(params: &LstmParams, xs: &[Vec<f64>], y: f64) -> f64 {
    let p = oracle_output(params, xs);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_REL_FLOOR)
}

/// One random gradient-check instance: returns the largest relative error
/// between backpropagation and central differences of the oracle loss.
pub fn gradient_check_instance(seed: u64, dx: usize, dh: usize, p: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = LstmParams::num_params(dx, dh);
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let params = LstmParams::from_vec(dx, dh, data).unwrap();
    let xs: Vec<Vec<f64>> = (0..p).map(|_| (0..dx).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
    let trace = nlos_csi::lstm::forward(&params, &xs).unwrap();
    let grad = nlos_csi::lstm::backward(&params, &trace, y).unwrap();
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut plus = params.clone();
        plus.as_mut_slice()[k] += FD_STEP;
        let mut minus = params.clone();
        minus.as_mut_slice()[k] -= FD_STEP;
        let numeric = (oracle_loss(&plus, &xs, y) - oracle_loss(&minus, &xs, y)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(grad.as_slice()[k], numeric));
    }
    worst
}

/// Random scores with many ties, both labels present.
pub fn random_scores(seed: u64, n: usize) -> Vec<ScoredSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [10.0, 100.0, 1e9][(seed % 3) as usize];
    let mut out: Vec<ScoredSample> = (0..n)
        .map(|_| {
            let label = rng.gen_bool(0.4) as u8;
            let raw: f64 = rng.gen_range(-1.0..1.0) + 0.6 * label as f64;
            ScoredSample::new((raw * levels).round() / levels, label)
        })
        .collect();
    out[0].label = 1;
    out[1].label = 0;
    out
}

pub struct BruteCounts {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

pub fn brute_counts(samples: &[ScoredSample], alpha: f64) -> BruteCounts {
    let pos = |s: &&ScoredSample| s.label == 1;
    let neg = |s: &&ScoredSample| s.label == 0;
    BruteCounts {
        tp: samples.iter().filter(pos).filter(|s| s.score >= alpha).count(),
        fn_: samples.iter().filter(pos).filter(|s| s.score < alpha).count(),
        tn: samples.iter().filter(neg).filter(|s| s.score < alpha).count(),
        fp: samples.iter().filter(neg).filter(|s| s.score >= alpha).count(),
    }
}

pub fn brute_avg_rate(samples: &[ScoredSample], alpha: f64) -> f64 {
    let c = brute_counts(samples, alpha);
    let tpr = c.tp as f64 / (c.tp + c.fn_) as f64;
    let tnr = c.tn as f64 / (c.tn + c.fp) as f64;
    (tpr + tnr) / 2.0
}

pub fn brute_accuracy(samples: &[ScoredSample], alpha: f64) -> f64 {
    let c = brute_counts(samples, alpha);
    (c.tp + c.tn) as f64 / samples.len() as f64
}

/// Mann-Whitney form of the AUC, ties counted half.
pub fn brute_auc(samples: &[ScoredSample]) -> f64 {
    let pos = samples.iter().filter(|s| s.label == 1).count() as u128;
    let neg = samples.len() as u128 - pos;
    let mut twice = 0u128;
    for a in samples.iter().filter(|s| s.label == 1) {
        for b in samples.iter().filter(|s| s.label == 0) {
            if a.score > b.score {
                twice += 2;
            } else if a.score == b.score {
                twice += 1;
            }
        }
    }
    twice as f64 / (2 * pos * neg) as f64
}

/// Distinct scores, descending.
pub fn distinct_desc(samples: &[ScoredSample]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().map(|s| s.score).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v.dedup();
    v
}

/// Best objective over every "score >= t" rule, and the smallest optimal `t`
/// (among the distinct scores and `+inf`).
pub fn brute_best(samples: &[ScoredSample], objective: fn(&[ScoredSample], f64) -> f64) -> (f64, f64) {
    let mut candidates = distinct_desc(samples);
    candidates.insert(0, f64::INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for t in candidates {
        let v = objective(samples, t);
        if v >= best.0 {
            best = (v, t);
        }
    }
    best
}

/// One stream of simulated CSI, `p` packets, widened to f64.
pub fn simulated_window(condition: ChannelCondition, p: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let cfg = SimConfig::default();
    let records = simulate_session(&cfg, condition, p, seed).unwrap();
    records.iter().map(|r| r.csi[0].iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect()).collect()
}

/// Largest change of any feature when the window is multiplied by a random
/// complex factor with modulus in [0.1, 10].
pub fn scale_invariance_error(seed: u64, p: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = FeatureContext::from_sim(&SimConfig::default());
    let cond = ChannelCondition::ALL[(seed % 3) as usize];
    let window = simulated_window(cond, p, seed);
    let factor = Complex64::from_polar(rng.gen_range(0.1..10.0), rng.gen_range(0.0..std::f64::consts::TAU));
    let scaled: Vec<Vec<Complex64>> = window.iter().map(|pkt| pkt.iter().map(|c| c * factor).collect()).collect();
    FeatureKind::ALL
        .iter()
        .map(|&kind| {
            let a = feature_value(kind, &window, &ctx).unwrap();
            let b = feature_value(kind, &scaled, &ctx).unwrap();
            (a - b).abs()
        })
        .fold(0.0, f64::max)
}
