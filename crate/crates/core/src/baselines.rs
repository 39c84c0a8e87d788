//! Handcrafted window features: skewness of the dominant-path power,
//! kurtosis of the spread of normalized CSI amplitudes, and the
//! amplitude-weighted phase variance ρ.
//!
//! Raw features grow as the channel becomes more NLOS-like. [`FeatureKind::los_score`]
//! maps them onto the shared convention where `score >= alpha` means LOS.
//! Moments are population moments; kurtosis is raw (not excess). A window
//! whose statistic has (numerically) zero variance yields exactly 0.

use std::cell::RefCell;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel_sim::{PacketRecord, SimConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Windows shorter than this have no meaningful third or fourth moment.
pub const MIN_WINDOW: usize = 3;

/// Relative size below which a variance counts as zero.
const ZERO_VARIANCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Skewness,
    Kurtosis,
    /// The ρ factor.
    Phase,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Skewness, FeatureKind::Kurtosis, FeatureKind::Phase];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Skewness => "skewness",
            FeatureKind::Kurtosis => "kurtosis",
            FeatureKind::Phase => "phase",
        }
    }

    /// Orientation used for ROC analysis: larger means more LOS-like.
    ///
    /// All three raw features are negated.
    pub fn los_score(self, value: f64) -> f64 {
        -value
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skewness" => Ok(FeatureKind::Skewness),
            "kurtosis" => Ok(FeatureKind::Kurtosis),
            "phase" | "rho" => Ok(FeatureKind::Phase),
            other => Err(Error::config(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Subcarrier layout and tap count needed to evaluate features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContext {
    pub subcarriers: Vec<i32>,
    pub dft_size: usize,
    /// Number of recovered CIR taps searched for the dominant path.
    pub num_taps: usize,
}

impl FeatureContext {
    pub fn from_sim(config: &SimConfig) -> Self {
        FeatureContext { subcarriers: config.subcarriers.clone(), dft_size: config.dft_size, num_taps: config.num_taps }
    }

    /// Uses `metadata.sim.num_taps` when the dataset carries it.
    pub fn from_dataset(ds: &Dataset) -> Self {
        let num_taps = ds
            .metadata
            .pointer("/sim/num_taps")
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .unwrap_or(SimConfig::default().num_taps);
        FeatureContext {
            subcarriers: ds.subcarriers.clone(),
            dft_size: ds.dft_size,
            num_taps: num_taps.min(ds.dft_size),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitudes of the first `num_taps` taps of the CIR recovered by an
/// inverse DFT of the CSI placed on its subcarrier bins (other bins zero).
///
/// Indices may be given as `-N/2..N` and are taken modulo `N`.
pub fn recover_cir(csi: &[Complex64], subcarriers: &[i32], dft_size: usize, num_taps: usize) -> Result<Vec<f64>> {
    if csi.len() != subcarriers.len() {
        return Err(Error::input("CSI length does not match the subcarrier set"));
    }
    if dft_size == 0 || num_taps > dft_size || subcarriers.len() > dft_size {
        return Err(Error::input("invalid DFT size for CIR recovery"));
    }
    let n = dft_size as i64;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); dft_size];
    let mut used = vec![false; dft_size];
    for (&k, &h) in subcarriers.iter().zip(csi) {
        let k = k as i64;
        if k < -n / 2 || k >= n {
            return Err(Error::input(format!("subcarrier index {k} outside the DFT range")));
        }
        let bin = k.rem_euclid(n) as usize;
        if used[bin] {
            return Err(Error::input(format!("subcarrier index {k} aliases another index")));
        }
        used[bin] = true;
        spectrum[bin] = h;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(dft_size));
    fft.process(&mut spectrum);
    let scale = 1.0 / dft_size as f64;
    Ok(spectrum[..num_taps].iter().map(|c| c.norm() * scale).collect())
}

struct Moments {
    m2: f64,
    m3: f64,
    m4: f64,
    /// Largest |value|, for the zero-variance test.
    max_abs: f64,
}

fn central_moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let max_abs = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Moments { m2: m2 / n, m3: m3 / n, m4: m4 / n, max_abs }
}

impl Moments {
    fn degenerate(&self) -> bool {
        !(self.m2 > (ZERO_VARIANCE_RTOL * self.max_abs).powi(2))
    }
}

/// Population skewness `m3 / m2^{3/2}`, 0 for a constant sequence.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = central_moments(xs);
    if m.degenerate() {
        0.0
    } else {
        m.m3 / m.m2.powf(1.5)
    }
}

/// Raw kurtosis `m4 / m2²`, 0 for a constant sequence.
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = central_moments(xs);
    if m.degenerate() {
        0.0
    } else {
        m.m4 / (m.m2 * m.m2)
    }
}

fn check_window<V: AsRef<[Complex64]>>(window: &[V], width: usize) -> Result<()> {
    if window.len() < MIN_WINDOW {
        return Err(Error::input(format!("feature windows need at least {MIN_WINDOW} packets")));
    }
    if window.iter().any(|p| p.as_ref().len() != width) {
        return Err(Error::input("packets of a window must cover the same subcarriers"));
    }
    Ok(())
}

/// Skewness over the window of each packet's strongest recovered tap power.
pub fn skewness_feature<V: AsRef<[Complex64]>>(window: &[V], ctx: &FeatureContext) -> Result<f64> {
    check_window(window, ctx.subcarriers.len())?;
    let mut d = Vec::with_capacity(window.len());
    for p in window {
        let taps = recover_cir(p.as_ref(), &ctx.subcarriers, ctx.dft_size, ctx.num_taps)?;
        d.push(taps.iter().map(|a| a * a).fold(0.0, f64::max));
    }
    Ok(skewness(&d))
}

/// Standard deviation over subcarriers of `|H|` divided by its own mean.
pub fn normalized_amplitude_spread(csi: &[Complex64]) -> f64 {
    let amps: Vec<f64> = csi.iter().map(|c| c.norm()).collect();
    let n = amps.len() as f64;
    let mean = amps.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return 0.0;
    }
    let var = amps.iter().map(|a| (a / mean - 1.0).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Kurtosis over the window of the per-packet normalized amplitude spread.
pub fn kurtosis_feature<V: AsRef<[Complex64]>>(window: &[V], ctx: &FeatureContext) -> Result<f64> {
    check_window(window, ctx.subcarriers.len())?;
    let s: Vec<f64> = window.iter().map(|p| normalized_amplitude_spread(p.as_ref())).collect();
    Ok(kurtosis(&s))
}

/// Unwrapped phase minus its least-squares line in the subcarrier index.
pub fn phase_calibrate(csi: &[Complex64], subcarriers: &[i32]) -> Result<Vec<f64>> {
    if csi.len() != subcarriers.len() || csi.len() < 2 {
        return Err(Error::input("phase calibration needs at least two subcarriers"));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut phase = Vec::with_capacity(csi.len());
    let mut prev_raw = csi[0].arg();
    let mut offset = 0.0;
    phase.push(prev_raw);
    for c in &csi[1..] {
        let raw = c.arg();
        let d = raw - prev_raw;
        offset -= tau * (d / tau).round();
        phase.push(raw + offset);
        prev_raw = raw;
    }
    let xs: Vec<f64> = subcarriers.iter().map(|&k| k as f64).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = phase.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&phase).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(xs.iter().zip(&phase).map(|(x, y)| y - my - slope * (x - mx)).collect())
}

/// `Σ_n w_n var_p(φ_p(n))` with `w_n` the mean amplitude of subcarrier `n`
/// normalized to sum to one.
pub fn rho_factor<V: AsRef<[Complex64]>>(window: &[V], ctx: &FeatureContext) -> Result<f64> {
    let width = ctx.subcarriers.len();
    check_window(window, width)?;
    let phases = window.iter().map(|p| phase_calibrate(p.as_ref(), &ctx.subcarriers)).collect::<Result<Vec<_>>>()?;
    let count = window.len() as f64;
    let mut weights = vec![0.0; width];
    for p in window {
        for (w, c) in weights.iter_mut().zip(p.as_ref()) {
            *w += c.norm();
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Ok(0.0);
    }
    let mut rho = 0.0;
    for n in 0..width {
        let mean = phases.iter().map(|ph| ph[n]).sum::<f64>() / count;
        let var = phases.iter().map(|ph| (ph[n] - mean).powi(2)).sum::<f64>() / count;
        rho += weights[n] / total * var;
    }
    Ok(rho)
}

/// Median; the mean of the two central values for an even count.
pub fn median_over_streams(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("median of no values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

pub fn feature_value<V: AsRef<[Complex64]>>(kind: FeatureKind, window: &[V], ctx: &FeatureContext) -> Result<f64> {
    match kind {
        FeatureKind::Skewness => skewness_feature(window, ctx),
        FeatureKind::Kurtosis => kurtosis_feature(window, ctx),
        FeatureKind::Phase => rho_factor(window, ctx),
    }
}

/// CSI of one stream over a run of packets, widened to `f64`.
pub fn stream_window(records: &[PacketRecord], stream: usize) -> Result<Vec<Vec<Complex64>>> {
    records
        .iter()
        .map(|r| {
            r.csi
                .get(stream)
                .map(|s| s.iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect())
                .ok_or_else(|| Error::input(format!("stream {stream} out of range")))
        })
        .collect()
}

/// Feature of one window, median over streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub session: usize,
    pub start: usize,
    pub label: u8,
    pub per_stream: Vec<f64>,
    /// Median of `per_stream`.
    pub value: f64,
}

impl FeatureRow {
    pub fn los_score(&self, kind: FeatureKind) -> f64 {
        kind.los_score(self.value)
    }
}

/// Features of every `p`-packet window (every `stride` packets) of every session.
pub fn dataset_features(
    ds: &Dataset,
    kind: FeatureKind,
    p: usize,
    stride: usize,
    ctx: &FeatureContext,
) -> Result<Vec<FeatureRow>> {
    if p < MIN_WINDOW || stride == 0 {
        return Err(Error::input(format!("feature windows need p >= {MIN_WINDOW} and a positive stride")));
    }
    let jobs: Vec<(usize, usize)> = ds
        .sessions
        .iter()
        .enumerate()
        .filter(|(_, s)| s.records.len() >= p)
        .flat_map(|(i, s)| (0..=s.records.len() - p).step_by(stride).map(move |start| (i, start)))
        .collect();
    jobs.par_iter()
        .map(|&(session, start)| {
            let s = &ds.sessions[session];
            let records = &s.records[start..start + p];
            let per_stream = (0..ds.num_streams)
                .map(|k| feature_value(kind, &stream_window(records, k)?, ctx))
                .collect::<Result<Vec<f64>>>()?;
            Ok(FeatureRow {
                session,
                start,
                label: s.condition.label(),
                value: median_over_streams(&per_stream)?,
                per_stream,
            })
        })
        .collect()
}

pub fn write_feature_csv<W: Write>(mut out: W, kind: FeatureKind, rows: &[FeatureRow]) -> Result<()> {
    writeln!(out, "feature_kind,session,start,value,label")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", kind, r.session, r.start, r.value, r.label)?;
    }
    Ok(())
}
