//! Single-layer LSTM sequence classifier with a sigmoid head on the last
//! hidden state, plus exact gradients by backpropagation through time.
//!
//! Per step `p`, with `σ` the logistic function:
//!
//! ```text
//! f = σ(W_f x + U_f h + b_f)     i = σ(W_i x + U_i h + b_i)
//! o = σ(W_o x + U_o h + b_o)     g = tanh(W_c x + U_c h + b_c)
//! c' = f∘c + i∘g                 h' = o∘tanh(c')
//! ```
//!
//! and the output is `ŷ = σ(V h_P + b)`. Hidden and cell state start at zero.
//!
//! All parameters live in one flat buffer in checkpoint order:
//! `W_f, U_f, b_f, W_i, U_i, b_i, W_o, U_o, b_o, W_c, U_c, b_c, V, b`,
//! matrices row-major.

use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{input_dim, NormStats};
use crate::error::{Error, Result};
use crate::eval::extended_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Output,
    Cell,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Output, Gate::Cell];

    fn index(self) -> usize {
        match self {
            Gate::Forget => 0,
            Gate::Input => 1,
            Gate::Output => 2,
            Gate::Cell => 3,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Cell => "c",
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy `-[y log σ(z) + (1-y) log(1-σ(z))]` evaluated from the logit.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Every trainable value of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    dx: usize,
    dh: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Zeros,
    /// `U(-r, r)` with `r = 1/sqrt(D_h)` for `U`, `1/sqrt(D_x)` for `W` and
    /// `V`; biases zero except `b_f = 1`.
    ScaledUniform,
}

impl LstmParams {
    pub fn num_params(dx: usize, dh: usize) -> usize {
        4 * (dh * dx + dh * dh + dh) + dh + 1
    }

    pub fn zeros(dx: usize, dh: usize) -> Self {
        LstmParams { dx, dh, data: vec![0.0; Self::num_params(dx, dh)] }
    }

    pub fn from_vec(dx: usize, dh: usize, data: Vec<f64>) -> Result<Self> {
        if dx == 0 || dh == 0 {
            return Err(Error::input("D_x and D_h must be positive"));
        }
        if data.len() != Self::num_params(dx, dh) {
            return Err(Error::input(format!(
                "expected {} parameters for D_x={dx}, D_h={dh}, got {}",
                Self::num_params(dx, dh),
                data.len()
            )));
        }
        Ok(LstmParams { dx, dh, data })
    }

    pub fn input_dim(&self) -> usize {
        self.dx
    }

    pub fn hidden_dim(&self) -> usize {
        self.dh
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &LstmParams) -> bool {
        self.dx == other.dx && self.dh == other.dh
    }

    fn gate_stride(&self) -> usize {
        self.dh * self.dx + self.dh * self.dh + self.dh
    }

    fn w_range(&self, g: Gate) -> Range<usize> {
        let start = g.index() * self.gate_stride();
        start..start + self.dh * self.dx
    }

    fn u_range(&self, g: Gate) -> Range<usize> {
        let start = g.index() * self.gate_stride() + self.dh * self.dx;
        start..start + self.dh * self.dh
    }

    fn b_range(&self, g: Gate) -> Range<usize> {
        let start = g.index() * self.gate_stride() + self.dh * self.dx + self.dh * self.dh;
        start..start + self.dh
    }

    fn v_range(&self) -> Range<usize> {
        let start = 4 * self.gate_stride();
        start..start + self.dh
    }

    /// `D_h x D_x`, row-major.
    pub fn w(&self, g: Gate) -> &[f64] {
        &self.data[self.w_range(g)]
    }

    pub fn w_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.w_range(g);
        &mut self.data[r]
    }

    /// `D_h x D_h`, row-major.
    pub fn u(&self, g: Gate) -> &[f64] {
        &self.data[self.u_range(g)]
    }

    pub fn u_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.u_range(g);
        &mut self.data[r]
    }

    pub fn b(&self, g: Gate) -> &[f64] {
        &self.data[self.b_range(g)]
    }

    pub fn b_mut(&mut self, g: Gate) -> &mut [f64] {
        let r = self.b_range(g);
        &mut self.data[r]
    }

    /// Output row vector `V`.
    pub fn v(&self) -> &[f64] {
        &self.data[self.v_range()]
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        let r = self.v_range();
        &mut self.data[r]
    }

    pub fn head_bias(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn head_bias_mut(&mut self) -> &mut f64 {
        self.data.last_mut().unwrap()
    }

    /// Named parameter blocks in storage order.
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::with_capacity(14);
        for g in Gate::ALL {
            out.push((format!("W_{}", g.suffix()), self.w_range(g)));
            out.push((format!("U_{}", g.suffix()), self.u_range(g)));
            out.push((format!("b_{}", g.suffix()), self.b_range(g)));
        }
        out.push(("V".to_string(), self.v_range()));
        let n = self.data.len();
        out.push(("b".to_string(), n - 1..n));
        out
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite_block(&self) -> Option<String> {
        self.blocks()
            .into_iter()
            .find(|(_, r)| self.data[r.clone()].iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn add_assign(&mut self, other: &LstmParams) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn init_params(dx: usize, dh: usize, seed: u64, scheme: InitScheme) -> Result<LstmParams> {
    if dx == 0 || dh == 0 {
        return Err(Error::input("D_x and D_h must be positive"));
    }
    let mut params = LstmParams::zeros(dx, dh);
    if scheme == InitScheme::Zeros {
        return Ok(params);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rx = 1.0 / (dx as f64).sqrt();
    let rh = 1.0 / (dh as f64).sqrt();
    for g in Gate::ALL {
        params.w_mut(g).iter_mut().for_each(|v| *v = rng.gen_range(-rx..rx));
        params.u_mut(g).iter_mut().for_each(|v| *v = rng.gen_range(-rh..rh));
    }
    params.v_mut().iter_mut().for_each(|v| *v = rng.gen_range(-rx..rx));
    params.b_mut(Gate::Forget).iter_mut().for_each(|v| *v = 1.0);
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(dh: usize) -> Self {
        LstmState { h: vec![0.0; dh], c: vec![0.0; dh] }
    }
}

/// Everything one step needs to be differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    /// Candidate `tanh(W_c x + U_c h + b_c)`.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub steps: Vec<StepCache>,
    pub logit: f64,
    pub output: f64,
}

fn affine(params: &LstmParams, g: Gate, x: &[f64], h: &[f64], out: &mut [f64]) {
    let (dx, dh) = (params.dx, params.dh);
    let w = params.w(g);
    let u = params.u(g);
    let b = params.b(g);
    for r in 0..dh {
        let wx: f64 = w[r * dx..(r + 1) * dx].iter().zip(x).map(|(a, b)| a * b).sum();
        let uh: f64 = u[r * dh..(r + 1) * dh].iter().zip(h).map(|(a, b)| a * b).sum();
        out[r] = wx + uh + b[r];
    }
}

/// One recurrent step.
pub fn step(params: &LstmParams, x: &[f64], state: &LstmState) -> Result<(LstmState, StepCache)> {
    if x.len() != params.dx {
        return Err(Error::input(format!("input dimension {} does not match D_x={}", x.len(), params.dx)));
    }
    if state.h.len() != params.dh || state.c.len() != params.dh {
        return Err(Error::input("state dimension does not match D_h"));
    }
    let dh = params.dh;
    let mut f = vec![0.0; dh];
    let mut i = vec![0.0; dh];
    let mut o = vec![0.0; dh];
    let mut g = vec![0.0; dh];
    affine(params, Gate::Forget, x, &state.h, &mut f);
    affine(params, Gate::Input, x, &state.h, &mut i);
    affine(params, Gate::Output, x, &state.h, &mut o);
    affine(params, Gate::Cell, x, &state.h, &mut g);
    for k in 0..dh {
        f[k] = sigmoid(f[k]);
        i[k] = sigmoid(i[k]);
        o[k] = sigmoid(o[k]);
        g[k] = g[k].tanh();
    }
    let c: Vec<f64> = (0..dh).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..dh).map(|k| o[k] * tanh_c[k]).collect();
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        f,
        i,
        o,
        g,
        c: c.clone(),
        tanh_c,
        h: h.clone(),
    };
    Ok((LstmState { h, c }, cache))
}

/// Output logit `V h + b` for a hidden vector.
pub fn head_logit(params: &LstmParams, h: &[f64]) -> f64 {
    params.v().iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + params.head_bias()
}

/// Run the whole sequence from a zero state and keep the trace for `backward`.
pub fn forward<X: AsRef<[f64]>>(params: &LstmParams, xs: &[X]) -> Result<ForwardTrace> {
    if xs.is_empty() {
        return Err(Error::input("empty input sequence"));
    }
    let mut state = LstmState::zeros(params.dh);
    let mut steps = Vec::with_capacity(xs.len());
    for x in xs {
        let (next, cache) = step(params, x.as_ref(), &state)?;
        state = next;
        steps.push(cache);
    }
    let logit = head_logit(params, &state.h);
    Ok(ForwardTrace { steps, logit, output: sigmoid(logit) })
}

/// Output logit without keeping a trace.
pub fn predict_logit<X: AsRef<[f64]>>(params: &LstmParams, xs: &[X]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::input("empty input sequence"));
    }
    let dh = params.dh;
    let mut h = vec![0.0; dh];
    let mut c = vec![0.0; dh];
    let mut z = [vec![0.0; dh], vec![0.0; dh], vec![0.0; dh], vec![0.0; dh]];
    for x in xs {
        let x = x.as_ref();
        if x.len() != params.dx {
            return Err(Error::input(format!("input dimension {} does not match D_x={}", x.len(), params.dx)));
        }
        for (gate, out) in Gate::ALL.iter().zip(z.iter_mut()) {
            affine(params, *gate, x, &h, out);
        }
        for k in 0..dh {
            let f = sigmoid(z[0][k]);
            let i = sigmoid(z[1][k]);
            let o = sigmoid(z[2][k]);
            c[k] = f * c[k] + i * z[3][k].tanh();
            h[k] = o * c[k].tanh();
        }
    }
    Ok(head_logit(params, &h))
}

/// LOS probability `ŷ`.
pub fn predict<X: AsRef<[f64]>>(params: &LstmParams, xs: &[X]) -> Result<f64> {
    predict_logit(params, xs).map(sigmoid)
}

/// Gradient of the per-sample cross-entropy with respect to every parameter.
pub fn backward(params: &LstmParams, trace: &ForwardTrace, y: f64) -> Result<LstmParams> {
    let mut grad = LstmParams::zeros(params.dx, params.dh);
    backward_into(params, trace, y, &mut grad)?;
    Ok(grad)
}

/// Like [`backward`], accumulating into `grad`.
pub fn backward_into(params: &LstmParams, trace: &ForwardTrace, y: f64, grad: &mut LstmParams) -> Result<()> {
    let (dx, dh) = (params.dx, params.dh);
    if !grad.same_shape(params) {
        return Err(Error::input("gradient buffer shape does not match parameters"));
    }
    let Some(last) = trace.steps.last() else {
        return Err(Error::input("empty forward trace"));
    };
    if trace.steps.iter().any(|s| s.x.len() != dx || s.h.len() != dh || s.c_prev.len() != dh) {
        return Err(Error::input("forward trace does not match parameter shapes"));
    }

    let dz_out = trace.output - y;
    for (gv, h) in grad.v_mut().iter_mut().zip(&last.h) {
        *gv += dz_out * h;
    }
    *grad.head_bias_mut() += dz_out;

    let mut dh_next: Vec<f64> = params.v().iter().map(|v| dz_out * v).collect();
    let mut dc_next = vec![0.0; dh];
    // pre-activation gradients per gate, in Gate::ALL order
    let mut dz = [vec![0.0; dh], vec![0.0; dh], vec![0.0; dh], vec![0.0; dh]];

    for s in trace.steps.iter().rev() {
        for k in 0..dh {
            let dh_k = dh_next[k];
            let d_o = dh_k * s.tanh_c[k];
            let dc = dc_next[k] + dh_k * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_f = dc * s.c_prev[k];
            let d_i = dc * s.g[k];
            let d_g = dc * s.i[k];
            dc_next[k] = dc * s.f[k];
            dz[0][k] = d_f * s.f[k] * (1.0 - s.f[k]);
            dz[1][k] = d_i * s.i[k] * (1.0 - s.i[k]);
            dz[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dz[3][k] = d_g * (1.0 - s.g[k] * s.g[k]);
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (gate, dzg) in Gate::ALL.iter().zip(&dz) {
            let gw = grad.w_range(*gate);
            let gu = grad.u_range(*gate);
            let gb = grad.b_range(*gate);
            let u = params.u(*gate);
            for r in 0..dh {
                let d = dzg[r];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad.data[gw.start + r * dx..gw.start + (r + 1) * dx];
                for (acc, xv) in row.iter_mut().zip(&s.x) {
                    *acc += d * xv;
                }
                let row = &mut grad.data[gu.start + r * dh..gu.start + (r + 1) * dh];
                for (acc, hv) in row.iter_mut().zip(&s.h_prev) {
                    *acc += d * hv;
                }
                grad.data[gb.start + r] += d;
                for (acc, uv) in dh_next.iter_mut().zip(&u[r * dh..(r + 1) * dh]) {
                    *acc += d * uv;
                }
            }
        }
    }
    Ok(())
}

/// Per-sample loss of a trace.
pub fn trace_loss(trace: &ForwardTrace, y: f64) -> f64 {
    bce_with_logit(trace.logit, y)
}

pub const CHECKPOINT_MAGIC: &str = "nlos-csi-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained classifier with everything needed to score raw windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: LstmParams,
    pub stats: NormStats,
    /// Decision threshold: `ŷ >= alpha` means LOS.
    pub alpha: f64,
    pub num_subcarriers: usize,
    pub include_rssi: bool,
    /// Provenance: windowing, split and training settings.
    pub metadata: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    magic: String,
    version: u32,
    d_x: usize,
    d_h: usize,
    num_subcarriers: usize,
    include_rssi: bool,
    #[serde(with = "extended_float")]
    alpha: f64,
    num_params: usize,
    stats: NormStats,
    #[serde(default)]
    metadata: serde_json::Value,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let p = &ckpt.params;
    if ckpt.stats.dim() != p.dx || ckpt.stats.std.len() != p.dx {
        return Err(Error::input("normalization statistics do not match D_x"));
    }
    if input_dim(ckpt.num_subcarriers, ckpt.include_rssi) != p.dx {
        return Err(Error::input("D_x inconsistent with subcarrier count and RSSI mode"));
    }
    let header = CheckpointHeader {
        magic: CHECKPOINT_MAGIC.to_string(),
        version: CHECKPOINT_VERSION,
        d_x: p.dx,
        d_h: p.dh,
        num_subcarriers: ckpt.num_subcarriers,
        include_rssi: ckpt.include_rssi,
        alpha: ckpt.alpha,
        num_params: p.len(),
        stats: ckpt.stats.clone(),
        metadata: ckpt.metadata.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(4 + header.len() + 8 * p.len());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in p.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let load = |m: String| Error::Load(m);
    if bytes.len() < 4 {
        return Err(load("file too short".into()));
    }
    let hlen = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(4..4 + hlen).ok_or_else(|| load("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(header_bytes).map_err(|e| load(format!("malformed header: {e}")))?;
    if header.magic != CHECKPOINT_MAGIC {
        return Err(load(format!("bad magic {:?}", header.magic)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(load(format!("unsupported version {}", header.version)));
    }
    if header.d_x == 0 || header.d_h == 0 {
        return Err(load("zero dimension".into()));
    }
    if header.num_params != LstmParams::num_params(header.d_x, header.d_h) {
        return Err(load(format!(
            "parameter count {} inconsistent with D_x={}, D_h={}",
            header.num_params, header.d_x, header.d_h
        )));
    }
    if input_dim(header.num_subcarriers, header.include_rssi) != header.d_x {
        return Err(load("D_x inconsistent with subcarrier count and RSSI mode".into()));
    }
    if header.stats.mean.len() != header.d_x || header.stats.std.len() != header.d_x {
        return Err(load("normalization statistics do not match D_x".into()));
    }
    let block = &bytes[4 + hlen..];
    if block.len() != 8 * header.num_params {
        return Err(load(format!("parameter block has {} bytes, expected {}", block.len(), 8 * header.num_params)));
    }
    let data: Vec<f64> = block.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let params = LstmParams::from_vec(header.d_x, header.d_h, data).map_err(|e| load(e.to_string()))?;
    if let Some(block) = params.first_non_finite_block() {
        return Err(load(format!("non-finite value in {block}")));
    }
    Ok(Checkpoint {
        params,
        stats: header.stats,
        alpha: header.alpha,
        num_subcarriers: header.num_subcarriers,
        include_rssi: header.include_rssi,
        metadata: header.metadata,
    })
}

pub fn save_model(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Load(e.to_string()))?;
    decode_checkpoint(&bytes)
}
