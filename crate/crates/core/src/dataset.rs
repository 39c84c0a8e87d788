//! Input vectors, packet windows, train/validation/test splits and the
//! on-disk dataset format.
//!
//! # File layout
//!
//! All integers little-endian.
//!
//! ```text
//! u32              header length L
//! [u8; L]          UTF-8 JSON header (see `DatasetHeader`)
//! repeated record:
//!   u32            sequence number
//!   u8             condition code (0 LOS, 1 NLOS structure, 2 NLOS body)
//!   u16            RSSI
//!   f32 pairs      num_streams * |S| complex CSI values (re, im), stream-major
//! ```
//!
//! The header lists the sessions in file order, so session boundaries survive
//! a round trip.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex32;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel_sim::{ChannelCondition, PacketRecord, Session};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "nlos-csi-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Default train/validation/test proportions.
pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

/// Floor applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

/// `[RSSI, Re H(f_s0), Im H(f_s0), Re H(f_s1), ...]`, length `1 + 2|S|`, or
/// `2|S|` without the RSSI entry.
pub type InputVector = Vec<f64>;

/// Where a window came from; used for session-aware splitting and for
/// grouping per-stream outputs of the same window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleOrigin {
    pub session: usize,
    pub start: usize,
    pub stream: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub steps: Vec<InputVector>,
    /// 1 = LOS.
    pub label: u8,
    pub origin: Option<SampleOrigin>,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }
}

pub fn input_dim(num_subcarriers: usize, include_rssi: bool) -> usize {
    2 * num_subcarriers + usize::from(include_rssi)
}

pub fn build_input_vector(record: &PacketRecord, stream_index: usize, include_rssi: bool) -> Result<InputVector> {
    let csi = record
        .csi
        .get(stream_index)
        .ok_or_else(|| Error::input(format!("stream {stream_index} out of range ({} streams)", record.csi.len())))?;
    let mut x = Vec::with_capacity(input_dim(csi.len(), include_rssi));
    if include_rssi {
        x.push(record.rssi as f64);
    }
    for c in csi {
        x.push(c.re as f64);
        x.push(c.im as f64);
    }
    Ok(x)
}

/// Cut one session into windows of `p` packets, starting every `stride` packets.
pub fn window_sequences(
    records: &[PacketRecord],
    p: usize,
    stride: usize,
    stream_index: usize,
    include_rssi: bool,
) -> Result<Vec<SequenceSample>> {
    if p == 0 || stride == 0 {
        return Err(Error::input("window length and stride must be positive"));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    if records.iter().any(|r| r.condition.label() != first.condition.label()) {
        return Err(Error::input("records of one window set must share a label"));
    }
    if p > records.len() {
        return Ok(Vec::new());
    }
    let label = first.condition.label();
    (0..=records.len() - p)
        .step_by(stride)
        .map(|start| {
            let steps = records[start..start + p]
                .iter()
                .map(|r| build_input_vector(r, stream_index, include_rssi))
                .collect::<Result<Vec<_>>>()?;
            Ok(SequenceSample { steps, label, origin: None })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum StreamSelection {
    /// Every stream yields its own sample.
    All,
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub p: usize,
    pub stride: usize,
    pub streams: StreamSelection,
    pub include_rssi: bool,
}

impl WindowOptions {
    /// Non-overlapping windows over every stream.
    pub fn new(p: usize, include_rssi: bool) -> Self {
        WindowOptions { p, stride: p, streams: StreamSelection::All, include_rssi }
    }
}

/// Train/validation/test partition with train-only normalization statistics.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<SequenceSample>,
    pub validation: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub stats: NormStats,
}

impl DatasetSplit {
    /// Apply `stats` to every partition.
    pub fn normalized(&self) -> Result<DatasetSplit> {
        let norm = |set: &[SequenceSample]| -> Result<Vec<SequenceSample>> {
            set.iter().map(|s| normalize(s, &self.stats)).collect()
        };
        Ok(DatasetSplit {
            train: norm(&self.train)?,
            validation: norm(&self.validation)?,
            test: norm(&self.test)?,
            stats: self.stats.clone(),
        })
    }
}

/// Split `n` items by `ratios` with the largest-remainder rule; ties in the
/// fractional part go to the earlier partition.
pub fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let missing = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle().take(missing) {
        counts[i] += 1;
    }
    counts
}

fn validate_ratios(ratios: &[f64; 3]) -> Result<()> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios {ratios:?} must be positive and sum to 1")));
    }
    Ok(())
}

/// Partition index (0 train, 1 validation, 2 test) of every session, shuffled
/// and split per label with the largest-remainder rule.
fn assign_sessions(keys: &[(usize, u8)], ratios: &[f64; 3], rng: &mut ChaCha8Rng) -> HashMap<usize, usize> {
    let mut assign = HashMap::new();
    for label in [0u8, 1] {
        let mut sessions: Vec<usize> = keys.iter().filter(|k| k.1 == label).map(|k| k.0).collect();
        sessions.sort_unstable();
        sessions.dedup();
        sessions.shuffle(rng);
        let counts = largest_remainder(sessions.len(), ratios);
        for (k, &sess) in sessions.iter().enumerate() {
            let p = if k < counts[0] {
                0
            } else if k < counts[0] + counts[1] {
                1
            } else {
                2
            };
            assign.insert(sess, p);
        }
    }
    assign
}

/// The session assignment [`split`] makes for origin-tagged samples with the
/// same `(session, label)` keys, ratios and seed.
pub fn partition_sessions(keys: &[(usize, u8)], ratios: [f64; 3], seed: u64) -> Result<HashMap<usize, usize>> {
    validate_ratios(&ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(assign_sessions(keys, &ratios, &mut rng))
}

/// Deterministic split. When every sample carries an origin, whole sessions
/// are assigned to one partition, stratified by label; otherwise samples are
/// shuffled and partitioned directly.
pub fn split(samples: Vec<SequenceSample>, ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    validate_ratios(&ratios)?;
    if samples.len() < 3 {
        return Err(Error::input("split needs at least 3 samples"));
    }
    let dim = samples[0].dim();
    if samples.iter().any(|s| s.is_empty() || s.steps.iter().any(|x| x.len() != dim)) {
        return Err(Error::input("samples must be non-empty and share one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partition index per sample
    let mut part = vec![0usize; samples.len()];
    let mut order: Vec<usize> = (0..samples.len()).collect();

    if samples.iter().all(|s| s.origin.is_some()) {
        let keys: Vec<(usize, u8)> = samples.iter().map(|s| (s.origin.unwrap().session, s.label)).collect();
        let assign = assign_sessions(&keys, &ratios, &mut rng);
        for (i, key) in keys.iter().enumerate() {
            part[i] = assign[&key.0];
        }
        order.shuffle(&mut rng);
    } else {
        order.shuffle(&mut rng);
        let counts = largest_remainder(samples.len(), &ratios);
        for (k, &i) in order.iter().enumerate() {
            part[i] = if k < counts[0] {
                0
            } else if k < counts[0] + counts[1] {
                1
            } else {
                2
            };
        }
    }

    let mut slots: Vec<Option<SequenceSample>> = samples.into_iter().map(Some).collect();
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &order {
        let s = slots[i].take().unwrap();
        match part[i] {
            0 => train.push(s),
            1 => validation.push(s),
            _ => test.push(s),
        }
    }
    let stats = NormStats::from_samples(&train, dim);
    Ok(DatasetSplit { train, validation, test, stats })
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Population mean and standard deviation over every step of every
    /// sample, std floored at [`STD_FLOOR`].
    pub fn from_samples(samples: &[SequenceSample], dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for x in samples.iter().flat_map(|s| &s.steps) {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
            count += 1;
        }
        if count == 0 {
            return NormStats::identity(dim);
        }
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for x in samples.iter().flat_map(|s| &s.steps) {
            for ((acc, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|v| (v / count as f64).sqrt().max(STD_FLOOR)).collect();
        NormStats { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_dims(sample: &SequenceSample, stats: &NormStats) -> Result<()> {
    if sample.steps.iter().any(|x| x.len() != stats.dim()) {
        return Err(Error::input(format!(
            "sample dimension {} does not match statistics dimension {}",
            sample.dim(),
            stats.dim()
        )));
    }
    Ok(())
}

pub fn normalize(sample: &SequenceSample, stats: &NormStats) -> Result<SequenceSample> {
    check_dims(sample, stats)?;
    let steps = sample
        .steps
        .iter()
        .map(|x| x.iter().zip(stats.mean.iter().zip(&stats.std)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    Ok(SequenceSample { steps, ..sample.clone() })
}

pub fn denormalize(sample: &SequenceSample, stats: &NormStats) -> Result<SequenceSample> {
    check_dims(sample, stats)?;
    let steps = sample
        .steps
        .iter()
        .map(|x| x.iter().zip(stats.mean.iter().zip(&stats.std)).map(|(v, (m, s))| v * s + m).collect())
        .collect();
    Ok(SequenceSample { steps, ..sample.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub condition: ChannelCondition,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub magic: String,
    pub version: u32,
    pub num_subcarriers: usize,
    pub subcarriers: Vec<i32>,
    pub dft_size: usize,
    pub num_streams: usize,
    pub sessions: Vec<SessionInfo>,
    /// Free-form provenance (effective simulation config, seed).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// A set of sessions sharing one subcarrier layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subcarriers: Vec<i32>,
    pub dft_size: usize,
    pub num_streams: usize,
    pub sessions: Vec<Session>,
    pub metadata: serde_json::Value,
}

impl Dataset {
    pub fn new(subcarriers: Vec<i32>, dft_size: usize, num_streams: usize, sessions: Vec<Session>) -> Result<Self> {
        let ds = Dataset { subcarriers, dft_size, num_streams, sessions, metadata: serde_json::Value::Null };
        ds.check()?;
        Ok(ds)
    }

    fn check(&self) -> Result<()> {
        for (i, session) in self.sessions.iter().enumerate() {
            for r in &session.records {
                if r.condition != session.condition {
                    return Err(Error::input(format!("session {i} mixes conditions")));
                }
                if r.csi.len() != self.num_streams || r.csi.iter().any(|s| s.len() != self.subcarriers.len()) {
                    return Err(Error::input(format!("session {i}: record {} has wrong CSI shape", r.sequence_number)));
                }
            }
        }
        Ok(())
    }

    pub fn num_records(&self) -> usize {
        self.sessions.iter().map(|s| s.records.len()).sum()
    }

    pub fn count(&self, condition: ChannelCondition) -> usize {
        self.sessions.iter().filter(|s| s.condition == condition).map(|s| s.records.len()).sum()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            magic: DATASET_MAGIC.to_string(),
            version: DATASET_VERSION,
            num_subcarriers: self.subcarriers.len(),
            subcarriers: self.subcarriers.clone(),
            dft_size: self.dft_size,
            num_streams: self.num_streams,
            sessions: self
                .sessions
                .iter()
                .map(|s| SessionInfo { condition: s.condition, len: s.records.len() })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Windows of every session, tagged with their origin.
    pub fn windows(&self, opts: &WindowOptions) -> Result<Vec<SequenceSample>> {
        let streams: Vec<usize> = match opts.streams {
            StreamSelection::All => (0..self.num_streams).collect(),
            StreamSelection::Single(i) if i < self.num_streams => vec![i],
            StreamSelection::Single(i) => {
                return Err(Error::input(format!("stream {i} out of range ({} streams)", self.num_streams)))
            }
        };
        let mut out = Vec::new();
        for (session_idx, session) in self.sessions.iter().enumerate() {
            for &stream in &streams {
                let windows = window_sequences(&session.records, opts.p, opts.stride, stream, opts.include_rssi)?;
                for (k, mut w) in windows.into_iter().enumerate() {
                    w.origin = Some(SampleOrigin { session: session_idx, start: k * opts.stride, stream });
                    out.push(w);
                }
            }
        }
        Ok(out)
    }
}

fn record_size(num_streams: usize, num_subcarriers: usize) -> usize {
    4 + 1 + 2 + num_streams * num_subcarriers * 8
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    ds.check()?;
    let header = serde_json::to_vec(&ds.header())?;
    let header_len = u32::try_from(header.len()).map_err(|_| Error::input("header too large"))?;
    let mut buf =
        Vec::with_capacity(4 + header.len() + ds.num_records() * record_size(ds.num_streams, ds.subcarriers.len()));
    buf.extend_from_slice(&header_len.to_le_bytes());
    buf.extend_from_slice(&header);
    for r in ds.sessions.iter().flat_map(|s| &s.records) {
        buf.extend_from_slice(&r.sequence_number.to_le_bytes());
        buf.push(r.condition.code());
        buf.extend_from_slice(&r.rssi.to_le_bytes());
        for c in r.csi.iter().flatten() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    Ok(buf)
}

fn header_error(message: impl Into<String>) -> Error {
    Error::Parse { record: 0, last_complete: None, message: format!("header: {}", message.into()) }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(header_error("file shorter than the header length field"));
    }
    let header_len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(4..4 + header_len).ok_or_else(|| header_error("truncated header"))?;
    let header: DatasetHeader =
        serde_json::from_slice(header_bytes).map_err(|e| header_error(format!("bad magic or malformed JSON: {e}")))?;
    if header.magic != DATASET_MAGIC {
        return Err(header_error(format!("bad magic {:?}", header.magic)));
    }
    if header.version != DATASET_VERSION {
        return Err(header_error(format!("unsupported version {}", header.version)));
    }
    if header.num_subcarriers != header.subcarriers.len() {
        return Err(header_error("num_subcarriers does not match subcarrier list"));
    }

    let n_sub = header.num_subcarriers;
    let n_streams = header.num_streams;
    let rec_size = record_size(n_streams, n_sub);
    let mut pos = 4 + header_len;
    let mut index = 0usize;
    let mut sessions = Vec::with_capacity(header.sessions.len());
    for info in &header.sessions {
        let mut records = Vec::with_capacity(info.len);
        for _ in 0..info.len {
            let parse_err =
                |message: String| Error::Parse { record: index, last_complete: index.checked_sub(1), message };
            let chunk = bytes.get(pos..pos + rec_size).ok_or_else(|| {
                parse_err(format!("truncated: need {rec_size} bytes, {} left", bytes.len().saturating_sub(pos)))
            })?;
            let sequence_number = u32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let condition = ChannelCondition::from_code(chunk[4])
                .ok_or_else(|| parse_err(format!("unknown condition code {}", chunk[4])))?;
            if condition != info.condition {
                return Err(parse_err("condition differs from its session".into()));
            }
            let rssi = u16::from_le_bytes(chunk[5..7].try_into().unwrap());
            let mut floats = chunk[7..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
            let csi = (0..n_streams)
                .map(|_| {
                    (0..n_sub)
                        .map(|_| {
                            let re = floats.next().unwrap();
                            let im = floats.next().unwrap();
                            Complex32::new(re, im)
                        })
                        .collect()
                })
                .collect();
            records.push(PacketRecord { sequence_number, condition, rssi, csi });
            pos += rec_size;
            index += 1;
        }
        sessions.push(Session { condition: info.condition, records });
    }
    if pos != bytes.len() {
        return Err(Error::Parse {
            record: index,
            last_complete: index.checked_sub(1),
            message: format!("{} trailing bytes", bytes.len() - pos),
        });
    }
    Ok(Dataset {
        subcarriers: header.subcarriers,
        dft_size: header.dft_size,
        num_streams: n_streams,
        sessions,
        metadata: header.metadata,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

#[derive(Serialize)]
struct JsonRecord {
    session: usize,
    sequence_number: u32,
    condition: ChannelCondition,
    rssi: u16,
    csi: Vec<Vec<[f32; 2]>>,
}

/// Line-delimited JSON dump, one record per line, for inspection.
pub fn write_jsonl(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (session, s) in ds.sessions.iter().enumerate() {
        for r in &s.records {
            let line = JsonRecord {
                session,
                sequence_number: r.sequence_number,
                condition: r.condition,
                rssi: r.rssi,
                csi: r.csi.iter().map(|st| st.iter().map(|c| [c.re, c.im]).collect()).collect(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}
