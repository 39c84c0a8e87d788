//! Command-line pipeline: `simulate`, `train`, `eval` and `baseline`.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then flags. The effective configuration is printed to stderr
//! and stored in every output.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::{self, FeatureContext, FeatureKind};
use crate::channel_sim::{simulate_campaign, CampaignPlan, ChannelCondition, SimConfig};
use crate::dataset::{
    partition_sessions, read_dataset, split, write_dataset, Dataset, DatasetSplit, SampleOrigin, SequenceSample,
    StreamSelection, WindowOptions, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};
use crate::eval::{self, Objective, ScoredSample, Summary};
use crate::lstm::{self, load_model, save_model, Checkpoint, LstmParams};
use crate::training::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionSet {
    #[default]
    All,
    LosOnly,
    NlosOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// One score per window and stream.
    #[default]
    None,
    /// Median over streams, one score per window.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Train,
    Validation,
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Fraction of the default campaign size.
    pub scale: f64,
    pub session_len: usize,
    pub conditions: ConditionSet,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { scale: 0.05, session_len: 200, conditions: ConditionSet::All }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub p: usize,
    /// Defaults to `p` (non-overlapping windows).
    pub stride: Option<usize>,
    pub include_rssi: bool,
    pub ratios: [f64; 3],
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { p: 10, stride: None, include_rssi: true, ratios: DEFAULT_RATIOS }
    }
}

impl WindowConfig {
    pub fn options(&self) -> WindowOptions {
        WindowOptions {
            p: self.p,
            stride: self.stride.unwrap_or(self.p),
            streams: StreamSelection::All,
            include_rssi: self.include_rssi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ensemble: Ensemble,
    pub subset: Subset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub feature: FeatureKind,
    pub p: usize,
    pub stride: Option<usize>,
    pub subset: Subset,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { feature: FeatureKind::Skewness, p: 10, stride: None, subset: Subset::All }
    }
}

/// Everything a run depends on. `seed` drives simulation, splitting and
/// initialization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub simulate: SimulateConfig,
    pub window: WindowConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub baseline: BaselineConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config file: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::config(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::from_toml(&text)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unprintable config: {e}\n"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlos-csi", version, about = "LOS/NLOS identification from WLAN CSI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a campaign and write a dataset file.
    Simulate(SimulateArgs),
    /// Train the LSTM classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a dataset with a checkpoint.
    Eval(EvalArgs),
    /// Evaluate a handcrafted feature.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file with `seed`, `[sim]`, `[simulate]`, `[window]`, `[train]`, `[eval]`, `[baseline]`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub session_len: Option<usize>,
    #[arg(long, value_enum)]
    pub conditions: Option<ConditionSet>,
    /// Per-subcarrier estimation noise variance.
    #[arg(long)]
    pub noise_var: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path; `.costs.csv` and `.metrics.json` siblings are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub dh: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size, 0 for full batch.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Use CSI only.
    #[arg(long)]
    pub no_rssi: bool,
    /// Train/validation/test ratios, e.g. `0.7,0.15,0.15`.
    #[arg(long, value_parser = parse_ratios)]
    pub split: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics JSON; the ROC curve goes to the `.roc.csv` sibling.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub ensemble: Option<Ensemble>,
    /// Partition of the training split to score.
    #[arg(long, value_enum)]
    pub subset: Option<Subset>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Per-window feature CSV; `.metrics.json` and `.roc.csv` siblings are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_feature)]
    pub feature: Option<FeatureKind>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub subset: Option<Subset>,
    #[arg(long, value_parser = parse_ratios)]
    pub split: Option<[f64; 3]>,
}

fn parse_ratios(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated ratios".to_string())
}

fn parse_feature(s: &str) -> std::result::Result<FeatureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Output path next to `path` with its extension replaced by `suffix`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Input(_) | Error::Parse { .. } | Error::Load(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::Numeric { .. } | Error::Diverged { .. } => 3,
    }
}

/// Parse arguments, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| ()),
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Baseline(a) => cmd_baseline(a).map(|_| ()),
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

fn echo(command: &str, cfg: &RunConfig) {
    eprintln!("# nlos-csi {command}: effective configuration");
    eprint!("{}", cfg.to_toml());
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn config_value(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

pub fn simulate_config(args: &SimulateArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    if let Some(v) = args.scale {
        cfg.simulate.scale = v;
    }
    if let Some(v) = args.session_len {
        cfg.simulate.session_len = v;
    }
    if let Some(v) = args.conditions {
        cfg.simulate.conditions = v;
    }
    if let Some(v) = args.noise_var {
        cfg.sim.noise_var = v;
    }
    if !(cfg.simulate.scale > 0.0 && cfg.simulate.scale.is_finite()) {
        return Err(Error::config("scale must be positive"));
    }
    cfg.sim.validate()?;
    Ok(cfg)
}

pub fn campaign_plan(cfg: &RunConfig) -> CampaignPlan {
    let mut plan = CampaignPlan::scaled(cfg.simulate.scale, cfg.simulate.session_len);
    match cfg.simulate.conditions {
        ConditionSet::All => {}
        ConditionSet::LosOnly => {
            plan.nlos_structure_packets = 0;
            plan.nlos_body_packets = 0;
        }
        ConditionSet::NlosOnly => plan.los_packets = 0,
    }
    plan
}

/// Simulate the campaign described by `cfg` as a dataset.
pub fn simulate_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let plan = campaign_plan(cfg);
    let sessions = simulate_campaign(&cfg.sim, &plan, cfg.seed)?;
    let mut ds = Dataset::new(cfg.sim.subcarriers.clone(), cfg.sim.dft_size, cfg.sim.num_streams, sessions)?;
    ds.metadata = json!({
        "seed": cfg.seed,
        "sim": serde_json::to_value(&cfg.sim)?,
        "plan": serde_json::to_value(&plan)?,
    });
    Ok(ds)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Dataset> {
    let cfg = simulate_config(args)?;
    echo("simulate", &cfg);
    let ds = simulate_dataset(&cfg)?;
    write_dataset(&args.out, &ds)?;
    for c in ChannelCondition::ALL {
        eprintln!("{c:?}: {} packets", ds.count(c));
    }
    Ok(ds)
}

pub fn train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    let w = &mut cfg.window;
    if let Some(v) = args.p {
        w.p = v;
    }
    if args.stride.is_some() {
        w.stride = args.stride;
    }
    if args.no_rssi {
        w.include_rssi = false;
    }
    if let Some(v) = args.split {
        w.ratios = v;
    }
    let t = &mut cfg.train;
    if let Some(v) = args.dh {
        t.hidden_dim = v;
    }
    if let Some(v) = args.lr {
        t.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = args.batch {
        t.batch_size = v;
    }
    if args.patience.is_some() {
        t.patience = args.patience;
    }
    check_window(&cfg.window)?;
    cfg.train.validate()?;
    Ok(cfg)
}

fn check_window(w: &WindowConfig) -> Result<()> {
    if w.p == 0 || w.stride == Some(0) {
        return Err(Error::config("window length and stride must be positive"));
    }
    Ok(())
}

/// Window every stream of every session and split by session.
pub fn prepare_split(ds: &Dataset, window: &WindowConfig, seed: u64) -> Result<DatasetSplit> {
    let samples = ds.windows(&window.options())?;
    if samples.is_empty() {
        return Err(Error::input(format!("no session is at least {} packets long", window.p)));
    }
    split(samples, window.ratios, seed)
}

/// A model output tied to the window it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowScore {
    pub origin: Option<SampleOrigin>,
    pub label: u8,
    /// LOS probability.
    pub score: f64,
}

/// Classifier outputs for already normalized samples, in input order.
pub fn score_samples(params: &LstmParams, samples: &[SequenceSample]) -> Result<Vec<WindowScore>> {
    samples
        .par_iter()
        .map(|s| Ok(WindowScore { origin: s.origin, label: s.label, score: lstm::predict(params, &s.steps)? }))
        .collect()
}

/// Apply the ensembling rule. Median grouping uses `(session, start)` and
/// returns windows in that order.
pub fn ensemble_scores(scores: &[WindowScore], ensemble: Ensemble) -> Result<Vec<ScoredSample>> {
    match ensemble {
        Ensemble::None => Ok(scores.iter().map(|s| ScoredSample::new(s.score, s.label)).collect()),
        Ensemble::Median => {
            let mut groups: BTreeMap<(usize, usize), (u8, Vec<f64>)> = BTreeMap::new();
            for s in scores {
                let o = s.origin.ok_or_else(|| Error::input("median ensembling needs window origins"))?;
                groups.entry((o.session, o.start)).or_insert((s.label, Vec::new())).1.push(s.score);
            }
            groups
                .into_values()
                .map(|(label, v)| Ok(ScoredSample::new(baselines::median_over_streams(&v)?, label)))
                .collect()
        }
    }
}

/// Result of [`cmd_train`] and [`train_pipeline`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
    /// Metrics on the validation set at its own best threshold.
    pub validation: Summary,
    /// Metrics on the test set at the validation threshold.
    pub test: Summary,
}

/// Window, split, normalize, train, and pick the threshold on the validation set.
pub fn train_pipeline(ds: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    let norm = {
        let raw = prepare_split(ds, &cfg.window, cfg.seed)?;
        raw.normalized()?
    };
    let report = train(&norm, &cfg.train)?;
    let val_scores = ensemble_scores(&score_samples(&report.params, &norm.validation)?, Ensemble::None)?;
    let test_scores = ensemble_scores(&score_samples(&report.params, &norm.test)?, Ensemble::None)?;
    let validation = eval::summarize(&val_scores, Objective::AvgRate)?;
    let test_auc = eval::roc(&test_scores)?.auc;
    let test = eval::summary_at(&test_scores, validation.alpha_star, test_auc)?;
    let checkpoint = Checkpoint {
        params: report.params.clone(),
        stats: norm.stats.clone(),
        alpha: validation.alpha_star,
        num_subcarriers: ds.subcarriers.len(),
        include_rssi: cfg.window.include_rssi,
        metadata: json!({
            "config": config_value(cfg)?,
            "best_epoch": report.best_epoch,
            "samples": {
                "train": norm.train.len(),
                "validation": norm.validation.len(),
                "test": norm.test.len(),
            },
            "test": serde_json::to_value(test)?,
        }),
    };
    Ok(TrainOutcome { report, checkpoint, validation, test })
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let cfg = train_config(args)?;
    echo("train", &cfg);
    let ds = read_dataset(&args.data)?;
    let outcome = match train_pipeline(&ds, &cfg) {
        Ok(o) => o,
        Err(Error::Diverged { epoch, report }) => {
            report.write_csv(BufWriter::new(File::create(sibling(&args.out, "costs.csv"))?))?;
            return Err(Error::Diverged { epoch, report });
        }
        Err(e) => return Err(e),
    };
    save_model(&args.out, &outcome.checkpoint)?;
    outcome.report.write_csv(BufWriter::new(File::create(sibling(&args.out, "costs.csv"))?))?;
    write_json(
        &sibling(&args.out, "metrics.json"),
        &json!({
            "command": "train",
            "config": config_value(&cfg)?,
            "epochs": outcome.report.num_epochs(),
            "best_epoch": outcome.report.best_epoch,
            "best_validation_cost": outcome.report.best_validation_cost,
            "validation": serde_json::to_value(outcome.validation)?,
            "test": serde_json::to_value(outcome.test)?,
        }),
    )?;
    eprintln!(
        "best epoch {} (validation cost {:.6}); test avg rate {:.4}",
        outcome.report.best_epoch, outcome.report.best_validation_cost, outcome.test.avg_rate
    );
    Ok(outcome)
}

fn select_subset(split: DatasetSplit, subset: Subset) -> Vec<SequenceSample> {
    match subset {
        Subset::Train => split.train,
        Subset::Validation => split.validation,
        Subset::Test => split.test,
        Subset::All => {
            let mut all = split.train;
            all.extend(split.validation);
            all.extend(split.test);
            all
        }
    }
}

/// Run configuration a checkpoint was trained with, falling back to `fallback`.
pub fn checkpoint_config(ckpt: &Checkpoint, fallback: &RunConfig) -> RunConfig {
    ckpt.metadata
        .get("config")
        .and_then(|v| serde_json::from_value::<RunConfig>(v.clone()).ok())
        .unwrap_or_else(|| fallback.clone())
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// At the checkpoint threshold.
    pub summary: Summary,
    /// At the best threshold for this set.
    pub best: Summary,
    pub roc: eval::RocCurve,
    pub scores: Vec<ScoredSample>,
}

/// Score the `subset` of the checkpoint's own split of `ds`.
pub fn eval_pipeline(ckpt: &Checkpoint, ds: &Dataset, cfg: &RunConfig) -> Result<EvalOutcome> {
    if ds.subcarriers.len() != ckpt.num_subcarriers {
        return Err(Error::input(format!(
            "dataset has {} subcarriers, model expects {}",
            ds.subcarriers.len(),
            ckpt.num_subcarriers
        )));
    }
    let mut window = cfg.window.clone();
    window.include_rssi = ckpt.include_rssi;
    let samples = {
        let raw = prepare_split(ds, &window, cfg.seed)?;
        select_subset(raw, cfg.eval.subset)
    };
    let normalized = samples.iter().map(|s| crate::dataset::normalize(s, &ckpt.stats)).collect::<Result<Vec<_>>>()?;
    drop(samples);
    let scores = ensemble_scores(&score_samples(&ckpt.params, &normalized)?, cfg.eval.ensemble)?;
    let roc = eval::roc(&scores)?;
    let summary = eval::summary_at(&scores, ckpt.alpha, roc.auc)?;
    let best = eval::summary_at(&scores, roc.best_avg_rate.alpha, roc.auc)?;
    Ok(EvalOutcome { summary, best, roc, scores })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutcome> {
    let ckpt = load_model(&args.model)?;
    let mut cfg = checkpoint_config(&ckpt, &base_config(&args.common)?);
    let overrides = base_config(&args.common)?;
    if args.common.config.is_some() {
        cfg.eval = overrides.eval.clone();
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    if let Some(v) = args.ensemble {
        cfg.eval.ensemble = v;
    }
    if let Some(v) = args.subset {
        cfg.eval.subset = v;
    }
    echo("eval", &cfg);
    let ds = read_dataset(&args.data)?;
    let outcome = eval_pipeline(&ckpt, &ds, &cfg)?;
    write_json(
        &args.out,
        &json!({
            "command": "eval",
            "config": config_value(&cfg)?,
            "windows": outcome.scores.len(),
            "auc": outcome.summary.auc,
            "alpha_star": serde_json::to_value(outcome.summary)?["alpha_star"],
            "tpr": outcome.summary.tpr,
            "tnr": outcome.summary.tnr,
            "accuracy": outcome.summary.accuracy,
            "avg_rate": outcome.summary.avg_rate,
            "best": serde_json::to_value(outcome.best)?,
        }),
    )?;
    eval::write_roc_csv(BufWriter::new(File::create(sibling(&args.out, "roc.csv"))?), &outcome.roc)?;
    eprintln!("avg rate {:.4}, AUC {:.4}", outcome.summary.avg_rate, outcome.summary.auc);
    Ok(outcome)
}

pub fn baseline_config(args: &BaselineArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    let b = &mut cfg.baseline;
    if let Some(v) = args.feature {
        b.feature = v;
    }
    if let Some(v) = args.p {
        b.p = v;
    }
    if args.stride.is_some() {
        b.stride = args.stride;
    }
    if let Some(v) = args.subset {
        b.subset = v;
    }
    if let Some(v) = args.split {
        cfg.window.ratios = v;
    }
    if b.p < baselines::MIN_WINDOW || b.stride == Some(0) {
        return Err(Error::config(format!(
            "baseline windows need p >= {} and a positive stride",
            baselines::MIN_WINDOW
        )));
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub rows: Vec<baselines::FeatureRow>,
    /// `None` when there are no windows.
    pub summary: Option<Summary>,
    pub roc: Option<eval::RocCurve>,
}

/// Feature rows of the configured subset with metrics at the best threshold.
pub fn baseline_pipeline(ds: &Dataset, cfg: &RunConfig) -> Result<BaselineOutcome> {
    let b = &cfg.baseline;
    let ctx = FeatureContext::from_dataset(ds);
    let mut rows = baselines::dataset_features(ds, b.feature, b.p, b.stride.unwrap_or(b.p), &ctx)?;
    if b.subset != Subset::All && !rows.is_empty() {
        let keys: Vec<(usize, u8)> = rows.iter().map(|r| (r.session, r.label)).collect();
        let assign = partition_sessions(&keys, cfg.window.ratios, cfg.seed)?;
        let wanted = match b.subset {
            Subset::Train => 0,
            Subset::Validation => 1,
            _ => 2,
        };
        rows.retain(|r| assign[&r.session] == wanted);
    }
    if rows.is_empty() {
        return Ok(BaselineOutcome { rows, summary: None, roc: None });
    }
    let scores: Vec<ScoredSample> = rows.iter().map(|r| ScoredSample::new(r.los_score(b.feature), r.label)).collect();
    let roc = eval::roc(&scores)?;
    let summary = eval::summary_at(&scores, roc.best_avg_rate.alpha, roc.auc)?;
    Ok(BaselineOutcome { rows, summary: Some(summary), roc: Some(roc) })
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<BaselineOutcome> {
    let cfg = baseline_config(args)?;
    echo("baseline", &cfg);
    let ds = read_dataset(&args.data)?;
    let outcome = baseline_pipeline(&ds, &cfg)?;
    let kind = cfg.baseline.feature;
    baselines::write_feature_csv(BufWriter::new(File::create(&args.out)?), kind, &outcome.rows)?;
    let (Some(summary), Some(roc)) = (outcome.summary, &outcome.roc) else {
        eprintln!("warning: no session is at least {} packets long; no windows", cfg.baseline.p);
        return Ok(outcome);
    };
    write_json(
        &sibling(&args.out, "metrics.json"),
        &json!({
            "command": "baseline",
            "config": config_value(&cfg)?,
            "feature": kind,
            "p": cfg.baseline.p,
            "windows": outcome.rows.len(),
            "auc": summary.auc,
            "alpha_star": serde_json::to_value(summary)?["alpha_star"],
            "tpr": summary.tpr,
            "tnr": summary.tnr,
            "accuracy": summary.accuracy,
            "avg_rate": summary.avg_rate,
        }),
    )?;
    eval::write_roc_csv(BufWriter::new(File::create(sibling(&args.out, "roc.csv"))?), roc)?;
    eprintln!("{kind}: avg rate {:.4}, AUC {:.4}", summary.avg_rate, summary.auc);
    Ok(outcome)
}
