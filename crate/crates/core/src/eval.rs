//! Binary hypothesis test, confusion statistics, ROC curves and threshold
//! selection. Scores are oriented so that larger means more LOS-like and a
//! window is declared LOS when `score >= alpha`.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    /// 1 = LOS.
    pub label: u8,
}

impl ScoredSample {
    pub fn new(score: f64, label: u8) -> Self {
        ScoredSample { score, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Los,
    Nlos,
}

pub fn classify(score: f64, alpha: f64) -> Decision {
    if score >= alpha {
        Decision::Los
    } else {
        Decision::Nlos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub avg_rate: f64,
}

impl ConfusionCounts {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn rates(&self) -> Result<Rates> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(Error::input("rates need both LOS and NLOS samples"));
        }
        let tpr = self.tp as f64 / self.positives() as f64;
        let tnr = self.tn as f64 / self.negatives() as f64;
        Ok(Rates {
            tpr,
            tnr,
            fpr: 1.0 - tnr,
            accuracy: (self.tp + self.tn) as f64 / (self.positives() + self.negatives()) as f64,
            avg_rate: (tpr + tnr) / 2.0,
        })
    }
}

fn check_samples(samples: &[ScoredSample]) -> Result<(usize, usize)> {
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::input(format!("non-finite score {}", s.score)));
    }
    let pos = samples.iter().filter(|s| s.label == 1).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::input("evaluation needs both LOS and NLOS samples"));
    }
    Ok((pos, neg))
}

pub fn confusion(samples: &[ScoredSample], alpha: f64) -> Result<(ConfusionCounts, Rates)> {
    check_samples(samples)?;
    let mut c = ConfusionCounts::default();
    for s in samples {
        match (s.label == 1, classify(s.score, alpha)) {
            (true, Decision::Los) => c.tp += 1,
            (true, Decision::Nlos) => c.fn_ += 1,
            (false, Decision::Nlos) => c.tn += 1,
            (false, Decision::Los) => c.fp += 1,
        }
    }
    let rates = c.rates()?;
    Ok((c, rates))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `(TPR + TNR) / 2`.
    AvgRate,
    Accuracy,
}

impl Objective {
    pub fn value(self, rates: &Rates) -> f64 {
        match self {
            Objective::AvgRate => rates.avg_rate,
            Objective::Accuracy => rates.accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "extended_float")]
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    #[serde(with = "extended_float")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by FPR; first point `(0, 0)` at `+inf`, last `(1, 1)` at `-inf`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub best_avg_rate: ThresholdChoice,
    pub best_accuracy: ThresholdChoice,
}

/// Distinct scores in ascending order, with the number of LOS and NLOS
/// samples at each.
fn score_groups(samples: &[ScoredSample]) -> Vec<(f64, usize, usize)> {
    let mut sorted: Vec<ScoredSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for s in sorted {
        let (pos, neg) = if s.label == 1 { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(last) if last.0 == s.score => {
                last.1 += pos;
                last.2 += neg;
            }
            _ => groups.push((s.score, pos, neg)),
        }
    }
    groups
}

/// Threshold strictly between `a < b`: scores `>= b` pass, scores `<= a` do not.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a / 2.0 + b / 2.0;
    if mid <= a {
        b
    } else {
        mid
    }
}

fn rates_from_counts(tp: usize, pos: usize, tn: usize, neg: usize) -> Rates {
    ConfusionCounts { tp, fn_: pos - tp, tn, fp: neg - tn }.rates().unwrap()
}

/// Best threshold among `-inf`, the midpoints between consecutive distinct
/// scores, and `+inf`; ties go to the smaller threshold.
pub fn select_threshold(samples: &[ScoredSample], objective: Objective) -> Result<ThresholdChoice> {
    let (pos, neg) = check_samples(samples)?;
    Ok(select_from_groups(&score_groups(samples), pos, neg, objective))
}

fn select_from_groups(groups: &[(f64, usize, usize)], pos: usize, neg: usize, objective: Objective) -> ThresholdChoice {
    // alpha = -inf: everything is LOS
    let mut tp = pos;
    let mut tn = 0;
    let mut best =
        ThresholdChoice { alpha: f64::NEG_INFINITY, value: objective.value(&rates_from_counts(tp, pos, tn, neg)) };
    for (k, &(score, p, n)) in groups.iter().enumerate() {
        // raise alpha just above `score`
        tp -= p;
        tn += n;
        let alpha = match groups.get(k + 1) {
            Some(&(next, _, _)) => midpoint(score, next),
            None => f64::INFINITY,
        };
        let value = objective.value(&rates_from_counts(tp, pos, tn, neg));
        if value > best.value {
            best = ThresholdChoice { alpha, value };
        }
    }
    best
}

pub fn roc(samples: &[ScoredSample]) -> Result<RocCurve> {
    let (pos, neg) = check_samples(samples)?;
    let groups = score_groups(samples);
    let mut points = Vec::with_capacity(groups.len() + 2);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY });
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the trapezoid area in units of one (pos x neg) cell
    let mut area2: u128 = 0;
    for &(score, p, n) in groups.iter().rev() {
        area2 += n as u128 * (2 * tp as u128 + p as u128);
        tp += p;
        fp += n;
        points.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold: score });
    }
    points.push(RocPoint { fpr: 1.0, tpr: 1.0, threshold: f64::NEG_INFINITY });
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve {
        points,
        auc,
        best_avg_rate: select_from_groups(&groups, pos, neg, Objective::AvgRate),
        best_accuracy: select_from_groups(&groups, pos, neg, Objective::Accuracy),
    })
}

/// Metrics at the threshold that maximizes `objective` on `samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc: f64,
    #[serde(with = "extended_float")]
    pub alpha_star: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub accuracy: f64,
    pub avg_rate: f64,
}

pub fn summarize(samples: &[ScoredSample], objective: Objective) -> Result<Summary> {
    let curve = roc(samples)?;
    let choice = match objective {
        Objective::AvgRate => curve.best_avg_rate,
        Objective::Accuracy => curve.best_accuracy,
    };
    summary_at(samples, choice.alpha, curve.auc)
}

/// Metrics at a fixed threshold.
pub fn summary_at(samples: &[ScoredSample], alpha: f64, auc: f64) -> Result<Summary> {
    let (_, r) = confusion(samples, alpha)?;
    Ok(Summary { auc, alpha_star: alpha, tpr: r.tpr, tnr: r.tnr, accuracy: r.accuracy, avg_rate: r.avg_rate })
}

pub fn write_roc_csv<W: Write>(mut out: W, curve: &RocCurve) -> Result<()> {
    writeln!(out, "threshold,fpr,tpr")?;
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

/// Serde adapter writing non-finite floats as the strings `inf`, `-inf`, `nan`.
pub mod extended_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl<'de> Visitor<'de> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("invalid float {other:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}
