//! Quality labels, FAD-based label prediction, and precision / recall / F1.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::estimators::{select_extremes, SongScoreTable};

pub const LABELS_CSV_HEADER: [&str; 3] = ["song_id", "aq", "mq"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityLabel {
    High,
    Medium,
    Low,
    /// Not mentioned.
    Na,
}

impl FromStr for QualityLabel {
    type Err = FadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(QualityLabel::High),
            "medium" => Ok(QualityLabel::Medium),
            "low" => Ok(QualityLabel::Low),
            "na" | "n/a" => Ok(QualityLabel::Na),
            other => Err(FadError::OutOfRange(format!(
                "unknown quality label {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub song_id: String,
    pub aq: QualityLabel,
    pub mq: QualityLabel,
}

pub type Truth = BTreeMap<String, bool>;

pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<LabelRecord>> {
    let err = |message: String| FadError::Csv {
        context: "labels".into(),
        message,
    };
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != LABELS_CSV_HEADER {
        return Err(err(format!(
            "expected header {}",
            LABELS_CSV_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let song_id = record.get(0).unwrap_or("").trim().to_string();
        if song_id.is_empty() {
            return Err(err(format!("line {line}: empty song_id")));
        }
        let aq = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: FadError| err(format!("line {line}: {e}")))?;
        let mq = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e: FadError| err(format!("line {line}: {e}")))?;
        out.push(LabelRecord { song_id, aq, mq });
    }
    Ok(out)
}

/// Collapses labels to two binary classes: acoustic quality "low" vs "not low", musical quality
/// "high" vs "not high". Unmentioned labels fall into the "not" class.
pub fn binarize_labels(records: &[LabelRecord]) -> Result<(Truth, Truth)> {
    let mut aq = Truth::new();
    let mut mq = Truth::new();
    for r in records {
        if r.song_id.is_empty() {
            return Err(FadError::InvalidMetadata("empty song id".into()));
        }
        if aq
            .insert(r.song_id.clone(), r.aq == QualityLabel::Low)
            .is_some()
        {
            return Err(FadError::DuplicateSong(r.song_id.clone()));
        }
        mq.insert(r.song_id.clone(), r.mq == QualityLabel::High);
    }
    Ok((aq, mq))
}

/// Predicts acoustic quality "low" for the highest-FAD songs and musical quality "high" for the
/// lowest-FAD songs; every other scored song is predicted negative in both maps.
pub fn predict_labels(table: &SongScoreTable, fraction: f64) -> Result<(Truth, Truth)> {
    let extremes = select_extremes(table, fraction)?;
    let top: BTreeSet<&str> = extremes.top.iter().map(String::as_str).collect();
    let bottom: BTreeSet<&str> = extremes.bottom.iter().map(String::as_str).collect();
    let mut aq = Truth::new();
    let mut mq = Truth::new();
    for row in table.scored() {
        aq.insert(row.song_id.clone(), top.contains(row.song_id.as_str()));
        mq.insert(row.song_id.clone(), bottom.contains(row.song_id.as_str()));
    }
    Ok((aq, mq))
}

/// Restricts `truth` to the keys of `pred`. Every predicted song must have a truth entry.
pub fn align_truth(pred: &Truth, truth: &Truth) -> Result<Truth> {
    pred.keys()
        .map(|k| {
            truth
                .get(k)
                .map(|&v| (k.clone(), v))
                .ok_or_else(|| FadError::MissingSong(k.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Positives in the truth map.
    pub support: usize,
    /// No positive predictions, so precision is reported as 0.
    pub precision_undefined: bool,
    /// No positives in the truth, so recall is reported as 0.
    pub recall_undefined: bool,
}

/// Precision, recall and their harmonic mean. Both maps must share one key set.
pub fn prf(pred: &Truth, truth: &Truth) -> Result<PrfResult> {
    if pred.len() != truth.len() || pred.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        let missing = pred
            .keys()
            .find(|k| !truth.contains_key(*k))
            .or_else(|| truth.keys().find(|k| !pred.contains_key(*k)));
        return Err(FadError::KeyMismatch(format!(
            "prediction has {} songs, truth has {}; first difference {:?}",
            pred.len(),
            truth.len(),
            missing
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, t) in pred.values().zip(truth.values()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PrfResult {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        support: tp + fn_,
        precision_undefined,
        recall_undefined,
    })
}
