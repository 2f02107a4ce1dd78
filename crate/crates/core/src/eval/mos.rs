//! Listening-test scores and per-testset Pearson correlation with per-song FAD.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::estimators::SongScoreTable;

pub const MOS_CSV_HEADER: [&str; 4] = ["song_id", "testset", "aq_mos", "mq_mos"];
pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;
pub const MIN_TESTSET_SONGS: usize = 3;

/// One song's averaged ratings within one testset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRecord {
    pub song_id: String,
    pub testset: String,
    pub aq_mos: f64,
    pub mq_mos: f64,
}

impl MosRecord {
    pub fn validate(&self) -> Result<()> {
        if self.song_id.is_empty() || self.testset.is_empty() {
            return Err(FadError::InvalidMetadata("empty song id or testset".into()));
        }
        for (name, v) in [("aq_mos", self.aq_mos), ("mq_mos", self.mq_mos)] {
            if !(MOS_MIN..=MOS_MAX).contains(&v) {
                return Err(FadError::OutOfRange(format!(
                    "{name} {v} for song {:?} outside [{MOS_MIN}, {MOS_MAX}]",
                    self.song_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityTarget {
    Aq,
    Mq,
}

pub fn read_mos_csv<R: Read>(reader: R) -> Result<Vec<MosRecord>> {
    let err = |message: String| FadError::Csv {
        context: "mos".into(),
        message,
    };
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != MOS_CSV_HEADER {
        return Err(err(format!("expected header {}", MOS_CSV_HEADER.join(","))));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let text = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize| {
            text(i)
                .parse::<f64>()
                .map_err(|e| err(format!("line {line}, column {}: {e}", MOS_CSV_HEADER[i])))
        };
        let rec = MosRecord {
            song_id: text(0).to_string(),
            testset: text(1).to_string(),
            aq_mos: number(2)?,
            mq_mos: number(3)?,
        };
        rec.validate()
            .map_err(|e| err(format!("line {line}: {e}")))?;
        if !seen.insert((rec.song_id.clone(), rec.testset.clone())) {
            return Err(FadError::DuplicateSong(rec.song_id));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Pearson coefficient of paired samples. `None` when either variable has zero variance or
/// there are fewer than two pairs.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson needs paired samples");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestsetPcc {
    pub n: usize,
    /// `None` when undefined; never coerced to 0.
    pub pcc: Option<f64>,
    pub undefined_reason: Option<String>,
}

/// Pearson correlation between per-song FAD and MOS within each testset. Lower (more negative)
/// is better: low FAD should go with high ratings.
pub fn pearson_by_testset(
    table: &SongScoreTable,
    mos: &[MosRecord],
    target: QualityTarget,
) -> Result<BTreeMap<String, TestsetPcc>> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in mos {
        rec.validate()?;
        let fad = table
            .get(&rec.song_id)
            .ok_or_else(|| FadError::MissingSong(rec.song_id.clone()))?
            .fad
            .ok_or_else(|| {
                FadError::InvalidMetadata(format!(
                    "song {:?} was skipped and has no FAD",
                    rec.song_id
                ))
            })?;
        let rating = match target {
            QualityTarget::Aq => rec.aq_mos,
            QualityTarget::Mq => rec.mq_mos,
        };
        let entry = groups.entry(rec.testset.as_str()).or_default();
        entry.0.push(fad);
        entry.1.push(rating);
    }
    Ok(groups
        .into_iter()
        .map(|(name, (fad, rating))| {
            let n = fad.len();
            let result = if n < MIN_TESTSET_SONGS {
                TestsetPcc {
                    n,
                    pcc: None,
                    undefined_reason: Some(format!("fewer than {MIN_TESTSET_SONGS} songs")),
                }
            } else {
                match pearson(&fad, &rating) {
                    Some(r) => TestsetPcc {
                        n,
                        pcc: Some(r),
                        undefined_reason: None,
                    },
                    None => TestsetPcc {
                        n,
                        pcc: None,
                        undefined_reason: Some("zero variance".into()),
                    },
                }
            };
            (name.to_string(), result)
        })
        .collect())
}
