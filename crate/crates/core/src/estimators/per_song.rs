//! Per-song FAD: each song's own fit scored against the reference, ranked ascending.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingFrameSet;
use crate::error::{FadError, Result};
use crate::format::sig6;
use crate::stats::{frechet_distance, GaussianStats, NumericalFlag};

pub const SCORE_CSV_HEADER: [&str; 5] = ["song_id", "fad", "n_frames", "rank", "flags"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SongFlag {
    /// Fewer than two frames; not scored.
    Skipped,
    /// Fewer than `dim + 1` frames, so the song covariance is singular.
    RankDeficient,
    NegativeEigsClamped,
    TraceClamped,
}

impl SongFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SongFlag::Skipped => "skipped",
            SongFlag::RankDeficient => "rank-deficient",
            SongFlag::NegativeEigsClamped => "negative-eigs-clamped",
            SongFlag::TraceClamped => "trace-clamped",
        }
    }
}

impl From<NumericalFlag> for SongFlag {
    fn from(flag: NumericalFlag) -> Self {
        match flag {
            NumericalFlag::NegativeEigsClamped => SongFlag::NegativeEigsClamped,
            NumericalFlag::TraceClamped => SongFlag::TraceClamped,
        }
    }
}

impl fmt::Display for SongFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SongFlag {
    type Err = FadError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "skipped" => SongFlag::Skipped,
            "rank-deficient" => SongFlag::RankDeficient,
            "negative-eigs-clamped" => SongFlag::NegativeEigsClamped,
            "trace-clamped" => SongFlag::TraceClamped,
            other => return Err(FadError::InvalidMetadata(format!("unknown flag {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongRow {
    pub song_id: String,
    /// `None` for skipped songs.
    pub fad: Option<f64>,
    pub n_frames: u64,
    /// 1-based, ascending by FAD. `None` for skipped songs.
    pub rank: Option<usize>,
    pub flags: BTreeSet<SongFlag>,
}

/// Scored rows in rank order, followed by skipped rows in song-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongScoreTable {
    pub reference_id: String,
    pub rows: Vec<SongRow>,
}

impl SongScoreTable {
    /// Orders rows, assigns ranks and checks ids are unique.
    pub fn from_rows(reference_id: impl Into<String>, rows: Vec<SongRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !seen.insert(row.song_id.as_str()) {
                return Err(FadError::DuplicateSong(row.song_id.clone()));
            }
            if let Some(f) = row.fad {
                if !f.is_finite() {
                    return Err(FadError::OutOfRange(format!(
                        "song {:?} has non-finite fad",
                        row.song_id
                    )));
                }
            }
        }
        let (mut scored, mut skipped): (Vec<SongRow>, Vec<SongRow>) =
            rows.into_iter().partition(|r| r.fad.is_some());
        scored.sort_by(|a, b| {
            a.fad
                .unwrap()
                .total_cmp(&b.fad.unwrap())
                .then_with(|| a.song_id.cmp(&b.song_id))
        });
        for (i, row) in scored.iter_mut().enumerate() {
            row.rank = Some(i + 1);
            row.flags.remove(&SongFlag::Skipped);
        }
        skipped.sort_by(|a, b| a.song_id.cmp(&b.song_id));
        for row in skipped.iter_mut() {
            row.rank = None;
            row.flags.insert(SongFlag::Skipped);
        }
        scored.extend(skipped);
        Ok(SongScoreTable {
            reference_id: reference_id.into(),
            rows: scored,
        })
    }

    /// Rows with a score, in rank order.
    pub fn scored(&self) -> impl DoubleEndedIterator<Item = &SongRow> + ExactSizeIterator {
        let n = self.scored_len();
        self.rows[..n].iter()
    }

    pub fn scored_len(&self) -> usize {
        self.rows.iter().take_while(|r| r.fad.is_some()).count()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, song_id: &str) -> Option<&SongRow> {
        self.rows.iter().find(|r| r.song_id == song_id)
    }

    /// Number of scored songs whose distance needed eigenvalue clamping.
    pub fn clamp_count(&self) -> usize {
        self.scored()
            .filter(|r| {
                r.flags.contains(&SongFlag::NegativeEigsClamped)
                    || r.flags.contains(&SongFlag::TraceClamped)
            })
            .count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let csv_err = |e: csv::Error| FadError::Csv {
            context: "score table".into(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SCORE_CSV_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            let flags: Vec<&str> = row.flags.iter().map(|f| f.as_str()).collect();
            w.write_record([
                row.song_id.clone(),
                row.fad.map(|f| f.to_string()).unwrap_or_default(),
                row.n_frames.to_string(),
                row.rank.map(|r| r.to_string()).unwrap_or_default(),
                flags.join(";"),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| FadError::Csv {
            context: "score table".into(),
            message: e.to_string(),
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Parses a score CSV. Ranks are recomputed from the scores and must agree with the file.
    pub fn read_csv<R: Read>(reader: R, reference_id: impl Into<String>) -> Result<Self> {
        let err = |line: Option<u64>, message: String| FadError::Csv {
            context: match line {
                Some(l) => format!("score table line {l}"),
                None => "score table".into(),
            },
            message,
        };
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| err(None, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != SCORE_CSV_HEADER {
            return Err(err(
                Some(1),
                format!("expected header {}", SCORE_CSV_HEADER.join(",")),
            ));
        }
        let mut rows = Vec::new();
        let mut file_ranks = Vec::new();
        for record in r.records() {
            let record = record.map_err(|e| err(None, e.to_string()))?;
            let line = record.position().map(|p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let song_id = field(0).to_string();
            if song_id.is_empty() {
                return Err(err(line, "empty song_id".into()));
            }
            let fad = match field(1) {
                "" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|e| err(line, format!("fad: {e}")))?,
                ),
            };
            let n_frames = field(2)
                .parse::<u64>()
                .map_err(|e| err(line, format!("n_frames: {e}")))?;
            let rank = match field(3) {
                "" => None,
                s => Some(
                    s.parse::<usize>()
                        .map_err(|e| err(line, format!("rank: {e}")))?,
                ),
            };
            let flags = field(4)
                .split(';')
                .filter(|s| !s.is_empty())
                .map(SongFlag::from_str)
                .collect::<Result<BTreeSet<_>>>()?;
            file_ranks.push((song_id.clone(), rank));
            rows.push(SongRow {
                song_id,
                fad,
                n_frames,
                rank,
                flags,
            });
        }
        let table = SongScoreTable::from_rows(reference_id, rows)?;
        for (id, rank) in file_ranks {
            if rank.is_some() && table.get(&id).and_then(|r| r.rank) != rank {
                return Err(err(
                    None,
                    format!("rank of {id:?} disagrees with its score"),
                ));
            }
        }
        Ok(table)
    }
}

/// Scores every song against `reference`. Songs with fewer than two frames are listed as skipped.
pub fn per_song_scores(
    reference: &GaussianStats,
    songs: &[EmbeddingFrameSet],
    reference_id: &str,
) -> Result<SongScoreTable> {
    if songs.is_empty() {
        return Err(FadError::EmptyCollection("no songs to score"));
    }
    let dim = reference.dim();
    for song in songs {
        if song.dim() != dim {
            return Err(FadError::DimMismatch {
                expected: dim,
                found: song.dim(),
            });
        }
    }
    let rows = songs
        .par_iter()
        .map(|song| {
            let n_frames = song.n_frames() as u64;
            let mut flags = BTreeSet::new();
            if n_frames < 2 {
                flags.insert(SongFlag::Skipped);
                return Ok(SongRow {
                    song_id: song.song_id.clone(),
                    fad: None,
                    n_frames,
                    rank: None,
                    flags,
                });
            }
            if n_frames < dim as u64 + 1 {
                flags.insert(SongFlag::RankDeficient);
            }
            let fit = GaussianStats::fit(&song.frames);
            let score = frechet_distance(reference, &fit).map_err(|e| FadError::InSong {
                song_id: song.song_id.clone(),
                source: Box::new(e),
            })?;
            flags.extend(score.flags.iter().map(|&f| SongFlag::from(f)));
            Ok(SongRow {
                song_id: song.song_id.clone(),
                fad: Some(score.value),
                n_frames,
                rank: None,
                flags,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SongScoreTable::from_rows(reference_id, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub k: usize,
    /// Highest FAD first.
    pub top: Vec<String>,
    /// Lowest FAD first.
    pub bottom: Vec<String>,
}

/// Number of songs per side: `round(fraction * len)`, halves rounded up.
pub fn extreme_count(fraction: f64, len: usize) -> usize {
    (fraction * len as f64 + 0.5).floor() as usize
}

/// The `round(fraction * len)` highest- and lowest-scored songs.
pub fn select_extremes(table: &SongScoreTable, fraction: f64) -> Result<Extremes> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(FadError::InvalidFraction(fraction));
    }
    let len = table.scored_len();
    if len < 2 {
        return Err(FadError::TableTooShort(len));
    }
    let k = extreme_count(fraction, len);
    Ok(Extremes {
        k,
        top: table
            .scored()
            .rev()
            .take(k)
            .map(|r| r.song_id.clone())
            .collect(),
        bottom: table.scored().take(k).map(|r| r.song_id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierEntry {
    pub song_id: String,
    pub fad: f64,
    pub rank: usize,
    pub n_frames: u64,
    pub flags: BTreeSet<SongFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub reference_id: String,
    pub k: usize,
    /// Highest FAD first.
    pub highest: Vec<OutlierEntry>,
    /// Lowest FAD first.
    pub lowest: Vec<OutlierEntry>,
}

impl OutlierReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (title, entries) in [("highest", &self.highest), ("lowest", &self.lowest)] {
            out.push_str(&format!("{} {} per-song FAD\n", title, self.k));
            for e in entries {
                let flags: Vec<&str> = e.flags.iter().map(|f| f.as_str()).collect();
                let line = format!(
                    "  {:>5}  {:<24} {:>12}  {:>7} frames  {}",
                    e.rank,
                    e.song_id,
                    sig6(e.fad),
                    e.n_frames,
                    flags.join(";")
                );
                out.push_str(line.trim_end());
                out.push('\n');
            }
        }
        out
    }
}

/// The `k` highest and `k` lowest scored songs. Requires `1 <= k` and `2k <= scored songs`.
pub fn outlier_report(table: &SongScoreTable, k: usize) -> Result<OutlierReport> {
    let len = table.scored_len();
    if k == 0 || 2 * k > len {
        return Err(FadError::InvalidK { k, len });
    }
    let entry = |r: &SongRow| OutlierEntry {
        song_id: r.song_id.clone(),
        fad: r.fad.unwrap(),
        rank: r.rank.unwrap(),
        n_frames: r.n_frames,
        flags: r.flags.clone(),
    };
    Ok(OutlierReport {
        reference_id: table.reference_id.clone(),
        k,
        highest: table.scored().rev().take(k).map(entry).collect(),
        lowest: table.scored().take(k).map(entry).collect(),
    })
}
