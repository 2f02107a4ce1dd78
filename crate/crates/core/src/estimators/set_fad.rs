use serde::Serialize;

use crate::embedding::EmbeddingFrameSet;
use crate::error::{FadError, Result};
use crate::stats::{frechet_distance, FadScore, GaussianStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetFad {
    pub score: FadScore,
    pub n_songs: usize,
    pub n_frames: u64,
    /// Set when the pooled test fit has fewer than `dim + 1` frames and is therefore singular.
    pub undersampled: bool,
}

/// Pools every frame of `songs` into one fit and scores it against `reference`.
pub fn fad_set(reference: &GaussianStats, songs: &[EmbeddingFrameSet]) -> Result<SetFad> {
    if songs.is_empty() {
        return Err(FadError::EmptyCollection("test set has no songs"));
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
    let mut ordered: Vec<&EmbeddingFrameSet> = songs.iter().collect();
    ordered.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    let blocks: Vec<_> = ordered.iter().map(|s| &s.frames).collect();
    let test = GaussianStats::fit_blocks(dim, &blocks)?;
    if test.count() < 2 {
        return Err(FadError::CovarianceUndefined);
    }
    let score = frechet_distance(reference, &test)?;
    Ok(SetFad {
        score,
        n_songs: songs.len(),
        n_frames: test.count(),
        undersampled: test.count() < dim as u64 + 1,
    })
}
