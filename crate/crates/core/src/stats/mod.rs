//! Multinormal fits and the Frechet distance between them.

pub mod cache;
pub mod frechet;
pub mod gaussian;

pub use cache::StatsCache;
pub use frechet::{
    frechet_distance, frechet_distance_with, frechet_from_moments, psd_sqrt, trace_sqrt_product,
    FadScore, NumericalFlag, NEGATIVE_EIG_TOL,
};
pub use gaussian::{tree_merge, CovarianceDivisor, GaussianStats, FIT_BLOCK_FRAMES};

use crate::embedding::EmbeddingSet;
use crate::error::Result;

/// Fits one Gaussian over every frame of a set, songs taken in id order.
pub fn fit_set(set: &EmbeddingSet) -> Result<GaussianStats> {
    let blocks: Vec<_> = set.songs.iter().map(|s| &s.frames).collect();
    GaussianStats::fit_blocks(set.dim(), &blocks)
}
