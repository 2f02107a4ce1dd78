//! Sample-size bias correction.
//!
//! FAD is biased upwards at finite sample size, roughly linearly in `1/N`. For a grid of sample
//! sizes we draw bootstrap samples (with replacement) from the test pool, average the FAD of the
//! repeats at each size, regress the averages on `1/N` by ordinary least squares, and report the
//! intercept as the `N -> infinity` estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingFrameSet, Frames};
use crate::error::{FadError, Result};
use crate::stats::{frechet_distance, GaussianStats};

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_GRID_POINTS: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
/// Intercepts below `-UNSTABLE_FRACTION` times the smallest-size score are flagged.
pub const UNSTABLE_FRACTION: f64 = 0.05;

/// What a bootstrap draw resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapUnit {
    #[default]
    Frame,
    /// Whole songs; sizes count songs.
    Song,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadInfConfig {
    /// `None` selects [`default_sizes`].
    pub sizes: Option<Vec<usize>>,
    pub repeats: usize,
    pub seed: u64,
    pub unit: BootstrapUnit,
}

impl Default for FadInfConfig {
    fn default() -> Self {
        FadInfConfig {
            sizes: None,
            repeats: DEFAULT_REPEATS,
            seed: DEFAULT_SEED,
            unit: BootstrapUnit::Frame,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub size: usize,
    pub mean_fad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadInfEstimate {
    pub fad_inf: f64,
    /// Bias coefficient: change in FAD per unit of `1/N`.
    pub slope: f64,
    pub points: Vec<RegressionPoint>,
    pub r_squared: f64,
    pub seed: u64,
    pub repeats: usize,
    pub unit: BootstrapUnit,
    pub unstable: bool,
}

/// Ordinary least squares of score against `1/size`.
pub fn fit_inverse_size(points: &[RegressionPoint]) -> Result<LinearFit> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(FadError::TooFewSizes(sizes.len()));
    }
    if sizes[0] == 0 {
        return Err(FadError::SizeOutOfRange {
            size: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.size as f64).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.mean_fad).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, p) in xs.iter().zip(points) {
        let dx = x - x_mean;
        let dy = p.mean_fad - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| {
            let r = p.mean_fad - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LinearFit {
        intercept,
        slope,
        r_squared,
    })
}

/// Smallest size the default grid may use for a frame pool.
fn min_frame_size(dim: usize) -> usize {
    dim + 2
}

/// Ten sizes spaced geometrically from `max(2 (dim + 1), total / 64)` up to `total`.
pub fn default_sizes(dim: usize, total: usize) -> Vec<usize> {
    let lo = (2 * (dim + 1)).max(total / 64).min(total);
    let hi = total;
    let steps = DEFAULT_GRID_POINTS - 1;
    let ratio = (hi as f64 / lo as f64).powf(1.0 / steps as f64);
    let mut sizes: Vec<usize> = (0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                ((lo as f64) * ratio.powi(i as i32)).round() as usize
            }
        })
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// The population a bootstrap draws from.
pub enum BootstrapPool<'a> {
    Frames(Frames),
    Songs(Vec<&'a Frames>),
}

impl<'a> BootstrapPool<'a> {
    /// Concatenates every frame of `songs` (in song-id order) into one frame pool.
    pub fn frames_of(songs: &[EmbeddingFrameSet]) -> Result<Self> {
        let first = songs
            .first()
            .ok_or(FadError::EmptyCollection("bootstrap pool has no songs"))?;
        let dim = first.dim();
        let mut ordered: Vec<&EmbeddingFrameSet> = songs.iter().collect();
        ordered.sort_by(|a, b| a.song_id.cmp(&b.song_id));
        let mut data = Vec::new();
        for song in ordered {
            if song.dim() != dim {
                return Err(FadError::DimMismatch {
                    expected: dim,
                    found: song.dim(),
                });
            }
            data.extend_from_slice(song.frames.as_slice());
        }
        Ok(BootstrapPool::Frames(Frames::new(dim, data)?))
    }

    pub fn songs_of(songs: &'a [EmbeddingFrameSet]) -> Result<Self> {
        if songs.is_empty() {
            return Err(FadError::EmptyCollection("bootstrap pool has no songs"));
        }
        let mut ordered: Vec<&EmbeddingFrameSet> = songs.iter().collect();
        ordered.sort_by(|a, b| a.song_id.cmp(&b.song_id));
        Ok(BootstrapPool::Songs(
            ordered.into_iter().map(|s| &s.frames).collect(),
        ))
    }

    pub fn unit(&self) -> BootstrapUnit {
        match self {
            BootstrapPool::Frames(_) => BootstrapUnit::Frame,
            BootstrapPool::Songs(_) => BootstrapUnit::Song,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BootstrapPool::Frames(f) => f.n_frames(),
            BootstrapPool::Songs(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            BootstrapPool::Frames(f) => Some(f.dim()),
            BootstrapPool::Songs(s) => s.first().map(|f| f.dim()),
        }
    }

    /// Fit of one bootstrap sample of `size` units.
    fn sample_fit(&self, dim: usize, size: usize, rng: &mut ChaCha8Rng) -> GaussianStats {
        let mut stats = GaussianStats::new(dim);
        let n = self.len();
        match self {
            BootstrapPool::Frames(frames) => {
                for _ in 0..size {
                    let i = rng.random_range(0..n);
                    stats
                        .accumulate_f32(frames.row(i))
                        .expect("pool frames are validated");
                }
            }
            BootstrapPool::Songs(songs) => {
                for _ in 0..size {
                    let song = songs[rng.random_range(0..n)];
                    for row in song.rows() {
                        stats
                            .accumulate_f32(row)
                            .expect("pool frames are validated");
                    }
                }
            }
        }
        stats
    }

    fn bounds(&self, dim: usize) -> (usize, usize) {
        match self {
            BootstrapPool::Frames(_) => (min_frame_size(dim), 4 * (dim + 1)),
            BootstrapPool::Songs(_) => (2, 4),
        }
    }
}

/// Resolves and validates the size grid for a pool.
pub fn resolve_sizes(
    pool: &BootstrapPool,
    dim: usize,
    sizes: Option<&[usize]>,
) -> Result<Vec<usize>> {
    let total = pool.len();
    let (min_size, min_pool) = pool.bounds(dim);
    if total < min_pool {
        return Err(FadError::PoolTooSmall {
            pool: total,
            required: min_pool,
        });
    }
    let mut sizes = match sizes {
        Some(s) => s.to_vec(),
        None => match pool {
            BootstrapPool::Frames(_) => default_sizes(dim, total),
            BootstrapPool::Songs(_) => default_sizes(0, total)
                .into_iter()
                .map(|s| s.max(min_size))
                .collect(),
        },
    };
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(FadError::TooFewSizes(sizes.len()));
    }
    for &size in &sizes {
        if size < min_size || size > total {
            return Err(FadError::SizeOutOfRange {
                size,
                min: min_size,
                max: total,
            });
        }
    }
    Ok(sizes)
}

/// Random stream for one (size, repeat) job. Streams are fixed by the job index alone, so the
/// result does not depend on how jobs are scheduled.
fn job_rng(seed: u64, job: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(job);
    rng
}

/// Mean bootstrap FAD at each size.
pub fn bootstrap_curve(
    reference: &GaussianStats,
    pool: &BootstrapPool,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<RegressionPoint>> {
    Ok(bootstrap_scores(reference, pool, sizes, repeats, seed)?
        .into_iter()
        .zip(sizes)
        .map(|(scores, &size)| RegressionPoint {
            size,
            mean_fad: scores.iter().sum::<f64>() / scores.len() as f64,
        })
        .collect())
}

/// Every bootstrap FAD, grouped by size.
pub fn bootstrap_scores(
    reference: &GaussianStats,
    pool: &BootstrapPool,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let dim = reference.dim();
    if let Some(pool_dim) = pool.dim() {
        if pool_dim != dim {
            return Err(FadError::DimMismatch {
                expected: dim,
                found: pool_dim,
            });
        }
    }
    if repeats == 0 {
        return Err(FadError::OutOfRange("repeats must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|s| (0..repeats).map(move |r| (s, r)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let mut rng = job_rng(seed, (s * repeats + r) as u64);
            let fit = pool.sample_fit(dim, sizes[s], &mut rng);
            frechet_distance(reference, &fit).map(|d| d.value)
        })
        .collect::<Result<_>>()?;
    Ok(scores.chunks(repeats).map(|c| c.to_vec()).collect())
}

/// Bias-corrected FAD: bootstrap scores over a size grid, extrapolated to infinite size.
pub fn fad_infinity(
    reference: &GaussianStats,
    pool: &BootstrapPool,
    config: &FadInfConfig,
) -> Result<FadInfEstimate> {
    if pool.unit() != config.unit {
        return Err(FadError::InvalidMetadata(format!(
            "pool resamples {:?} but config asks for {:?}",
            pool.unit(),
            config.unit
        )));
    }
    let dim = reference.dim();
    let sizes = resolve_sizes(pool, dim, config.sizes.as_deref())?;
    let points = bootstrap_curve(reference, pool, &sizes, config.repeats, config.seed)?;
    let fit = fit_inverse_size(&points)?;
    let smallest = points[0].mean_fad;
    Ok(FadInfEstimate {
        fad_inf: fit.intercept,
        slope: fit.slope,
        r_squared: fit.r_squared,
        unstable: fit.intercept < -UNSTABLE_FRACTION * smallest,
        points,
        seed: config.seed,
        repeats: config.repeats,
        unit: config.unit,
    })
}
