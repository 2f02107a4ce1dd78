//! Streaming, mergeable multinormal fits.
//!
//! Frames are accumulated relative to an origin (the first frame seen) with the centred Welford
//! recurrence. The covariance is kept directly (divisor `count - 1`), so a fit reloaded from a
//! cache file reproduces the stored matrix exactly.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::embedding::Frames;
use crate::error::{FadError, Result};

/// Frames per independent accumulation block. Block boundaries depend only on the input, never
/// on the worker count, which keeps parallel fits bit-reproducible.
pub const FIT_BLOCK_FRAMES: usize = 4096;

/// Which divisor turns the scatter matrix into a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceDivisor {
    /// `count - 1`
    #[default]
    Unbiased,
    /// `count`
    Biased,
}

/// Mean and covariance of a stream of frames.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    dim: usize,
    count: u64,
    origin: DVector<f64>,
    /// mean - origin
    offset: DVector<f64>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Two fits are equal when count, mean and covariance agree; the internal origin is ignored.
impl PartialEq for GaussianStats {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.count == other.count
            && self.mean == other.mean
            && self.cov == other.cov
    }
}

impl GaussianStats {
    pub fn new(dim: usize) -> Self {
        GaussianStats {
            dim,
            count: 0,
            origin: DVector::zeros(dim),
            offset: DVector::zeros(dim),
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
        }
    }

    /// Builds stats from known moments. `cov` is taken as the unbiased covariance.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>, count: u64) -> Result<Self> {
        let dim = mean.len();
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(FadError::DimMismatch {
                expected: dim,
                found: cov.nrows(),
            });
        }
        if count < 2 {
            return Err(FadError::CovarianceUndefined);
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(FadError::OutOfRange("non-finite moment".into()));
        }
        let scale = cov.amax();
        for i in 0..dim {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(FadError::NotPsd(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GaussianStats {
            dim,
            count,
            origin: mean.clone(),
            offset: DVector::zeros(dim),
            mean,
            cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased covariance. Undefined below two frames.
    pub fn covariance(&self) -> Result<&DMatrix<f64>> {
        if self.count < 2 {
            return Err(FadError::CovarianceUndefined);
        }
        Ok(&self.cov)
    }

    pub fn covariance_with(&self, divisor: CovarianceDivisor) -> Result<DMatrix<f64>> {
        let cov = self.covariance()?;
        Ok(match divisor {
            CovarianceDivisor::Unbiased => cov.clone(),
            CovarianceDivisor::Biased => {
                let n = self.count as f64;
                cov * ((n - 1.0) / n)
            }
        })
    }

    /// Adds one frame.
    pub fn accumulate(&mut self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(FadError::DimMismatch {
                expected: self.dim,
                found: frame.len(),
            });
        }
        if let Some(col) = frame.iter().position(|v| !v.is_finite()) {
            return Err(FadError::NonFiniteFrame { row: 0, col });
        }
        self.push_unchecked(frame.iter().copied());
        Ok(())
    }

    pub fn accumulate_f32(&mut self, frame: &[f32]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(FadError::DimMismatch {
                expected: self.dim,
                found: frame.len(),
            });
        }
        if let Some(col) = frame.iter().position(|v| !v.is_finite()) {
            return Err(FadError::NonFiniteFrame { row: 0, col });
        }
        self.push_unchecked(frame.iter().map(|&v| v as f64));
        Ok(())
    }

    fn push_unchecked(&mut self, frame: impl Iterator<Item = f64>) {
        let d = self.dim;
        if self.count == 0 {
            for (o, x) in self.origin.iter_mut().zip(frame) {
                *o = x;
            }
            self.offset.fill(0.0);
            self.mean.copy_from(&self.origin);
            self.cov.fill(0.0);
            self.count = 1;
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        let mut delta = vec![0.0; d];
        for (i, x) in frame.enumerate() {
            delta[i] = (x - self.origin[i]) - self.offset[i];
            self.offset[i] += delta[i] / n;
            self.mean[i] = self.origin[i] + self.offset[i];
        }
        // cov_n = cov_{n-1} (n-2)/(n-1) + delta delta^T / n
        let shrink = (n - 2.0) / (n - 1.0);
        let inv_n = 1.0 / n;
        let c = self.cov.as_mut_slice();
        for j in 0..d {
            let dj = delta[j] * inv_n;
            for i in j..d {
                let v = c[j * d + i] * shrink + delta[i] * dj;
                c[j * d + i] = v;
                c[i * d + j] = v;
            }
        }
    }

    /// Sequential fit over every row of `frames`.
    pub fn fit(frames: &Frames) -> Self {
        let mut stats = GaussianStats::new(frames.dim());
        for row in frames.rows() {
            stats.push_unchecked(row.iter().map(|&v| v as f64));
        }
        stats
    }

    /// Fit over a sequence of row blocks. Each block is split into runs of
    /// [`FIT_BLOCK_FRAMES`], the runs are fitted in parallel, and the partial fits are merged in
    /// a fixed pairwise tree, so the result is independent of the thread count.
    pub fn fit_blocks(dim: usize, blocks: &[&Frames]) -> Result<Self> {
        let mut runs: Vec<&[f32]> = Vec::new();
        for frames in blocks {
            if frames.dim() != dim {
                return Err(FadError::DimMismatch {
                    expected: dim,
                    found: frames.dim(),
                });
            }
            runs.extend(frames.as_slice().chunks(FIT_BLOCK_FRAMES * dim));
        }
        let partials: Vec<GaussianStats> = runs
            .par_iter()
            .map(|run| {
                let mut stats = GaussianStats::new(dim);
                for row in run.chunks_exact(dim) {
                    stats.push_unchecked(row.iter().map(|&v| v as f64));
                }
                stats
            })
            .collect();
        Ok(tree_merge(dim, partials))
    }

    /// Pools two fits. Equivalent to accumulating the concatenated streams.
    pub fn merge(&self, other: &GaussianStats) -> Result<Self> {
        if self.dim != other.dim {
            return Err(FadError::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let d = self.dim;
        let na = self.count as f64;
        let nb = other.count as f64;
        let count = self.count + other.count;
        let n = count as f64;
        // difference of means, expressed without adding the large origins first
        let delta = (&other.origin - &self.origin) + (&other.offset - &self.offset);
        let offset = &self.offset + &delta * (nb / n);
        let mean = &self.origin + &offset;

        let wa = if self.count >= 2 { na - 1.0 } else { 0.0 };
        let wb = if other.count >= 2 { nb - 1.0 } else { 0.0 };
        let cross = na * nb / n;
        let inv = 1.0 / (n - 1.0);
        let a = self.cov.as_slice();
        let b = other.cov.as_slice();
        let mut cov = DMatrix::zeros(d, d);
        let c = cov.as_mut_slice();
        for j in 0..d {
            for i in j..d {
                let scatter = wa * a[j * d + i] + wb * b[j * d + i] + cross * delta[i] * delta[j];
                let v = scatter * inv;
                c[j * d + i] = v;
                c[i * d + j] = v;
            }
        }
        Ok(GaussianStats {
            dim: d,
            count,
            origin: self.origin.clone(),
            offset,
            mean,
            cov,
        })
    }

    /// Adds a constant vector to the mean, as if every frame had been shifted.
    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(FadError::DimMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        let mut out = self.clone();
        out.origin += shift;
        out.mean = &out.origin + &out.offset;
        Ok(out)
    }
}

/// Merges adjacent pairs level by level. The tree shape depends only on `parts.len()`.
pub fn tree_merge(dim: usize, mut parts: Vec<GaussianStats>) -> GaussianStats {
    if parts.is_empty() {
        return GaussianStats::new(dim);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut iter = parts.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(a.merge(&b).expect("partials share a dimension")),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}
