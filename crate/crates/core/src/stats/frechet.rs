//! Frechet distance between two multinormal fits:
//!
//! `d = |mu_r - mu_t|^2 + tr(S_r + S_t - 2 sqrt(S_r S_t))`
//!
//! The square-root trace is taken through the symmetric product `A S_t A` with
//! `A = S_r^{1/2}`, which has the same eigenvalues as `S_r S_t` but stays symmetric, so both
//! factorizations are symmetric eigendecompositions.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::stats::gaussian::{CovarianceDivisor, GaussianStats};

/// Eigenvalues in `[-NEGATIVE_EIG_TOL * max|eig|, 0)` are rounding noise and clamp to zero;
/// anything more negative is reported as a breakdown.
pub const NEGATIVE_EIG_TOL: f64 = 1e-6;

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericalFlag {
    NegativeEigsClamped,
    TraceClamped,
}

impl NumericalFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NumericalFlag::NegativeEigsClamped => "negative-eigs-clamped",
            NumericalFlag::TraceClamped => "trace-clamped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadScore {
    /// `max(0, mean_term + trace_term)`
    pub value: f64,
    pub mean_term: f64,
    pub trace_term: f64,
    pub flags: BTreeSet<NumericalFlag>,
}

struct ClampedEigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    clamped: bool,
}

fn clamped_eigen(m: DMatrix<f64>) -> Result<ClampedEigen> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| FadError::EigenFailure("symmetric eigensolver did not converge".into()))?;
    let largest = eig.eigenvalues.amax();
    let mut values = eig.eigenvalues;
    let mut clamped = false;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_EIG_TOL * largest {
                return Err(FadError::NegativeEigenvalue {
                    eigenvalue: *v,
                    largest,
                    tolerance: NEGATIVE_EIG_TOL,
                });
            }
            *v = 0.0;
            clamped = true;
        }
    }
    Ok(ClampedEigen {
        values,
        vectors: eig.eigenvectors,
        clamped,
    })
}

/// Principal square root of a symmetric PSD matrix. The flag reports eigenvalue clamping.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let eig = clamped_eigen(m.clone())?;
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        eig.vectors[(i, j)] * eig.values[j].sqrt()
    });
    let root = &scaled * eig.vectors.transpose();
    Ok(((&root + root.transpose()) * 0.5, eig.clamped))
}

/// `tr sqrt(S_r S_t)` for symmetric PSD inputs.
pub fn trace_sqrt_product(cov_r: &DMatrix<f64>, cov_t: &DMatrix<f64>) -> Result<(f64, bool)> {
    let (root_r, clamped_r) = psd_sqrt(cov_r)?;
    let inner = &root_r * cov_t * &root_r;
    let eig = clamped_eigen(inner)?;
    let trace = eig.values.iter().map(|v| v.sqrt()).sum();
    Ok((trace, clamped_r || eig.clamped))
}

/// Frechet distance between two Gaussians given by their moments.
pub fn frechet_from_moments(
    mean_r: &DVector<f64>,
    cov_r: &DMatrix<f64>,
    mean_t: &DVector<f64>,
    cov_t: &DMatrix<f64>,
) -> Result<FadScore> {
    let dim = mean_r.len();
    for found in [
        mean_t.len(),
        cov_r.nrows(),
        cov_r.ncols(),
        cov_t.nrows(),
        cov_t.ncols(),
    ] {
        if found != dim {
            return Err(FadError::DimMismatch {
                expected: dim,
                found,
            });
        }
    }
    if [mean_r, mean_t]
        .iter()
        .flat_map(|m| m.iter())
        .chain(cov_r.iter())
        .chain(cov_t.iter())
        .any(|v| !v.is_finite())
    {
        return Err(FadError::OutOfRange("non-finite moment".into()));
    }

    let mean_term = (mean_r - mean_t).norm_squared();
    let (tr_sqrt, clamped) = trace_sqrt_product(cov_r, cov_t)?;
    let trace_term = cov_r.trace() + cov_t.trace() - 2.0 * tr_sqrt;

    let mut flags = BTreeSet::new();
    if clamped {
        flags.insert(NumericalFlag::NegativeEigsClamped);
    }
    let total = mean_term + trace_term;
    let value = if total < 0.0 {
        flags.insert(NumericalFlag::TraceClamped);
        0.0
    } else {
        total
    };
    Ok(FadScore {
        value,
        mean_term,
        trace_term,
        flags,
    })
}

/// Frechet distance between two fits using the unbiased covariance.
pub fn frechet_distance(reference: &GaussianStats, test: &GaussianStats) -> Result<FadScore> {
    frechet_distance_with(reference, test, CovarianceDivisor::Unbiased)
}

pub fn frechet_distance_with(
    reference: &GaussianStats,
    test: &GaussianStats,
    divisor: CovarianceDivisor,
) -> Result<FadScore> {
    if reference.dim() != test.dim() {
        return Err(FadError::DimMismatch {
            expected: reference.dim(),
            found: test.dim(),
        });
    }
    let cov_r = reference.covariance_with(divisor)?;
    let cov_t = test.covariance_with(divisor)?;
    frechet_from_moments(reference.mean(), &cov_r, test.mean(), &cov_t)
}
