//! Independent reference computations for the integration tests. Nothing here calls into the
//! crate's numerical code: matrix square roots use a Denman-Beavers iteration carried out in
//! double-double arithmetic (about 106 significand bits).

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // one Newton step from the f64 root doubles the precision
        let x = Dd::from(self.hi.sqrt());
        x + (self - x * x) / (x * Dd::from(2.0))
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

/// Square matrix of double-doubles, row-major.
#[derive(Debug, Clone)]
pub struct DdMat {
    pub n: usize,
    pub a: Vec<Dd>,
}

impl DdMat {
    pub fn identity(n: usize) -> DdMat {
        let mut a = vec![Dd::ZERO; n * n];
        for i in 0..n {
            a[i * n + i] = Dd::ONE;
        }
        DdMat { n, a }
    }

    pub fn from_f64(m: &DMatrix<f64>) -> DdMat {
        let n = m.nrows();
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(Dd::from(m[(i, j)]));
            }
        }
        DdMat { n, a }
    }

    pub fn at(&self, i: usize, j: usize) -> Dd {
        self.a[i * self.n + j]
    }

    pub fn mul(&self, o: &DdMat) -> DdMat {
        let n = self.n;
        let mut a = vec![Dd::ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.at(i, k);
                for j in 0..n {
                    a[i * n + j] = a[i * n + j] + x * o.at(k, j);
                }
            }
        }
        DdMat { n, a }
    }

    pub fn scale(&self, s: Dd) -> DdMat {
        DdMat {
            n: self.n,
            a: self.a.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, o: &DdMat) -> DdMat {
        DdMat {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(&x, &y)| x + y).collect(),
        }
    }

    pub fn trace(&self) -> Dd {
        (0..self.n).fold(Dd::ZERO, |acc, i| acc + self.at(i, i))
    }

    pub fn max_abs_diff(&self, o: &DdMat) -> f64 {
        self.a
            .iter()
            .zip(&o.a)
            .map(|(&x, &y)| (x - y).abs().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Inverse and log-abs-determinant by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> (DdMat, f64) {
        let n = self.n;
        let mut m = self.a.clone();
        let mut inv = DdMat::identity(n).a;
        let mut log_det = 0.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| m[r * n + col].abs().hi.total_cmp(&m[s * n + col].abs().hi))
                .unwrap();
            assert!(m[pivot * n + col].hi != 0.0, "singular matrix in oracle");
            if pivot != col {
                for j in 0..n {
                    m.swap(pivot * n + j, col * n + j);
                    inv.swap(pivot * n + j, col * n + j);
                }
            }
            let p = m[col * n + col];
            log_det += p.hi.abs().ln();
            for j in 0..n {
                m[col * n + j] = m[col * n + j] / p;
                inv[col * n + j] = inv[col * n + j] / p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = m[r * n + col];
                if f.hi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[r * n + j] = m[r * n + j] - f * m[col * n + j];
                    inv[r * n + j] = inv[r * n + j] - f * inv[col * n + j];
                }
            }
        }
        (DdMat { n, a: inv }, log_det)
    }
}

/// Principal square root of a matrix with positive real spectrum, by the determinant-scaled
/// Denman-Beavers iteration.
pub fn denman_beavers_sqrt(m: &DdMat) -> DdMat {
    let n = m.n;
    let mut y = m.clone();
    let mut z = DdMat::identity(n);
    let half = Dd::from(0.5);
    let mut last_change = f64::INFINITY;
    for iter in 0..200 {
        let (y_inv, log_det_y) = y.inverse();
        let (z_inv, log_det_z) = z.inverse();
        // scaling speeds up the early iterations; late ones run unscaled for full accuracy
        let mu = if iter < 20 {
            Dd::from((-(log_det_y + log_det_z) / (2.0 * n as f64)).exp())
        } else {
            Dd::ONE
        };
        let mu_inv = Dd::ONE / mu;
        let y_next = y.scale(mu).add(&z_inv.scale(mu_inv)).scale(half);
        let z_next = z.scale(mu).add(&y_inv.scale(mu_inv)).scale(half);
        let change = y_next.max_abs_diff(&y);
        let size = y_next.max_abs();
        let stalled = iter >= 25 && change >= last_change;
        y = y_next;
        z = z_next;
        if iter >= 20 && (change <= 1e-28 * size || stalled) {
            return y;
        }
        last_change = change;
    }
    panic!("Denman-Beavers iteration did not converge");
}

/// Frechet distance between two Gaussians computed entirely in double-double arithmetic.
pub fn oracle_frechet(
    mean_r: &DVector<f64>,
    cov_r: &DMatrix<f64>,
    mean_t: &DVector<f64>,
    cov_t: &DMatrix<f64>,
) -> f64 {
    let mut mean_term = Dd::ZERO;
    for (a, b) in mean_r.iter().zip(mean_t.iter()) {
        let d = Dd::from(*a) - Dd::from(*b);
        mean_term = mean_term + d * d;
    }
    let r = DdMat::from_f64(cov_r);
    let t = DdMat::from_f64(cov_t);
    let root = denman_beavers_sqrt(&r.mul(&t));
    let trace = r.trace() + t.trace() - Dd::from(2.0) * root.trace();
    (mean_term + trace).to_f64()
}

/// Two-pass sample mean and unbiased covariance, accumulated in double-double.
pub fn two_pass_moments(rows: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![Dd::ZERO; d];
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m = *m + Dd::from(x);
        }
    }
    let count = Dd::from(n as f64);
    for m in mean.iter_mut() {
        *m = *m / count;
    }
    let mut cov = vec![Dd::ZERO; d * d];
    for row in rows {
        let centred: Vec<Dd> = row
            .iter()
            .zip(&mean)
            .map(|(&x, &m)| Dd::from(x) - m)
            .collect();
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = cov[i * d + j] + centred[i] * centred[j];
            }
        }
    }
    let denom = Dd::from((n - 1) as f64);
    (
        DVector::from_iterator(d, mean.iter().map(|m| m.to_f64())),
        DMatrix::from_row_iterator(d, d, cov.iter().map(|c| (*c / denom).to_f64())),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random SPD matrix with log-spaced eigenvalues: the largest is `scale`, the condition number
/// is `cond`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, cond: f64, scale: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let eig = DVector::from_fn(n, |i, _| {
        let t = if n == 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        };
        scale * cond.powf(-t)
    });
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Largest element-wise difference relative to the largest reference magnitude.
pub fn mat_rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let scale = want.amax().max(f64::MIN_POSITIVE);
    (got - want).amax() / scale
}

pub fn vec_rel_err(got: &DVector<f64>, want: &DVector<f64>) -> f64 {
    let scale = want.amax().max(f64::MIN_POSITIVE);
    (got - want).amax() / scale
}

#[cfg(test)]
mod tests {
    #[allow(unused_imports)]
    use super::*;

    #[test]
    fn double_double_carries_extra_bits() {
        let third = Dd::ONE / Dd::from(3.0);
        let back = third * Dd::from(3.0) - Dd::ONE;
        assert!(back.abs().to_f64() < 1e-30);
        let two = Dd::from(2.0).sqrt();
        assert!((two * two - Dd::from(2.0)).abs().to_f64() < 1e-30);
    }

    #[test]
    fn root_of_diagonal_product() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 1e-6]));
        let root = denman_beavers_sqrt(&DdMat::from_f64(&a));
        for (i, want) in [2.0, 3.0, 1e-3].iter().enumerate() {
            assert!((root.at(i, i).to_f64() - want).abs() <= 1e-15 * want);
        }
    }
}
