//! Small dense complex linear algebra used by the beam-management pipelines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Condition number above which a matrix is treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

const POWER_ITERATIONS: usize = 50;
const POWER_TOL: f64 = 1e-10;
// Each squaring doubles the effective iteration count of the power method.
const POWER_SQUARINGS: usize = 4;

/// One draw of a circularly-symmetric standard complex Gaussian, CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of iid CN(0, 1) entries, filled column-major.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Spectral norm (largest singular value) via the power method on `m* m`.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut op = gram.map(|z| z / scale);
    for _ in 0..POWER_SQUARINGS {
        op = &op * &op;
        let s = op.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s == 0.0 || !s.is_finite() {
            break;
        }
        op /= Complex64::new(s, 0.0);
    }

    // Start from the strongest column so the start is never orthogonal to the
    // dominant eigenvector of a Hermitian PSD operator.
    let start = (0..op.ncols())
        .max_by(|&a, &b| {
            op.column(a)
                .norm_squared()
                .total_cmp(&op.column(b).norm_squared())
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut v: CVec = op.column(start).into_owned();
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    v /= Complex64::new(n, 0.0);

    let mut lambda = rayleigh(&gram, &v);
    for _ in 0..POWER_ITERATIONS {
        let mut next = &op * &v;
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        next /= Complex64::new(n, 0.0);
        v = next;
        let updated = rayleigh(&gram, &v);
        let converged = (updated - lambda).abs() <= POWER_TOL * updated.abs().max(f64::MIN_POSITIVE);
        lambda = updated;
        if converged {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

fn rayleigh(a: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * a * v)[(0, 0)].re
}

/// Ratio of largest to smallest singular value; infinite for rank-deficient input.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn checked_inverse(m: CMat, what: &str) -> Result<CMat> {
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!("{what}: condition number {cond:.3e}")));
    }
    m.try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what}: inversion failed")))
}

/// Left pseudo-inverse transpose `H (H* H)^-1` of a tall full-column-rank matrix.
/// The result `W` satisfies `W* H = I`.
pub fn left_pinv_adjoint(h: &CMat) -> Result<CMat> {
    if condition_number(h) > MAX_CONDITION {
        return Err(Error::Singular("rank-deficient channel".into()));
    }
    let gram = h.adjoint() * h;
    Ok(h * checked_inverse(gram, "H*H")?)
}

/// Right pseudo-inverse `H* (H H*)^-1` of a wide full-row-rank matrix.
pub fn right_pinv(h: &CMat) -> Result<CMat> {
    let gram = h * h.adjoint();
    Ok(h.adjoint() * checked_inverse(gram, "HH*")?)
}

/// `log2 det(m)` for a Hermitian positive-definite matrix.
pub fn log2_det_hpd(m: &CMat) -> Result<f64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-9 * scale {
        return Err(Error::Numerical(format!("matrix not Hermitian (deviation {asym:.3e})")));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite entries".into()));
    }
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    let chol = herm
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

/// Inverse of a Hermitian PSD matrix, or `None` when it is not positive definite.
pub fn hpd_inverse(m: &CMat) -> Option<CMat> {
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    herm.cholesky().map(|c| c.inverse())
}
