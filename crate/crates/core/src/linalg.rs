//! Small dense helpers for d×d covariance work. Matrices are row-major `Vec<f64>`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn scaled_identity(d: usize, s: f64) -> Vec<f64> {
    identity(d).into_iter().map(|v| v * s).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn to_dmatrix(d: usize, m: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = m[(i, j)];
        }
    }
    out
}

/// Symmetric within `1e-12` (relative to the largest entry) and strictly positive spectrum.
pub fn validate_spd(d: usize, m: &[f64]) -> Result<()> {
    if m.len() != d * d {
        return Err(Error::invalid(format!(
            "covariance has {} entries, expected {}",
            m.len(),
            d * d
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[i * d + j] - m[j * d + i]).abs() > 1e-12 * scale {
                return Err(Error::invalid("covariance is not symmetric"));
            }
        }
    }
    let eig = SymmetricEigen::new(to_dmatrix(d, m));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::invalid(format!(
            "covariance is not positive definite (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor, row-major.
pub fn cholesky(d: usize, m: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::invalid("matrix is not positive definite"));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Squared Mahalanobis norm `‖L⁻¹v‖²` by forward substitution.
#[inline]
pub(crate) fn mahalanobis_sq(d: usize, chol: &[f64], v: &[f64]) -> f64 {
    if d == 1 {
        let z = v[0] / chol[0];
        return z * z;
    }
    let mut z = [0.0f64; 8];
    let mut heap;
    let z: &mut [f64] = if d <= 8 {
        &mut z[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    let mut acc = 0.0;
    for i in 0..d {
        let mut s = v[i];
        for k in 0..i {
            s -= chol[i * d + k] * z[k];
        }
        z[i] = s / chol[i * d + i];
        acc += z[i] * z[i];
    }
    acc
}

pub(crate) fn log_det_from_chol(d: usize, chol: &[f64]) -> f64 {
    (0..d).map(|i| 2.0 * chol[i * d + i].ln()).sum()
}

/// `L z` for lower-triangular `L`.
pub(crate) fn lower_mul(d: usize, chol: &[f64], z: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..=i {
            s += chol[i * d + k] * z[k];
        }
        out[i] = s;
    }
}

pub fn inverse(d: usize, m: &[f64]) -> Result<Vec<f64>> {
    let inv = to_dmatrix(d, m)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))?;
    Ok(symmetrize(d, &from_dmatrix(&inv)))
}

pub(crate) fn symmetrize(d: usize, m: &[f64]) -> Vec<f64> {
    let mut out = m.to_vec();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[i * d + j] + m[j * d + i]);
            out[i * d + j] = avg;
            out[j * d + i] = avg;
        }
    }
    out
}

pub(crate) fn mat_vec(d: usize, m: &[f64], v: &[f64]) -> Vec<f64> {
    (0..d)
        .map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum())
        .collect()
}

pub(crate) fn min_eigenvalue(d: usize, m: &[f64]) -> f64 {
    SymmetricEigen::new(to_dmatrix(d, m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip() {
        let m = vec![4.0, 2.0, 2.0, 3.0];
        let l = cholesky(2, &m).unwrap();
        let mut back = vec![0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                back[i * 2 + j] = (0..2).map(|k| l[i * 2 + k] * l[j * 2 + k]).sum();
            }
        }
        for (a, b) in m.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(validate_spd(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(validate_spd(2, &[1.0, 0.1, 0.0, 1.0]).is_err());
        assert!(validate_spd(2, &[1.0, 0.1, 0.1, 1.0]).is_ok());
    }

    #[test]
    fn mahalanobis_matches_inverse() {
        let m = vec![2.0, 0.5, 0.5, 1.0];
        let l = cholesky(2, &m).unwrap();
        let inv = inverse(2, &m).unwrap();
        let v = [0.3, -1.2];
        let direct: f64 = (0..2)
            .map(|i| (0..2).map(|j| v[i] * inv[i * 2 + j] * v[j]).sum::<f64>())
            .sum();
        assert!((mahalanobis_sq(2, &l, &v) - direct).abs() < 1e-13);
    }

    #[test]
    fn lse_handles_underflow() {
        let v = log_sum_exp([-1000.0, -1001.0]);
        assert!((v - (-1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
