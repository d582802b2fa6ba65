//! Thin wrappers over faer for the dense problems used throughout.

use faer::linalg::solvers::SolveCore;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

/// Scalars the time integrator and matrix helpers are generic over.
pub trait Scalar:
    faer::traits::ComplexField
    + Copy
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + From<f64>
    + Send
    + Sync
    + 'static
{
    fn to_c64(self) -> c64;
    fn scale(self, s: f64) -> Self;
    fn abs_value(self) -> f64;
}

impl Scalar for f64 {
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_value(self) -> f64 {
        self.abs()
    }
}

impl Scalar for c64 {
    fn to_c64(self) -> c64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_value(self) -> f64 {
        self.norm()
    }
}

pub fn to_complex<T: Scalar>(a: MatRef<'_, T>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].to_c64())
}

pub fn max_abs<T: Scalar>(a: MatRef<'_, T>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs_value());
        }
    }
    m
}

/// Largest |a_ij - conj(a_ji)| relative to the largest entry.
pub fn hermitian_defect<T: Scalar>(a: MatRef<'_, T>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)].to_c64() - a[(j, i)].to_c64().conj()).norm());
        }
    }
    let scale = max_abs(a);
    if scale > 0.0 {
        worst / scale
    } else {
        0.0
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn herm_eigen(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// General eigendecomposition of a real or complex matrix.
pub fn eigen<T: Scalar>(a: MatRef<'_, T>) -> Result<(Vec<c64>, Mat<c64>)> {
    let z = to_complex(a);
    let evd = z.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn determinant<T: Scalar>(a: MatRef<'_, T>) -> c64 {
    to_complex(a).determinant()
}

/// Hager's estimate of the 1-norm condition number of a symmetric matrix.
pub fn condition_estimate_symmetric(a: MatRef<'_, f64>, lu: &faer::linalg::solvers::PartialPivLu<f64>) -> f64 {
    let n = a.nrows();
    let mut norm_a: f64 = 0.0;
    for j in 0..n {
        norm_a = norm_a.max((0..n).map(|i| a[(i, j)].abs()).sum());
    }
    let mut x = Mat::<f64>::from_fn(n, 1, |_, _| 1.0 / n as f64);
    let mut estimate: f64 = 0.0;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place_with_conj(faer::Conj::No, y.as_mut());
        estimate = (0..n).map(|i| y[(i, 0)].abs()).sum();
        let mut z = Mat::<f64>::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        lu.solve_in_place_with_conj(faer::Conj::No, z.as_mut());
        let (jmax, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx {
            break;
        }
        x = Mat::<f64>::from_fn(n, 1, |i, _| if i == jmax { 1.0 } else { 0.0 });
    }
    norm_a * estimate
}

/// Largest principal angle between the column spans of `a` and `b`.
pub fn subspace_angle(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    // sin of the largest angle is the norm of the part of `qb` outside `qa`
    let residual = &qb - &qa * (qa.adjoint() * &qb);
    let sv = residual.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let smax = sv.iter().copied().fold(0.0, f64::max).min(1.0);
    Ok(smax.asin())
}

/// Gram-Schmidt with re-orthogonalization.
pub fn orthonormalize(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let (n, k) = (a.nrows(), a.ncols());
    let mut q = Mat::<c64>::zeros(n, k);
    for j in 0..k {
        let mut v: Vec<c64> = (0..n).map(|i| a[(i, j)]).collect();
        for _ in 0..2 {
            for p in 0..j {
                let dot: c64 = (0..n).map(|i| q[(i, p)].conj() * v[i]).sum();
                for i in 0..n {
                    v[i] -= dot * q[(i, p)];
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        for i in 0..n {
            q[(i, j)] = v[i] / norm;
        }
    }
    Ok(q)
}

pub fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Inner product `a^H b`.
pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Scale so the largest entry has modulus one and is positive real.
pub fn normalize_max(v: &mut [c64]) -> Result<()> {
    let (k, m) = v
        .iter()
        .enumerate()
        .map(|(k, x)| (k, x.norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::ZeroVector)?;
    if m == 0.0 {
        return Err(Error::ZeroVector);
    }
    let phase = v[k].conj() / (m * m);
    for x in v.iter_mut() {
        *x *= phase;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_of_diagonal() {
        let a = Mat::<f64>::from_fn(4, 4, |i, j| if i == j { [1.0, 2.0, 5.0, 100.0][i] } else { 0.0 });
        let lu = a.partial_piv_lu();
        let c = condition_estimate_symmetric(a.as_ref(), &lu);
        assert!((c - 100.0).abs() < 1e-10);
    }

    #[test]
    fn angle_between_equal_spans() {
        let a = Mat::<c64>::from_fn(4, 2, |i, j| c64::new((i + j) as f64, (i * j) as f64 + 1.0));
        let b = Mat::<c64>::from_fn(4, 2, |i, j| a[(i, 0)] * c64::new(1.0, j as f64) + a[(i, 1)] * (2.0 - j as f64));
        assert!(subspace_angle(a.as_ref(), b.as_ref()).unwrap() < 1e-7);
    }

    #[test]
    fn normalization_convention() {
        let mut v = vec![c64::new(0.0, 0.5), c64::new(0.0, -2.0)];
        normalize_max(&mut v).unwrap();
        assert!((v[1] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[0] - c64::new(-0.25, 0.0)).norm() < 1e-15);
        assert!(normalize_max(&mut [c64::new(0.0, 0.0)]).is_err());
    }
}
