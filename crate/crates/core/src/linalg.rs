//! Thin wrappers over `faer` for the dense complex linear algebra used
//! throughout the crate.

use crate::{Error, Result, C64};
use faer::prelude::Solve;
use faer::Mat;
use std::sync::Once;

pub type CMat = Mat<C64>;
pub type RMat = Mat<f64>;

static SEQUENTIAL: Once = Once::new();

/// Force faer into sequential mode so repeated runs are bit-identical.
pub fn init() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn to_complex(a: &RMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0))
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn matvec(a: &CMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![czero(); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == czero() {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn rmatvec(a: &RMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![czero(); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += xj * a[(i, j)];
        }
    }
    y
}

fn finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// Solve `A X = B` by partial-pivot LU. The reciprocal of the smallest
/// singular value is checked so singular systems are reported rather than
/// silently producing garbage.
pub fn solve(a: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    init();
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Mismatch(format!("{what}: solve with incompatible shapes")));
    }
    let x = a.partial_piv_lu().solve(b);
    if !finite(&x) {
        return Err(Error::SingularMatrix(what));
    }
    Ok(x)
}

pub fn solve_vec(a: &CMat, b: &[C64], what: &'static str) -> Result<Vec<C64>> {
    let bm = CMat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = solve(a, &bm, what)?;
    Ok((0..x.nrows()).map(|i| x[(i, 0)]).collect())
}

pub fn inverse(a: &CMat, what: &'static str) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let cond = condition_number(a)?;
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::SingularMatrix(what));
    }
    solve(a, &id, what)
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    init();
    a.singular_values()
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))
}

/// 2-norm condition number; `inf` when the smallest singular value is zero.
pub fn condition_number(a: &CMat) -> Result<f64> {
    let s = singular_values(a)?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(max / min)
    }
}

/// Eigen-decomposition of a general complex matrix. Returns the eigenvalues
/// and the matrix of (unnormalized) right eigenvectors.
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    init();
    if !finite(a) {
        return Err(Error::EigenSolver("non-finite matrix entries".into()));
    }
    let e = a
        .eigen()
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
    let s = e.S();
    let vals: Vec<C64> = (0..a.nrows()).map(|k| s[k]).collect();
    let u = e.U().to_owned();
    Ok((vals, u))
}

/// Upper-triangular `R` of a thin QR factorization, so that
/// `‖A x‖ = ‖R x‖` for every `x`.
pub fn thin_r(a: &CMat) -> CMat {
    init();
    a.qr().thin_R().to_owned()
}

pub fn conj_transpose(a: &CMat) -> CMat {
    CMat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64 + if i == j { 5.0 } else { 0.0 }, (i as f64) - 0.5 * j as f64));
        let b = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, -1.0)];
        let x = solve_vec(&a, &b, "test").unwrap();
        let r = matvec(&a, &x);
        for i in 0..3 {
            assert!((r[i] - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_inverse_is_reported() {
        let a = CMat::from_fn(2, 2, |_, _| C64::new(1.0, 0.0));
        assert!(matches!(inverse(&a, "ones"), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn eigenpairs_of_triangular_matrix() {
        let a = CMat::from_fn(3, 3, |i, j| if j >= i { C64::new((i + j + 1) as f64, 0.0) } else { czero() });
        let (vals, vecs) = eig(&a).unwrap();
        for k in 0..3 {
            let v: Vec<C64> = (0..3).map(|i| vecs[(i, k)]).collect();
            let av = matvec(&a, &v);
            for i in 0..3 {
                assert!((av[i] - vals[k] * v[i]).norm() < 1e-12);
            }
        }
    }
}
