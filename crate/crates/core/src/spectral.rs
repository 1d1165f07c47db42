//! Chebyshev collocation on the wall-normal interval `[0, 1]`.

use crate::linalg::{czero, to_complex, CMat, RMat};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

/// Chebyshev–Gauss–Lobatto grid on `[0, 1]` with differentiation matrices up
/// to fourth order and Clenshaw–Curtis weights.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    m: usize,
    nodes: Vec<f64>,
    d: [RMat; 4],
    quad_weights: Vec<f64>,
    clamped: ClampedBasis,
}

/// Basis recombination imposing `v = v' = 0` at both walls.
///
/// The unknowns are the nodal values at nodes `2..=M-2`; the values at nodes
/// `1` and `M-1` are fixed by interpolating `v / w` with `w = y²(1-y)²`, and
/// the wall values are zero. `lift` maps reduced coordinates to nodal values.
#[derive(Debug, Clone)]
pub struct ClampedBasis {
    lift: RMat,
    interior: Vec<usize>,
}

/// Generalized eigenproblem `A c = λ B c` on the clamped subspace.
#[derive(Debug, Clone)]
pub struct ReducedPencil {
    pub a: CMat,
    pub b: CMat,
}

/// Differentiation matrices for `x_j = cos(πj/N)` on `[-1, 1]`, orders
/// `1..=order`, via the roundoff-stable recursion of Weideman and Reddy.
fn chebdif(n: usize, order: usize) -> Vec<RMat> {
    let np = n + 1;
    let th: Vec<f64> = (0..np).map(|k| k as f64 * PI / n as f64).collect();
    // x_j - x_k through the product-to-sum identity, with the flip trick
    // for the lower half so the differences are antisymmetric to the bit.
    let mut dx = RMat::zeros(np, np);
    let half = np / 2;
    for j in 0..np {
        for k in 0..np {
            dx[(j, k)] = 2.0 * ((th[k] + th[j]) / 2.0).sin() * ((th[k] - th[j]) / 2.0).sin();
        }
    }
    for j in half..np {
        for k in 0..np {
            dx[(j, k)] = -dx[(n - j, n - k)];
        }
    }
    let c: Vec<f64> = (0..np)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                2.0 * s
            } else {
                s
            }
        })
        .collect();
    let mut z = RMat::zeros(np, np);
    for j in 0..np {
        for k in 0..np {
            if j != k {
                z[(j, k)] = 1.0 / dx[(j, k)];
            }
        }
    }
    let mut d = RMat::identity(np, np);
    let mut out = Vec::with_capacity(order);
    for ell in 1..=order {
        let mut next = RMat::zeros(np, np);
        for j in 0..np {
            let djj = d[(j, j)];
            let mut row = 0.0;
            for k in 0..np {
                if j != k {
                    let v = ell as f64 * z[(j, k)] * (c[j] / c[k] * djj - d[(j, k)]);
                    next[(j, k)] = v;
                    row += v;
                }
            }
            next[(j, j)] = -row;
        }
        d = next;
        out.push(d.clone());
    }
    out
}

/// Clenshaw–Curtis weights for `x_j = cos(πj/N)` on `[-1, 1]` (N even).
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    w[0] = 1.0 / (nf * nf - 1.0);
    w[n] = w[0];
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        let th = j as f64 * PI / nf;
        let mut v = 1.0;
        for k in 1..n / 2 {
            let kf = k as f64;
            v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
        }
        v -= (nf * th).cos() / (nf * nf - 1.0);
        *wj = 2.0 * v / nf;
    }
    w
}

/// Build the grid for `M` intervals (`M + 1` nodes).
pub fn build_grid(m: usize) -> Result<SpectralGrid> {
    if m < 8 || m % 2 != 0 {
        return Err(Error::InvalidResolution(m));
    }
    // y = (1 - x)/2 = sin²(πj/2M): ascending, exact endpoints.
    let nodes: Vec<f64> = (0..=m)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == m {
                1.0
            } else {
                let s = (PI * j as f64 / (2.0 * m as f64)).sin();
                s * s
            }
        })
        .collect();
    let dx = chebdif(m, 4);
    let mut d: [RMat; 4] = std::array::from_fn(|_| RMat::zeros(0, 0));
    for (p, dp) in dx.into_iter().enumerate() {
        let scale = (-2.0f64).powi(p as i32 + 1);
        d[p] = RMat::from_fn(m + 1, m + 1, |i, j| scale * dp[(i, j)]);
    }
    let quad_weights = clenshaw_curtis(m).into_iter().map(|w| 0.5 * w).collect();
    let clamped = ClampedBasis::new(&nodes);
    Ok(SpectralGrid {
        m,
        nodes,
        d,
        quad_weights,
        clamped,
    })
}

impl SpectralGrid {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Differentiation matrix of order `p` in `1..=4`.
    pub fn diff(&self, p: usize) -> &RMat {
        assert!((1..=4).contains(&p), "derivative order {p} not available");
        &self.d[p - 1]
    }

    pub fn d1(&self) -> &RMat {
        &self.d[0]
    }

    pub fn d2(&self) -> &RMat {
        &self.d[1]
    }

    pub fn d4(&self) -> &RMat {
        &self.d[3]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn clamped(&self) -> &ClampedBasis {
        &self.clamped
    }

    /// Apply `D_p` to complex nodal values.
    pub fn apply(&self, p: usize, v: &[C64]) -> Vec<C64> {
        let d = self.diff(p);
        let n = self.len();
        assert_eq!(v.len(), n);
        let mut out = vec![czero(); n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = czero();
            for (j, vj) in v.iter().enumerate() {
                acc += vj * d[(i, j)];
            }
            *o = acc;
        }
        out
    }

    pub fn apply_real(&self, p: usize, v: &[f64]) -> Vec<f64> {
        let d = self.diff(p);
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| d[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.quad_weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_complex(&self, f: &[C64]) -> C64 {
        self.quad_weights.iter().zip(f).map(|(w, v)| v * *w).sum()
    }

    /// Barycentric interpolation of nodal values at an arbitrary `y`.
    pub fn interpolate(&self, v: &[C64], y: f64) -> Result<C64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain(y));
        }
        let n = self.m;
        let mut num = czero();
        let mut den = 0.0;
        for j in 0..=n {
            let diff = y - self.nodes[j];
            if diff == 0.0 {
                return Ok(v[j]);
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let t = w / diff;
            num += v[j] * t;
            den += t;
        }
        Ok(num / den)
    }

    /// Matrix `I` with `(I v)_i` the interpolant of `v` at `ys[i]`.
    pub fn interpolation_matrix(&self, ys: &[f64]) -> Result<RMat> {
        let n = self.m;
        let mut out = RMat::zeros(ys.len(), n + 1);
        for (i, &y) in ys.iter().enumerate() {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::OutOfDomain(y));
            }
            if let Some(j) = self.nodes.iter().position(|&x| x == y) {
                out[(i, j)] = 1.0;
                continue;
            }
            let mut den = 0.0;
            for j in 0..=n {
                let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    w *= 0.5;
                }
                let t = w / (y - self.nodes[j]);
                out[(i, j)] = t;
                den += t;
            }
            for j in 0..=n {
                out[(i, j)] /= den;
            }
        }
        Ok(out)
    }
}

impl ClampedBasis {
    fn new(y: &[f64]) -> Self {
        let m = y.len() - 1;
        let interior: Vec<usize> = (2..=m - 2).collect();
        let w = |t: f64| t * t * (1.0 - t) * (1.0 - t);
        let mut lift = RMat::zeros(m + 1, interior.len());
        for (c, &j) in interior.iter().enumerate() {
            lift[(j, c)] = 1.0;
        }
        for &i in &[1, m - 1] {
            for (c, &j) in interior.iter().enumerate() {
                let mut l = 1.0;
                for &k in &interior {
                    if k != j {
                        l *= (y[i] - y[k]) / (y[j] - y[k]);
                    }
                }
                lift[(i, c)] = w(y[i]) / w(y[j]) * l;
            }
        }
        assert!(
            (0..lift.nrows()).all(|i| (0..lift.ncols()).all(|j| lift[(i, j)].is_finite())),
            "singular clamped recombination"
        );
        ClampedBasis { lift, interior }
    }

    /// Number of reduced unknowns, `M - 3`.
    pub fn dim(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn lift_matrix(&self) -> &RMat {
        &self.lift
    }

    /// Reduced coordinates to full nodal values.
    pub fn lift(&self, c: &[C64]) -> Vec<C64> {
        crate::linalg::rmatvec(&self.lift, c)
    }

    /// Nodal values to reduced coordinates (exact for functions in the span).
    pub fn restrict(&self, v: &[C64]) -> Vec<C64> {
        self.interior.iter().map(|&i| v[i]).collect()
    }
}

/// Restrict `A v = λ B v` on nodal values to the clamped subspace: the
/// collocation equations are kept at the interior nodes `2..=M-2` and the
/// unknowns are recombined through [`ClampedBasis::lift`].
pub fn clamp_fourth_order(grid: &SpectralGrid, a: &CMat, b: &CMat) -> Result<ReducedPencil> {
    let n = grid.len();
    if a.nrows() != n || a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Mismatch(format!(
            "pencil blocks must be {n}x{n}, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let basis = grid.clamped();
    let p = to_complex(basis.lift_matrix());
    let rows = basis.interior();
    let sel = |mat: &CMat| CMat::from_fn(rows.len(), n, |i, j| mat[(rows[i], j)]);
    Ok(ReducedPencil {
        a: &sel(a) * &p,
        b: &sel(b) * &p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_resolution() {
        assert!(matches!(build_grid(6), Err(Error::InvalidResolution(6))));
        assert!(matches!(build_grid(9), Err(Error::InvalidResolution(9))));
    }

    #[test]
    fn endpoints_and_monotone_nodes() {
        let g = build_grid(8).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[8], 1.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn first_derivative_of_square() {
        let g = build_grid(16).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|y| y * y).collect();
        let df = g.apply_real(1, &f);
        // node 8 of 16 is y = 1/2
        assert!((g.nodes()[8] - 0.5).abs() < 1e-15);
        assert!((df[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_of_cube() {
        let g = build_grid(16).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|y| y.powi(3)).collect();
        assert!((g.integrate(&f) - 0.25).abs() < 1e-12);
        assert!(g.quad_weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn reduced_dimension() {
        let g = build_grid(24).unwrap();
        assert_eq!(g.clamped().dim(), 21);
    }

    #[test]
    fn interpolation_reproduces_polynomial() {
        let g = build_grid(16).unwrap();
        let v: Vec<C64> = g.nodes().iter().map(|y| C64::new(y.powi(5) - y, 0.0)).collect();
        let y = 0.3141;
        let z = g.interpolate(&v, y).unwrap();
        assert!((z.re - (y.powi(5) - y)).abs() < 1e-13);
        assert!(g.interpolate(&v, 1.5).is_err());
    }
}
