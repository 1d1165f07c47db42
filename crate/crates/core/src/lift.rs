//! The shifted Dirichlet map: given boundary velocity `g`, solve
//! `(A + k) y = 0` in the channel with `y = g` on the walls.
//!
//! For `m ≠ 0` the pressure is eliminated through the stream-mode variable,
//! giving `(A_m + k B_m) ψ = 0` with `ψ = v_b` and `ψ′ = −im u_b` at the
//! walls. The mean mode `m = 0` is a uniform vertical through-flow `v ≡ v_b`
//! with `−ν u″ + k u = −U′ v_b`.

use crate::channel::{BoundaryField, BoundaryMode, ChannelFlow, Field, ModeProfile};
use crate::linalg::{self, czero, CMat};
use crate::spectral::SpectralGrid;
use crate::spectrum::{assemble_orr_sommerfeld, Spectrum};
use crate::{Error, Result, C64};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct LiftedField {
    pub m: i32,
    pub k_shift: f64,
    pub profile: ModeProfile,
    pub boundary: BoundaryMode,
    /// Componentwise backward error of the interior equations.
    pub residual: f64,
}

fn bordered_solve(mut a: CMat, mut rhs: Vec<C64>, k: f64) -> Result<Vec<C64>> {
    // Row equilibration: the fourth-order rows are ~M⁸ larger than the
    // boundary rows and would otherwise swamp them in the factorization.
    for i in 0..a.nrows() {
        let s = (0..a.ncols()).map(|j| a[(i, j)].norm()).fold(0.0, f64::max);
        if s > 0.0 {
            for j in 0..a.ncols() {
                a[(i, j)] /= s;
            }
            rhs[i] /= s;
        }
    }
    let cond = linalg::condition_number(&a)?;
    if !cond.is_finite() || cond > 1e15 {
        return Err(Error::ShiftTooSmall(k));
    }
    linalg::solve_vec(&a, &rhs, "shifted Oseen operator").map_err(|_| Error::ShiftTooSmall(k))
}

fn backward_error(op: &CMat, x: &[C64], rhs: &[C64], rows: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for &i in rows {
        let mut r = -rhs[i];
        let mut s = rhs[i].norm();
        for (j, xj) in x.iter().enumerate() {
            r += op[(i, j)] * xj;
            s += (op[(i, j)] * xj).norm();
        }
        if s > 0.0 {
            worst = worst.max(r.norm() / s);
        }
    }
    worst
}

/// Lift one Fourier component of boundary data.
pub fn solve_dirichlet_mode(
    flow: &ChannelFlow,
    grid: &SpectralGrid,
    k_shift: f64,
    boundary: &BoundaryMode,
) -> Result<LiftedField> {
    if !(k_shift > 0.0 && k_shift.is_finite()) {
        return Err(Error::InvalidParameter(format!("shift k must be positive, got {k_shift}")));
    }
    let n = grid.len();
    let last = grid.m();
    let m = boundary.m;
    if m == 0 {
        return solve_mean_mode(flow, grid, k_shift, boundary);
    }
    let p = assemble_orr_sommerfeld(flow, grid, m)?;
    let op = CMat::from_fn(n, n, |i, j| p.a[(i, j)] + p.b[(i, j)] * k_shift);
    let d1 = grid.d1();
    let mut sys = op.clone();
    let mut rhs = vec![czero(); n];
    let im = C64::new(0.0, -(m as f64));
    // rows 0, 1, M-1, M carry the boundary conditions
    for j in 0..n {
        sys[(0, j)] = C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0);
        sys[(last, j)] = C64::new(if j == last { 1.0 } else { 0.0 }, 0.0);
        sys[(1, j)] = C64::new(d1[(0, j)], 0.0);
        sys[(last - 1, j)] = C64::new(d1[(last, j)], 0.0);
    }
    rhs[0] = boundary.v[0];
    rhs[last] = boundary.v[1];
    rhs[1] = im * boundary.u[0];
    rhs[last - 1] = im * boundary.u[1];
    let psi = bordered_solve(sys, rhs, k_shift)?;
    let interior: Vec<usize> = (2..=last - 2).collect();
    let residual = backward_error(&op, &psi, &vec![czero(); n], &interior);
    let profile = ModeProfile::from_stream(grid, m, psi)?;
    Ok(LiftedField {
        m,
        k_shift,
        profile,
        boundary: *boundary,
        residual,
    })
}

fn solve_mean_mode(
    flow: &ChannelFlow,
    grid: &SpectralGrid,
    k_shift: f64,
    boundary: &BoundaryMode,
) -> Result<LiftedField> {
    let v0 = boundary.v[0];
    let scale = 1.0 + v0.norm().max(boundary.v[1].norm());
    if (boundary.v[0] - boundary.v[1]).norm() > 1e-12 * scale {
        return Err(Error::InvalidParameter(
            "mean-mode boundary data must have equal wall-normal velocity at both walls (zero net flux)".into(),
        ));
    }
    let n = grid.len();
    let last = grid.m();
    let (_, du, _) = flow.sample(grid);
    let d2 = grid.d2();
    let nu = flow.nu();
    let op = CMat::from_fn(n, n, |i, j| {
        C64::new(-nu * d2[(i, j)] + if i == j { k_shift } else { 0.0 }, 0.0)
    });
    let forcing: Vec<C64> = du.iter().map(|d| -v0 * *d).collect();
    let mut sys = op.clone();
    let mut rhs = forcing.clone();
    for j in 0..n {
        sys[(0, j)] = C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0);
        sys[(last, j)] = C64::new(if j == last { 1.0 } else { 0.0 }, 0.0);
    }
    rhs[0] = boundary.u[0];
    rhs[last] = boundary.u[1];
    let u = bordered_solve(sys, rhs, k_shift)?;
    let interior: Vec<usize> = (1..last).collect();
    let residual = backward_error(&op, &u, &forcing, &interior);
    Ok(LiftedField {
        m: 0,
        k_shift,
        profile: ModeProfile {
            m: 0,
            u,
            v: vec![v0; n],
        },
        boundary: *boundary,
        residual,
    })
}

/// Lift every Fourier component of `g` and assemble the field.
pub fn lift_boundary_field(
    flow: &ChannelFlow,
    grid: &SpectralGrid,
    k_shift: f64,
    g: &BoundaryField,
) -> Result<Field> {
    let mut f = Field::new();
    for b in g.modes() {
        if b.u.iter().chain(&b.v).all(|z| *z == czero()) {
            continue;
        }
        let l = solve_dirichlet_mode(flow, grid, k_shift, b)?;
        f.add_scaled(&l.profile, C64::new(1.0, 0.0));
    }
    Ok(f)
}

/// Lifts `D g_a` of a law's boundary fields, all at one shift.
#[derive(Debug, Clone)]
pub struct LiftedSet {
    pub k_shift: f64,
    pub fields: Vec<Field>,
}

/// Lift every boundary field `g_a` of a feedback law at the law's shift.
pub fn lift_law(flow: &ChannelFlow, grid: &SpectralGrid, law: &crate::controller::FeedbackLaw) -> Result<LiftedSet> {
    let k = law.gains.k_shift;
    let fields = law
        .boundary_fields()
        .iter()
        .map(|g| lift_boundary_field(flow, grid, k, g))
        .collect::<Result<_>>()?;
    Ok(LiftedSet { k_shift: k, fields })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    /// `⟨D g_a, φ*_i⟩` (rows `i`, columns `a`), as `[re, im]`.
    pub pairing: Vec<Vec<[f64; 2]>>,
    /// `|⟨D g_a, φ*_i⟩ − K_ia| · |λ_i + k| / ν`.
    pub scaled_residual: Vec<Vec<f64>>,
    pub max_scaled_residual: f64,
}

/// Compare the computed pairings `⟨D g_a, φ*_i⟩` of lifted fields with the
/// expected matrix `expected` (for the complex law `−ν δ_ia/(λ_i + k)`).
pub fn verify_duality(spectrum: &Spectrum, k_shift: f64, lifted: &[Field], expected: &CMat) -> Result<DualityReport> {
    let n = spectrum.n_unstable;
    if expected.nrows() != n || expected.ncols() != lifted.len() {
        return Err(Error::Mismatch("duality matrix shape".into()));
    }
    let nu = spectrum.flow.nu();
    let grid = &spectrum.grid;
    let mut pairing = Vec::with_capacity(n);
    let mut scaled = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for (i, mode) in spectrum.unstable().iter().enumerate() {
        let adj = Field::from_modes(vec![mode.adjoint.clone()]);
        let scale = (mode.lambda + k_shift).norm() / nu;
        let mut prow = Vec::new();
        let mut srow = Vec::new();
        for (a, f) in lifted.iter().enumerate() {
            let z = crate::channel::inner_product(grid, f, &adj)?;
            let r = (z - expected[(i, a)]).norm() * scale;
            worst = worst.max(r);
            prow.push([z.re, z.im]);
            srow.push(r);
        }
        pairing.push(prow);
        scaled.push(srow);
    }
    Ok(DualityReport {
        pairing,
        scaled_residual: scaled,
        max_scaled_residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_grid;

    fn bm(m: i32, u: [C64; 2], v: [C64; 2]) -> BoundaryMode {
        BoundaryMode { m, u, v }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let f = ChannelFlow::new(0.01, 1.0, 2).unwrap();
        let g = build_grid(32).unwrap();
        let l = solve_dirichlet_mode(&f, &g, 10.0, &BoundaryMode::zero(2)).unwrap();
        assert!(l.profile.max_abs() == 0.0);
    }

    #[test]
    fn boundary_values_and_divergence() {
        let f = ChannelFlow::new(0.01, 1.0, 2).unwrap();
        let g = build_grid(48).unwrap();
        let data = bm(
            2,
            [C64::new(0.3, -0.2), C64::new(-1.0, 0.5)],
            [C64::new(0.1, 0.0), C64::new(0.0, 0.7)],
        );
        let l = solve_dirichlet_mode(&f, &g, 20.0, &data).unwrap();
        let p = &l.profile;
        let last = g.m();
        for (w, i) in [(0, 0), (1, last)] {
            assert!((p.u[i] - data.u[w]).norm() < 1e-10, "{} {}", p.u[i], data.u[w]);
            assert!((p.v[i] - data.v[w]).norm() < 1e-10);
        }
        let dv = g.apply(1, &p.v);
        for i in 0..g.len() {
            let div = C64::new(0.0, 2.0) * p.u[i] + dv[i];
            assert!(div.norm() < 1e-10);
        }
        assert!(l.residual < 1e-8);
    }

    #[test]
    fn mean_mode_requires_zero_net_flux() {
        let f = ChannelFlow::new(0.01, 1.0, 1).unwrap();
        let g = build_grid(16).unwrap();
        let bad = bm(0, [czero(); 2], [C64::new(1.0, 0.0), C64::new(0.5, 0.0)]);
        assert!(solve_dirichlet_mode(&f, &g, 5.0, &bad).is_err());
        let ok = bm(0, [czero(); 2], [C64::new(1.0, 0.0); 2]);
        let l = solve_dirichlet_mode(&f, &g, 5.0, &ok).unwrap();
        assert!(l.profile.v.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(l.profile.u[0].norm() < 1e-14 && l.profile.u[g.m()].norm() < 1e-14);
    }

    #[test]
    fn nonpositive_shift_rejected() {
        let f = ChannelFlow::new(0.01, 1.0, 1).unwrap();
        let g = build_grid(16).unwrap();
        assert!(solve_dirichlet_mode(&f, &g, 0.0, &BoundaryMode::zero(1)).is_err());
    }
}
