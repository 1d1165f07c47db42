//! Quadratic Galerkin surrogate of the closed-loop Navier–Stokes system.
//!
//! This is a finite-dimensional model, not a flow solver: the state is
//! expanded in the unstable modes (carrying their feedback lifts) plus a few
//! leading stable modes, and the convection term is projected onto the
//! matching adjoint modes. Triads leaving the retained wavenumber set, and
//! the mean mode `m = 0`, are dropped.
//!
//! The convection integrand is a cubic in degree-`M` polynomials, so the
//! integrals are evaluated on a `3M`-interval Clenshaw–Curtis rule, which is
//! exact for it.

use crate::channel::{Field, ModeProfile};
use crate::controller::FeedbackLaw;
use crate::lift::LiftedSet;
use crate::linalg::{self, czero, CMat, RMat};
use crate::sim::{fit_decay_rate, InitialState, ModalSystem};
use crate::spectral::{build_grid, SpectralGrid};
use crate::spectrum::Spectrum;
use crate::{Error, Result, C64};
use ode_solvers::{DVector, Dopri5, System};
use serde::Serialize;

struct Derivs {
    m: i32,
    u: Vec<C64>,
    v: Vec<C64>,
    du: Vec<C64>,
    dv: Vec<C64>,
}

/// Over-integration rule: interpolation onto `3M` intervals and the
/// matching quadrature weights.
struct FineRule {
    interp: RMat,
    weights: Vec<f64>,
}

impl FineRule {
    fn new(grid: &SpectralGrid) -> Result<Self> {
        let fine = build_grid(3 * grid.m())?;
        Ok(FineRule {
            interp: grid.interpolation_matrix(fine.nodes())?,
            weights: fine.quad_weights().to_vec(),
        })
    }

    fn map(&self, v: &[C64]) -> Vec<C64> {
        linalg::rmatvec(&self.interp, v)
    }

    fn derivs(&self, grid: &SpectralGrid, f: &Field) -> Vec<Derivs> {
        f.modes()
            .iter()
            .filter(|p| p.m != 0)
            .map(|p| Derivs {
                m: p.m,
                u: self.map(&p.u),
                v: self.map(&p.v),
                du: self.map(&grid.apply(1, &p.u)),
                dv: self.map(&grid.apply(1, &p.v)),
            })
            .collect()
    }

    fn test_field(&self, f: &Field) -> Vec<ModeProfile> {
        f.modes()
            .iter()
            .map(|p| ModeProfile {
                m: p.m,
                u: self.map(&p.u),
                v: self.map(&p.v),
            })
            .collect()
    }
}

fn convection_d(w: &[f64], f: &[Derivs], g: &[Derivs], h: &[ModeProfile]) -> C64 {
    let mut acc = czero();
    for p in f {
        for q in g {
            let Some(hm) = h.iter().find(|x| x.m == p.m + q.m) else { continue };
            let iq = C64::new(0.0, q.m as f64);
            for i in 0..w.len() {
                let cu = p.u[i] * iq * q.u[i] + p.v[i] * q.du[i];
                let cv = p.u[i] * iq * q.v[i] + p.v[i] * q.dv[i];
                acc += (cu * hm.u[i].conj() + cv * hm.v[i].conj()) * w[i];
            }
        }
    }
    acc
}

/// `⟨(f·∇)g, h⟩` for Fourier-mode fields, mean modes excluded.
pub fn convection(grid: &SpectralGrid, f: &Field, g: &Field, h: &Field) -> Result<C64> {
    let rule = FineRule::new(grid)?;
    Ok(convection_d(
        &rule.weights,
        &rule.derivs(grid, f),
        &rule.derivs(grid, g),
        &rule.test_field(h),
    ))
}

#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    /// Indices into `spectrum.modes`: the unstable modes then the selected
    /// stable ones.
    pub modes: Vec<usize>,
    pub n_unstable: usize,
    pub lambdas: Vec<C64>,
    /// `ζ_u′ = −J(Λ_u ζ_u + N_u)` with `J = (I + KS)⁻¹`.
    pub j_unstable: CMat,
    pub s_map: CMat,
    /// `C_sa` restricted to the selected stable modes.
    pub c_stable: CMat,
    /// `⟨D g_a, φ*_b⟩` for the selected modes `b`.
    pub lift_pairing: CMat,
    /// `T[b][a][c] = ⟨(Φ_a·∇)Φ_c, φ*_b⟩`.
    pub tensor: Vec<C64>,
    /// Nonzero entries `(b, a, c, T_bac)`: wavenumbers must satisfy
    /// `m_a + m_c = m_b`.
    triads: Vec<(usize, usize, usize, C64)>,
    pub norm_factor: CMat,
    pub gamma0: f64,
}

impl GalerkinSystem {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Quadratic term `N_b = Σ_{a,c} T_bac w_a w_c`.
    pub fn quadratic(&self, w: &[C64]) -> Vec<C64> {
        let mut out = vec![czero(); self.dim()];
        for &(b, a, c, t) in &self.triads {
            out[b] += t * w[a] * w[c];
        }
        out
    }

    fn rhs(&self, w: &[C64], nonlinear: bool) -> Vec<C64> {
        let n = self.dim();
        let nu = self.n_unstable;
        let nl = if nonlinear { self.quadratic(w) } else { vec![czero(); n] };
        let fu: Vec<C64> = (0..nu).map(|j| self.lambdas[j] * w[j] + nl[j]).collect();
        let du: Vec<C64> = linalg::matvec(&self.j_unstable, &fu).iter().map(|z| -z).collect();
        let ds_force = linalg::matvec(&(&self.c_stable * &self.s_map), &du);
        let mut out = du.clone();
        for s in nu..n {
            out.push(-self.lambdas[s] * w[s] - nl[s] - ds_force[s - nu]);
        }
        out
    }

    /// Coordinates `⟨Y, φ*_b⟩` over the selected modes.
    pub fn coordinates(&self, w: &[C64]) -> Vec<C64> {
        let s = linalg::matvec(&self.s_map, &w[..self.n_unstable]);
        let ls = linalg::matvec(&self.lift_pairing, &s);
        w.iter().zip(&ls).map(|(a, b)| a + b).collect()
    }

    pub fn norm(&self, w: &[C64]) -> f64 {
        linalg::vec_norm(&linalg::matvec(&self.norm_factor, &self.coordinates(w)))
    }

    /// Initial `w` from coordinates `c` of `y0` over the selected modes.
    pub fn initial(&self, c: &[C64], k_expected: &CMat) -> Result<Vec<C64>> {
        let nu = self.n_unstable;
        let ks = k_expected * &self.s_map;
        let m = CMat::from_fn(nu, nu, |i, j| ks[(i, j)] + if i == j { C64::new(1.0, 0.0) } else { czero() });
        let zu = linalg::solve_vec(&m, &c[..nu], "initial fixed point")?;
        let s0 = linalg::matvec(&self.s_map, &zu);
        let cs = linalg::matvec(&self.c_stable, &s0);
        let mut w = zu;
        for (k, ck) in c[nu..].iter().enumerate() {
            w.push(ck - cs[k]);
        }
        Ok(w)
    }
}

/// Select the unstable modes plus the `n_stable` least-stable modes (whole
/// conjugate pairs) and precompute the projected convection tensor.
pub fn build_galerkin(
    spectrum: &Spectrum,
    law: &FeedbackLaw,
    lifts: &LiftedSet,
    sys: &ModalSystem,
    n_stable: usize,
) -> Result<GalerkinSystem> {
    let grid = &spectrum.grid;
    let n = spectrum.n_unstable;
    let mut modes: Vec<usize> = (0..n).collect();
    let mut k = n;
    while k < spectrum.modes.len() && modes.len() < n + n_stable {
        modes.push(k);
        let p = spectrum.modes[k].partner;
        if p != k && !modes.contains(&p) {
            modes.push(p);
        }
        k += 1;
        while k < spectrum.modes.len() && modes.contains(&k) {
            k += 1;
        }
    }
    let dim = modes.len();
    // Φ_u = φ_u + Σ_a S_au D g_a ; Φ_s = φ_s
    let mut phi: Vec<Field> = Vec::with_capacity(dim);
    for (idx, &j) in modes.iter().enumerate() {
        let mut f = Field::from_modes(vec![spectrum.modes[j].direct.clone()]);
        if idx < n {
            for (a, g) in lifts.fields.iter().enumerate() {
                f.axpy(sys.s_map[(a, idx)], g);
            }
        }
        phi.push(f);
    }
    let adj: Vec<Field> = modes
        .iter()
        .map(|&j| Field::from_modes(vec![spectrum.modes[j].adjoint.clone()]))
        .collect();
    let rule = FineRule::new(grid)?;
    let d: Vec<Vec<Derivs>> = phi.iter().map(|f| rule.derivs(grid, f)).collect();
    let adj: Vec<Vec<ModeProfile>> = adj.iter().map(|f| rule.test_field(f)).collect();
    let mut tensor = vec![czero(); dim * dim * dim];
    for b in 0..dim {
        for a in 0..dim {
            for c in 0..dim {
                tensor[(b * dim + a) * dim + c] = convection_d(&rule.weights, &d[a], &d[c], &adj[b]);
            }
        }
    }
    let triads = (0..dim * dim * dim)
        .filter(|&i| tensor[i] != czero())
        .map(|i| (i / (dim * dim), (i / dim) % dim, i % dim, tensor[i]))
        .collect();
    let ng = lifts.fields.len();
    let sel_stable: Vec<usize> = modes[n..].iter().map(|&j| j - n).collect();
    let c_stable = CMat::from_fn(dim - n, ng, |s, a| sys.c_stable[(sel_stable[s], a)]);
    let nm = spectrum.modes.len();
    let lift_pairing = CMat::from_fn(dim, ng, |b, a| sys.adjoint_pairing[(modes[b], nm + a)]);
    let ks = &law.expected_pairing * &sys.s_map;
    let iks = CMat::from_fn(n, n, |i, j| ks[(i, j)] + if i == j { C64::new(1.0, 0.0) } else { czero() });
    let j_unstable = linalg::inverse(&iks, "closed-loop mass matrix")?;
    let ms = spectrum.flow.wavenumbers();
    let len = grid.len();
    let w = grid.quad_weights();
    let samples = CMat::from_fn(2 * len * ms.len(), dim, |r, c| {
        let mode: &ModeProfile = &spectrum.modes[modes[c]].direct;
        if ms[r / (2 * len)] != mode.m {
            return czero();
        }
        let i = r % len;
        let f = if (r / len) % 2 == 0 { &mode.u } else { &mode.v };
        f[i] * w[i].sqrt()
    });
    Ok(GalerkinSystem {
        lambdas: modes.iter().map(|&j| spectrum.modes[j].lambda).collect(),
        modes,
        n_unstable: n,
        j_unstable,
        s_map: sys.s_map.clone(),
        c_stable,
        lift_pairing,
        tensor,
        triads,
        norm_factor: linalg::thin_r(&samples),
        gamma0: sys.gamma0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Decayed,
    Diverged,
    NotDecayed,
}

#[derive(Debug, Clone, Serialize)]
pub struct GalerkinRun {
    pub times: Vec<f64>,
    pub state_norm: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<Vec<C64>>,
    pub outcome: Outcome,
    pub gamma_fit: Option<f64>,
    pub steps: usize,
}

struct Ode<'a> {
    sys: &'a GalerkinSystem,
    nonlinear: bool,
    limit: f64,
    diverged: bool,
}

fn unpack(y: &DVector<f64>) -> Vec<C64> {
    let n = y.len() / 2;
    (0..n).map(|i| C64::new(y[2 * i], y[2 * i + 1])).collect()
}

impl System<f64, DVector<f64>> for Ode<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let d = self.sys.rhs(&unpack(y), self.nonlinear);
        for (i, z) in d.iter().enumerate() {
            dy[2 * i] = z.re;
            dy[2 * i + 1] = z.im;
        }
    }

    fn solout(&mut self, _t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        let w = unpack(y);
        let nrm = self.sys.norm(&w);
        if !nrm.is_finite() || nrm > self.limit {
            self.diverged = true;
            return true;
        }
        false
    }
}

/// Integrate the surrogate from modal state `w0` with Dormand–Prince 5(4)
/// (relative tolerance 1e−9) and dense output every `dt`.
pub fn simulate_nonlinear_galerkin(
    sys: &GalerkinSystem,
    w0: &[C64],
    t_end: f64,
    dt: f64,
    nonlinear: bool,
) -> Result<GalerkinRun> {
    let n0 = sys.norm(w0);
    let n_samples = (t_end / dt).round() as usize;
    if n0 == 0.0 {
        return Ok(GalerkinRun {
            times: (0..=n_samples).map(|i| i as f64 * dt).collect(),
            state_norm: vec![0.0; n_samples + 1],
            states: vec![w0.to_vec(); n_samples + 1],
            outcome: Outcome::Decayed,
            gamma_fit: None,
            steps: 0,
        });
    }
    let y0 = DVector::from_iterator(2 * w0.len(), w0.iter().flat_map(|z| [z.re, z.im]));
    let atol = 1e-12 * n0;
    let ode = Ode {
        sys,
        nonlinear,
        limit: 1e6 * n0,
        diverged: false,
    };
    // ode_solvers extrapolates its forced endpoint sample from the step
    // before the end; stopping half a sample late keeps every output
    // interpolated.
    let mut solver = Dopri5::new(ode, 0.0, t_end + 0.5 * dt, dt, y0, 1e-9, atol);
    // step-size underflow or step-count exhaustion both signal blow-up
    let steps = match solver.integrate() {
        Ok(stats) => stats.accepted_steps as usize,
        Err(_) => usize::MAX,
    };
    let keep = solver.x_out().iter().take_while(|t| **t <= t_end + 1e-9 * dt).count();
    let times = solver.x_out()[..keep].to_vec();
    let states: Vec<Vec<C64>> = solver.y_out()[..keep].iter().map(unpack).collect();
    let state_norm: Vec<f64> = states.iter().map(|w| sys.norm(w)).collect();
    let diverged = steps == usize::MAX
        || state_norm.iter().any(|v| !v.is_finite() || *v > 1e6 * n0)
        || times.last().is_none_or(|t| *t < t_end - 0.5 * dt);
    let gamma_fit = if diverged {
        None
    } else {
        fit_decay_rate(&times, &state_norm, 0.5).ok()
    };
    let outcome = if diverged {
        Outcome::Diverged
    } else if gamma_fit.is_some_and(|g| g >= 0.8 * sys.gamma0) && state_norm[state_norm.len() - 1] < n0 {
        Outcome::Decayed
    } else {
        Outcome::NotDecayed
    };
    Ok(GalerkinRun {
        times,
        state_norm,
        states,
        outcome,
        gamma_fit,
        steps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusReport {
    /// Largest amplitude found to decay at rate ≥ 0.8 γ₀.
    pub rho_star: f64,
    pub rate_at_rho: Option<f64>,
    /// An amplitude ≥ 10 ρ* that did not decay, if one was found.
    pub failing_amplitude: Option<f64>,
    pub failing_outcome: Option<Outcome>,
    pub trials: Vec<(f64, Outcome)>,
}

/// Direction in the selected coordinates, normalized so that `‖P Y(0)‖ = 1`.
pub fn direction(sys: &GalerkinSystem, init: &InitialState) -> Vec<C64> {
    let n = sys.n_unstable;
    let mut c: Vec<C64> = init.unstable.clone();
    for &j in &sys.modes[n..] {
        c.push(init.stable[j - n]);
    }
    let nrm = linalg::vec_norm(&linalg::matvec(&sys.norm_factor, &c));
    c.iter().map(|z| z / nrm).collect()
}

/// Bracket and bisect (geometrically) the largest decaying amplitude along
/// `dir`, then look for a failing amplitude at `10ρ*` and beyond.
pub fn stability_radius(
    sys: &GalerkinSystem,
    k_expected: &CMat,
    dir: &[C64],
    t_end: f64,
    dt: f64,
) -> Result<RadiusReport> {
    let mut trials = Vec::new();
    let run = |amp: f64, trials: &mut Vec<(f64, Outcome)>| -> Result<GalerkinRun> {
        let c: Vec<C64> = dir.iter().map(|z| z * amp).collect();
        let w0 = sys.initial(&c, k_expected)?;
        let r = simulate_nonlinear_galerkin(sys, &w0, t_end, dt, true)?;
        trials.push((amp, r.outcome));
        Ok(r)
    };
    let mut lo = 1e-6;
    if run(lo, &mut trials)?.outcome != Outcome::Decayed {
        return Err(Error::Verification("smallest amplitude does not decay".into()));
    }
    let mut hi = None;
    let mut amp = lo;
    while amp < 1e8 {
        amp *= 10.0;
        if run(amp, &mut trials)?.outcome == Outcome::Decayed {
            lo = amp;
        } else {
            hi = Some(amp);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(RadiusReport {
            rho_star: lo,
            rate_at_rho: None,
            failing_amplitude: None,
            failing_outcome: None,
            trials,
        });
    };
    while hi / lo > 1.02 {
        let mid = (lo * hi).sqrt();
        if run(mid, &mut trials)?.outcome == Outcome::Decayed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = run(lo, &mut trials)?.gamma_fit;
    let mut failing = None;
    for f in [10.0, 20.0, 50.0, 100.0, 1000.0] {
        let r = run(f * lo, &mut trials)?;
        if r.outcome != Outcome::Decayed {
            failing = Some((f * lo, r.outcome));
            break;
        }
    }
    Ok(RadiusReport {
        rho_star: lo,
        rate_at_rho: rate,
        failing_amplitude: failing.map(|f| f.0),
        failing_outcome: failing.map(|f| f.1),
        trials,
    })
}

/// Largest deviation `‖P(Y_ε − Y_lin)‖` over the run for amplitude `eps`.
pub fn linear_deviation(sys: &GalerkinSystem, k_expected: &CMat, dir: &[C64], eps: f64, t_end: f64, dt: f64) -> Result<f64> {
    let c: Vec<C64> = dir.iter().map(|z| z * eps).collect();
    let w0 = sys.initial(&c, k_expected)?;
    let nl = simulate_nonlinear_galerkin(sys, &w0, t_end, dt, true)?;
    let lin = simulate_nonlinear_galerkin(sys, &w0, t_end, dt, false)?;
    let mut dev: f64 = 0.0;
    for (a, b) in nl.states.iter().zip(&lin.states) {
        let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        dev = dev.max(sys.norm(&d));
    }
    Ok(dev)
}

/// `deviation(2ε)/deviation(ε)`, close to 4 when the nonlinear correction is
/// quadratic in the amplitude.
pub fn richardson_ratio(sys: &GalerkinSystem, k_expected: &CMat, dir: &[C64], eps: f64, t_end: f64, dt: f64) -> Result<f64> {
    let d1 = linear_deviation(sys, k_expected, dir, eps, t_end, dt)?;
    let d2 = linear_deviation(sys, k_expected, dir, 2.0 * eps, t_end, dt)?;
    Ok(d2 / d1)
}

/// `|⟨(z·∇)z, z⟩|` for a random real unit-energy combination of retained
/// eigenmodes (homogeneous boundary data).
pub fn energy_neutrality(spectrum: &Spectrum, seed: u64) -> Result<f64> {
    let init = crate::sim::random_initial(spectrum, seed, 1.0)?;
    let mut c = init.unstable.clone();
    c.extend(init.stable.iter().copied());
    let z = crate::sim::modal_field(spectrum, &c);
    let nrm = z.norm(&spectrum.grid);
    let z = z.scaled(C64::new(1.0 / nrm, 0.0));
    Ok(convection(&spectrum.grid, &z, &z, &z)?.norm())
}
