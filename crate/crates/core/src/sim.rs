//! Modal closed-loop simulation through the substitution `z = Y − Du`.
//!
//! The unstable modal amplitudes of `z` are evaluated in closed form,
//! `ζ_j(t) = ζ_j(0) e^{−ρ_j t}`; each retained stable amplitude obeys
//! `ζ_s′ + λ_s ζ_s = −Σ_a C_sa s_a′` with exponential forcing and is
//! integrated exactly. The physical state is `Y = z + Σ_a s_a D g_a`.
//!
//! The reported state is the projection `P_J Y` onto the retained
//! eigenmodes. Its coordinates `⟨Y, φ*_j⟩ = ζ_j + Σ_a s_a ⟨D g_a, φ*_j⟩` are
//! exact for every retained mode; only the discarded fast modes are missing.
//! The mean-mode part of a lift (the through-flow generated by a constant
//! `α`) pairs to zero with every eigenmode and so never enters the state.

use crate::channel::{inner_product, Field};
use crate::controller::FeedbackLaw;
use crate::lift::LiftedSet;
use crate::linalg::{self, czero, CMat};
use crate::spectrum::Spectrum;
use crate::{Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Coordinates of the initial state in the eigenbasis: `y0 = Σ c_j φ_j`.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub unstable: Vec<C64>,
    pub stable: Vec<C64>,
}

impl InitialState {
    pub fn zero(spectrum: &Spectrum) -> Self {
        InitialState {
            unstable: vec![czero(); spectrum.n_unstable],
            stable: vec![czero(); spectrum.modes.len() - spectrum.n_unstable],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        InitialState {
            unstable: self.unstable.iter().map(|z| z * c).collect(),
            stable: self.stable.iter().map(|z| z * c).collect(),
        }
    }
}

/// Random real initial state (conjugate-symmetric coefficients) of unit
/// energy, reproducible from `seed`. Stable coefficients are drawn with
/// weight `stable_weight` relative to the unstable ones.
pub fn random_initial(spectrum: &Spectrum, seed: u64, stable_weight: f64) -> Result<InitialState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spectrum.modes.len();
    let mut c = vec![czero(); n];
    for j in 0..n {
        let p = spectrum.modes[j].partner;
        if p < j {
            c[j] = c[p].conj();
            continue;
        }
        let w = if j < spectrum.n_unstable { 1.0 } else { stable_weight };
        let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w;
        c[j] = if p == j { C64::new(z.re, 0.0) } else { z };
    }
    let f = modal_field(spectrum, &c);
    let nrm = f.norm(&spectrum.grid);
    if nrm == 0.0 {
        return Err(Error::InvalidParameter("random initial state vanished".into()));
    }
    let c: Vec<C64> = c.iter().map(|z| z / nrm).collect();
    Ok(InitialState {
        unstable: c[..spectrum.n_unstable].to_vec(),
        stable: c[spectrum.n_unstable..].to_vec(),
    })
}

/// `Σ_j c_j φ_j` over all retained modes.
pub fn modal_field(spectrum: &Spectrum, c: &[C64]) -> Field {
    let mut f = Field::new();
    for (mode, cj) in spectrum.modes.iter().zip(c) {
        if *cj != czero() {
            f.add_scaled(&mode.direct, *cj);
        }
    }
    f
}

/// `φ₁(x) = (eˣ − 1)/x`, with a series near zero (resonant branch).
pub fn phi1(x: C64) -> C64 {
    if x.norm() < 1e-3 {
        C64::new(1.0, 0.0) + x / 2.0 + x * x / 6.0 + x * x * x / 24.0 + x * x * x * x / 120.0
    } else {
        (x.exp() - 1.0) / x
    }
}

/// `∫₀ᵗ e^{−l(t−τ)} e^{−rτ} dτ`, evaluated without overflow and with the
/// resonant branch `l ≈ r` handled by the series of [`phi1`].
pub fn exp_convolution(l: C64, r: C64, t: f64) -> C64 {
    let x = (l - r) * t;
    if x.norm() < 1e-3 {
        (-l * t).exp() * t * phi1(x)
    } else {
        ((-r * t).exp() - (-l * t).exp()) / (l - r)
    }
}

/// Linear closed-loop (or open-loop) system in modal form.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    pub n_unstable: usize,
    pub lambdas: Vec<C64>,
    /// `ρ_j` for the unstable modes (equal to `λ_j` in open loop).
    pub rates: Vec<C64>,
    /// `s = S ζ_u`.
    pub s_map: CMat,
    /// Theoretical `K_ia = ⟨D g_a, φ*_i⟩` used to invert the fixed point.
    pub k_expected: CMat,
    /// `C_sa = ⟨D g_a, φ*_s⟩` over stable modes, by quadrature.
    pub c_stable: CMat,
    /// Law matrix `L`: `s = L ⟨Y, φ*⟩` in the `Y` form.
    pub law: CMat,
    /// `P_ip = ⟨b_p, φ*_i⟩` for all retained modes `i` and the basis
    /// `b = [φ..., D g...]`.
    pub adjoint_pairing: CMat,
    /// Triangular factor with `‖Σ_j y_j φ_j‖ = ‖R y‖`.
    pub norm_factor: CMat,
    /// Boundary pairing of the `g_a`.
    pub boundary_gram: CMat,
    /// Index of the conjugate basis element.
    pub conj_index: Vec<usize>,
    pub gamma0: f64,
    pub closed_loop: bool,
}

impl ModalSystem {
    fn basis(spectrum: &Spectrum, lifts: &[Field]) -> Vec<Field> {
        let mut b: Vec<Field> = spectrum
            .modes
            .iter()
            .map(|m| Field::from_modes(vec![m.direct.clone()]))
            .collect();
        b.extend(lifts.iter().cloned());
        b
    }

    pub fn open_loop(spectrum: &Spectrum) -> Result<Self> {
        Self::build(spectrum, None)
    }

    pub fn closed_loop(spectrum: &Spectrum, law: &FeedbackLaw, lifts: &LiftedSet) -> Result<Self> {
        if (lifts.k_shift - law.gains.k_shift).abs() > 1e-12 * law.gains.k_shift {
            return Err(Error::Config {
                line: 0,
                column: 0,
                message: format!(
                    "lifts computed at k={} but the law uses k={}",
                    lifts.k_shift, law.gains.k_shift
                ),
            });
        }
        if lifts.fields.len() != law.traces.len() {
            return Err(Error::Mismatch("one lift per boundary field is required".into()));
        }
        Self::build(spectrum, Some((law, lifts)))
    }

    fn build(spectrum: &Spectrum, law: Option<(&FeedbackLaw, &LiftedSet)>) -> Result<Self> {
        let grid = &spectrum.grid;
        let n = spectrum.n_unstable;
        let lambdas: Vec<C64> = spectrum.modes.iter().map(|m| m.lambda).collect();
        let lifts: &[Field] = law.map_or(&[], |(_, l)| &l.fields[..]);
        let ng = lifts.len();
        let basis = Self::basis(spectrum, lifts);
        let nb = basis.len();
        let adj: Vec<Field> = spectrum
            .modes
            .iter()
            .map(|m| Field::from_modes(vec![m.adjoint.clone()]))
            .collect();
        let nm = spectrum.modes.len();
        let mut adjoint_pairing = CMat::zeros(nm, nb);
        for i in 0..nm {
            for p in 0..nb {
                adjoint_pairing[(i, p)] = if p < nm {
                    if spectrum.modes[p].m == spectrum.modes[i].m {
                        spectrum.modes[p].direct.dot(&spectrum.modes[i].adjoint, grid)
                    } else {
                        czero()
                    }
                } else {
                    inner_product(grid, &basis[p], &adj[i])?
                };
            }
        }
        // weighted nodal samples of the eigenmodes, one column per mode
        let ms = spectrum.flow.wavenumbers();
        let len = grid.len();
        let w = grid.quad_weights();
        let samples = CMat::from_fn(2 * len * ms.len(), nm, |r, c| {
            let mode = &spectrum.modes[c].direct;
            let slot = r / (2 * len);
            if ms[slot] != mode.m {
                return czero();
            }
            let i = r % len;
            let f = if (r / len) % 2 == 0 { &mode.u } else { &mode.v };
            f[i] * w[i].sqrt()
        });
        let norm_factor = linalg::thin_r(&samples);
        let ns = nm - n;
        let mut c_stable = CMat::zeros(ns, ng);
        for s in 0..ns {
            for a in 0..ng {
                c_stable[(s, a)] = inner_product(grid, &lifts[a], &adj[n + s])?;
            }
        }
        // conjugate partner of every basis element
        let mut conj_index: Vec<usize> = spectrum.modes.iter().map(|m| m.partner).collect();
        let (rates, s_map, k_expected, law_m, boundary_gram, gamma0) = match law {
            None => (
                lambdas[..n].to_vec(),
                CMat::zeros(0, n),
                CMat::zeros(n, 0),
                CMat::zeros(0, n),
                CMat::zeros(0, 0),
                lambdas[..n].iter().map(|l| l.re).fold(f64::INFINITY, f64::min),
            ),
            Some((law, _)) => {
                let g = law.boundary_fields();
                for a in 0..ng {
                    let target: Vec<_> = g[a].modes().iter().map(|b| (b.m, b.u, b.v)).collect();
                    let best = (0..ng)
                        .min_by(|&x, &y| {
                            let d = |b: usize| conj_distance(&target, &g[b]);
                            d(x).partial_cmp(&d(y)).unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .unwrap_or(a);
                    conj_index.push(spectrum.modes.len() + best);
                }
                let bg = CMat::from_fn(ng, ng, |a, b| g[a].pairing(&g[b], &law.walls));
                // s = L(ζ + K s)  ⇒  s = (I − LK)⁻¹ L ζ
                let lk = &law.law * &law.expected_pairing;
                let ilk = CMat::from_fn(ng, ng, |i, j| {
                    (if i == j { C64::new(1.0, 0.0) } else { czero() }) - lk[(i, j)]
                });
                let s_map = linalg::solve(&ilk, &law.law, "feedback fixed point")?;
                let rates = law.gains.rates();
                let gamma0 = law.gains.gamma0();
                (rates, s_map, law.expected_pairing.clone(), law.law.clone(), bg, gamma0)
            }
        };
        Ok(ModalSystem {
            n_unstable: n,
            lambdas,
            rates,
            s_map,
            k_expected,
            c_stable,
            law: law_m,
            adjoint_pairing,
            norm_factor,
            boundary_gram,
            conj_index,
            gamma0,
            closed_loop: law.is_some(),
        })
    }

    pub fn n_lifts(&self) -> usize {
        self.s_map.nrows()
    }
}

fn conj_distance(target: &[(i32, [C64; 2], [C64; 2])], g: &crate::channel::BoundaryField) -> f64 {
    let mut d: f64 = 0.0;
    for (m, u, v) in target {
        match g.mode(-m) {
            Some(b) => {
                for w in 0..2 {
                    d = d.max((b.u[w] - u[w].conj()).norm()).max((b.v[w] - v[w].conj()).norm());
                }
            }
            None => {
                d = d.max(u.iter().chain(v).map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
    }
    d
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub z_unstable: Vec<Vec<C64>>,
    pub z_stable: Vec<Vec<C64>>,
    pub state_norm: Vec<f64>,
    pub control_norm: Vec<f64>,
    /// Relative mismatch between the `Y`-form and `z`-form control.
    pub controller_mismatch: Vec<f64>,
    /// Distance of the coefficient vector from a real field.
    pub realness_defect: Vec<f64>,
    /// Whether `|ζ_j(t)| ≤ (1+1e−9) e^{−γ₀t}|ζ_j(0)|` held at every sample.
    pub mode_bound_ok: bool,
    pub gamma0: f64,
    pub gamma_fit: Option<f64>,
    pub closed_loop: bool,
}

impl Trajectory {
    pub fn decay_ratio(&self) -> f64 {
        self.state_norm[self.state_norm.len() - 1] / self.state_norm[0]
    }
}

fn sample_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && dt > 0.0 && dt <= t_end) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < dt <= T, got T={t_end}, dt={dt}"
        )));
    }
    let n = (t_end / dt).round() as usize;
    Ok((0..=n).map(|i| (i as f64 * dt).min(t_end)).collect())
}

fn quad_form(g: &CMat, a: &[C64]) -> f64 {
    let mut s = czero();
    for p in 0..a.len() {
        if a[p] == czero() {
            continue;
        }
        for q in 0..a.len() {
            s += a[p] * g[(p, q)] * a[q].conj();
        }
    }
    s.re.max(0.0).sqrt()
}

/// `‖P_J Y‖` from the modal coordinates `y_j = ⟨Y, φ*_j⟩`.
pub fn projected_norm(sys: &ModalSystem, y: &[C64]) -> f64 {
    linalg::vec_norm(&linalg::matvec(&sys.norm_factor, y))
}

/// Modal coordinates `⟨Y, φ*_j⟩` of `Y = Σ ζ φ + Σ s D g`.
pub fn state_coordinates(sys: &ModalSystem, zu: &[C64], zs: &[C64], s: &[C64]) -> Vec<C64> {
    let mut a: Vec<C64> = zu.iter().chain(zs).copied().collect();
    a.extend(s);
    linalg::matvec(&sys.adjoint_pairing, &a)
}

/// Unstable and stable initial amplitudes of `z` and the initial lift
/// coefficients, from the fixed point of the feedback at `t = 0`.
pub fn initial_modal(sys: &ModalSystem, init: &InitialState) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
    let n = sys.n_unstable;
    if init.unstable.len() != n || init.stable.len() != sys.lambdas.len() - n {
        return Err(Error::Mismatch("initial state does not match the spectrum".into()));
    }
    if !sys.closed_loop {
        return Ok((init.unstable.clone(), init.stable.clone(), vec![]));
    }
    // v = ζ + K s, s = S ζ  ⇒  ζ = (I + KS)⁻¹ v
    let ks = &sys.k_expected * &sys.s_map;
    let m = CMat::from_fn(n, n, |i, j| ks[(i, j)] + if i == j { C64::new(1.0, 0.0) } else { czero() });
    let zu = linalg::solve_vec(&m, &init.unstable, "initial fixed point")?;
    let s0 = linalg::matvec(&sys.s_map, &zu);
    let cs = linalg::matvec(&sys.c_stable, &s0);
    let zs = init.stable.iter().zip(&cs).map(|(c, d)| c - d).collect();
    Ok((zu, zs, s0))
}

/// Closed-form evaluation of the linear modal dynamics on `[0, T]`.
pub fn simulate(sys: &ModalSystem, init: &InitialState, t_end: f64, dt: f64) -> Result<Trajectory> {
    let times = sample_times(t_end, dt)?;
    let n = sys.n_unstable;
    let ns = sys.lambdas.len() - n;
    let (zu0, zs0, _) = initial_modal(sys, init)?;
    // forcing of stable mode s by unstable mode j: f_sj e^{−ρ_j t}
    let forcing = if sys.closed_loop {
        let cs = &sys.c_stable * &sys.s_map;
        CMat::from_fn(ns, n, |s, j| cs[(s, j)] * sys.rates[j] * zu0[j])
    } else {
        CMat::zeros(ns, n)
    };
    let mut out = Trajectory {
        times: times.clone(),
        z_unstable: Vec::with_capacity(times.len()),
        z_stable: Vec::with_capacity(times.len()),
        state_norm: Vec::with_capacity(times.len()),
        control_norm: Vec::with_capacity(times.len()),
        controller_mismatch: Vec::with_capacity(times.len()),
        realness_defect: Vec::with_capacity(times.len()),
        mode_bound_ok: true,
        gamma0: sys.gamma0,
        gamma_fit: None,
        closed_loop: sys.closed_loop,
    };
    for &t in &times {
        let zu: Vec<C64> = (0..n).map(|j| zu0[j] * (-sys.rates[j] * t).exp()).collect();
        let zs: Vec<C64> = (0..ns)
            .map(|s| {
                let l = sys.lambdas[n + s];
                let mut z = zs0[s] * (-l * t).exp();
                for j in 0..n {
                    let f = forcing[(s, j)];
                    if f != czero() {
                        z += f * exp_convolution(l, sys.rates[j], t);
                    }
                }
                z
            })
            .collect();
        let s = linalg::matvec(&sys.s_map, &zu);
        let y = state_coordinates(sys, &zu, &zs, &s);
        out.state_norm.push(projected_norm(sys, &y));
        out.control_norm.push(quad_form(&sys.boundary_gram, &s));
        if sys.closed_loop {
            let sy = linalg::matvec(&sys.law, &y[..n]);
            let diff: Vec<C64> = sy.iter().zip(&s).map(|(x, y)| x - y).collect();
            let scale = linalg::vec_norm(&s).max(1e-300);
            out.controller_mismatch.push(linalg::vec_norm(&diff) / scale);
        }
        let mut real: f64 = 0.0;
        for p in 0..y.len() {
            real = real.max((y[sys.conj_index[p]] - y[p].conj()).norm());
        }
        out.realness_defect.push(real);
        for j in 0..n {
            if zu[j].norm() > (1.0 + 1e-9) * (-sys.gamma0 * t).exp() * zu0[j].norm() + 1e-300 {
                out.mode_bound_ok = false;
            }
        }
        out.z_unstable.push(zu);
        out.z_stable.push(zs);
    }
    if out.state_norm[0] > 0.0 {
        out.gamma_fit = fit_decay_rate(&out.times, &out.state_norm, 0.5).ok();
    }
    Ok(out)
}

pub fn simulate_linear(sys: &ModalSystem, init: &InitialState, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !sys.closed_loop {
        return Err(Error::InvalidParameter("simulate_linear needs a closed-loop system".into()));
    }
    simulate(sys, init, t_end, dt)
}

pub fn simulate_open_loop(spectrum: &Spectrum, init: &InitialState, t_end: f64, dt: f64) -> Result<Trajectory> {
    simulate(&ModalSystem::open_loop(spectrum)?, init, t_end, dt)
}

/// Negated least-squares slope of `ln ‖Y‖` over the last `window` fraction
/// of the samples.
pub fn fit_decay_rate(times: &[f64], norms: &[f64], window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::FitUndefined(format!("window {window} outside (0, 1]")));
    }
    let n = times.len();
    let start = ((1.0 - window) * (n as f64 - 1.0)).floor() as usize;
    let (t, y) = (&times[start..], &norms[start..]);
    if t.len() < 2 {
        return Err(Error::FitUndefined("fewer than two samples in the window".into()));
    }
    if y.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::FitUndefined("non-positive norm in the fit window".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = t.len() as f64;
    let tm = t.iter().sum::<f64>() / k;
    let lm = ly.iter().sum::<f64>() / k;
    let num: f64 = t.iter().zip(&ly).map(|(a, b)| (a - tm) * (b - lm)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    Ok(-num / den)
}
