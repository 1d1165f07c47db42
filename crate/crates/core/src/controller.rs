//! Oblique boundary feedback: gain selection, trace Gram matrix, and the
//! complex, single-wall and real-valued feedback laws.

use crate::channel::{inner_product, BoundaryField, BoundaryMode, ChannelFlow, Field, Wall};
use crate::lift::lift_boundary_field;
use crate::linalg::{self, czero, CMat};
use crate::spectrum::Spectrum;
use crate::{Error, Result, C64};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct GainParameters {
    pub k_shift: f64,
    pub eta: f64,
    pub nu: f64,
    pub lambdas: Vec<C64>,
    pub mu: Vec<C64>,
}

/// Left side of the gain inequality,
/// `(|k+λ|² − ηkν) Re λ − ην Re(λ²)`.
pub fn gain_lhs(lambda: C64, k: f64, eta: f64, nu: f64) -> f64 {
    ((k + lambda).norm_sqr() - eta * k * nu) * lambda.re - eta * nu * (lambda * lambda).re
}

/// `μ = (k+λ)/(k+λ−νη)`.
pub fn mu(lambda: C64, k: f64, eta: f64, nu: f64) -> C64 {
    (k + lambda) / (k + lambda - nu * eta)
}

/// Closed-loop modal rate `ρ = λ(k+λ)/(k+λ−νη)`.
pub fn closed_loop_rate(lambda: C64, k: f64, eta: f64, nu: f64) -> C64 {
    lambda * mu(lambda, k, eta, nu)
}

/// For `Re λ < 0` the gain inequality is linear in `η`: it holds iff
/// `η > |k+λ|²|Re λ| / s` with `s = −ν(k Re λ + Re λ²) > 0`. Returns that
/// lower bound, or `None` when `s ≤ 0` (no `η > 0` works at this `k`).
pub fn eta_lower_bound(lambda: C64, k: f64, nu: f64) -> Option<f64> {
    let s = -nu * (k * lambda.re + (lambda * lambda).re);
    if s <= 0.0 {
        None
    } else {
        Some((k + lambda).norm_sqr() * lambda.re.abs() / s)
    }
}

fn pole_ok(lambda: C64, k: f64, eta: f64, nu: f64) -> bool {
    (k + lambda - nu * eta).norm() >= 1e-8 * (k + 1.0)
}

impl GainParameters {
    pub fn new(lambdas: &[C64], nu: f64, k_shift: f64, eta: f64) -> Self {
        GainParameters {
            k_shift,
            eta,
            nu,
            lambdas: lambdas.to_vec(),
            mu: lambdas.iter().map(|&l| mu(l, k_shift, eta, nu)).collect(),
        }
    }

    pub fn rates(&self) -> Vec<C64> {
        self.lambdas
            .iter()
            .map(|&l| closed_loop_rate(l, self.k_shift, self.eta, self.nu))
            .collect()
    }

    /// `γ₀ = min_j Re ρ_j`.
    pub fn gamma0(&self) -> f64 {
        self.rates().iter().map(|r| r.re).fold(f64::INFINITY, f64::min)
    }

    pub fn certificate(&self) -> GainCertificate {
        let lhs: Vec<f64> = self
            .lambdas
            .iter()
            .map(|&l| gain_lhs(l, self.k_shift, self.eta, self.nu))
            .collect();
        let rates = self.rates();
        let pole: Vec<f64> = self
            .lambdas
            .iter()
            .map(|&l| (self.k_shift + l - self.nu * self.eta).norm())
            .collect();
        let passed = lhs.iter().all(|&x| x > 0.0)
            && rates.iter().all(|r| r.re > 0.0)
            && self
                .lambdas
                .iter()
                .all(|&l| pole_ok(l, self.k_shift, self.eta, self.nu));
        GainCertificate {
            passed,
            lhs,
            rates,
            pole_distance: pole,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCertificate {
    pub passed: bool,
    pub lhs: Vec<f64>,
    pub rates: Vec<C64>,
    pub pole_distance: Vec<f64>,
}

/// Search `k ∈ {2^i · max(1, max|λ|)}`, `i = 0..=16`; at the first `k`
/// where every mode admits a bound, take `η` in the middle of
/// `[η_lo, 2η_lo]` with `η_lo` the largest per-mode bound.
pub fn select_gains(lambdas: &[C64], nu: f64) -> Result<GainParameters> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.re < 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "gain selection needs Re λ < 0, got {l}"
        )));
    }
    let base = lambdas.iter().map(|l| l.norm()).fold(1.0, f64::max);
    if lambdas.is_empty() {
        return Ok(GainParameters::new(lambdas, nu, base, 1.0));
    }
    let mut last_report = String::new();
    for i in 0..=16 {
        let k = base * f64::powi(2.0, i);
        let bounds: Vec<Option<f64>> = lambdas.iter().map(|&l| eta_lower_bound(l, k, nu)).collect();
        if bounds.iter().any(|b| b.is_none()) {
            last_report = lambdas
                .iter()
                .zip(&bounds)
                .map(|(l, b)| match b {
                    Some(x) => format!("λ={l}: η > {x:.3e}"),
                    None => format!("λ={l}: no η > 0"),
                })
                .collect::<Vec<_>>()
                .join("; ");
            continue;
        }
        let lo = bounds.iter().map(|b| b.unwrap()).fold(0.0, f64::max);
        for frac in [1.5, 1.25, 1.75, 1.1, 1.9] {
            let eta = frac * lo;
            let g = GainParameters::new(lambdas, nu, k, eta);
            if g.certificate().passed {
                return Ok(g);
            }
        }
        last_report = format!("k={k:.3e}: bracket [{lo:.3e}, {:.3e}] hits the pole k+λ−νη=0", 2.0 * lo);
    }
    Err(Error::InfeasibleGains(last_report))
}

/// Tangential component of `∂φ*_i/∂n` on each wall, one entry per unstable
/// mode. The wall-normal component `±v*′` is stored too (it vanishes for
/// clamped adjoints).
pub fn adjoint_traces(spectrum: &Spectrum) -> Vec<BoundaryMode> {
    spectrum
        .unstable()
        .iter()
        .map(|mode| BoundaryMode {
            m: mode.m,
            u: Wall::BOTH.map(|w| mode.wall.adjoint_trace(w)),
            v: Wall::BOTH.map(|w| mode.wall.dv_star[w.index()] * w.normal_sign()),
        })
        .collect()
}

fn single(b: &BoundaryMode) -> BoundaryField {
    let mut f = BoundaryField::new();
    f.add_scaled(b, C64::new(1.0, 0.0));
    f
}

/// `F_ij = ∫_walls ∂φ*_i/∂n · conj(∂φ*_j/∂n)` (without the `2π`), and its
/// 2-norm condition number.
pub fn gram_matrix(traces: &[BoundaryMode], walls: &[Wall]) -> Result<(CMat, f64)> {
    let n = traces.len();
    let fields: Vec<BoundaryField> = traces.iter().map(single).collect();
    let f = CMat::from_fn(n, n, |i, j| fields[i].pairing(&fields[j], walls));
    if n == 0 {
        return Ok((f, 1.0));
    }
    let cond = linalg::condition_number(&f)?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IndependenceFailure { cond });
    }
    Ok((f, cond))
}

/// Prescribed wall-normal component `α(x)` of the control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlphaProfile {
    /// `α = alpha0·H(y)` with `H(0) = −1`, `H(1) = 1` on both walls.
    Constant { alpha0: f64 },
    /// `α(x) = alpha0·cos x` on one wall, zero on the other.
    Cosine { alpha0: f64, wall: Wall },
}

impl AlphaProfile {
    pub fn alpha0(&self) -> f64 {
        match *self {
            AlphaProfile::Constant { alpha0 } | AlphaProfile::Cosine { alpha0, .. } => alpha0,
        }
    }

    pub fn value(&self, x: f64, wall: Wall) -> f64 {
        match *self {
            AlphaProfile::Constant { alpha0 } => match wall {
                Wall::Lower => -alpha0,
                Wall::Upper => alpha0,
            },
            AlphaProfile::Cosine { alpha0, wall: w } => {
                if w == wall {
                    alpha0 * x.cos()
                } else {
                    0.0
                }
            }
        }
    }

    /// Fourier representation of the boundary vector `α n⃗`.
    pub fn normal_field(&self) -> BoundaryField {
        let mut f = BoundaryField::new();
        let one = C64::new(1.0, 0.0);
        match *self {
            AlphaProfile::Constant { alpha0 } => {
                let mut b = BoundaryMode::zero(0);
                for w in Wall::BOTH {
                    b.v[w.index()] = C64::new(self.value(0.0, w) * w.normal_sign(), 0.0);
                }
                if alpha0 != 0.0 {
                    f.add_scaled(&b, one);
                }
            }
            AlphaProfile::Cosine { alpha0, wall } => {
                if alpha0 != 0.0 {
                    for m in [-1, 1] {
                        let mut b = BoundaryMode::zero(m);
                        b.v[wall.index()] = C64::new(0.5 * alpha0 * wall.normal_sign(), 0.0);
                        f.add_scaled(&b, one);
                    }
                }
            }
        }
        f
    }

    /// `∫ α dx` over the given walls, by the periodic trapezoidal rule
    /// (exact for these trigonometric profiles).
    pub fn circulation(&self, walls: &[Wall]) -> f64 {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        walls
            .iter()
            .map(|&w| (0..n).map(|i| self.value(i as f64 * h, w)).sum::<f64>() * h)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Complex,
    Real,
    #[serde(rename = "restricted-y0")]
    RestrictedLower,
    #[serde(rename = "restricted-y1")]
    RestrictedUpper,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "complex" => Some(Variant::Complex),
            "real" => Some(Variant::Real),
            "restricted-y0" => Some(Variant::RestrictedLower),
            "restricted-y1" => Some(Variant::RestrictedUpper),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Complex => "complex",
            Variant::Real => "real",
            Variant::RestrictedLower => "restricted-y0",
            Variant::RestrictedUpper => "restricted-y1",
        }
    }

    pub fn walls(self) -> Vec<Wall> {
        match self {
            Variant::RestrictedLower => vec![Wall::Lower],
            Variant::RestrictedUpper => vec![Wall::Upper],
            _ => Wall::BOTH.to_vec(),
        }
    }
}

/// Real orthonormal basis of the unstable space and the data of the real law.
#[derive(Debug, Clone)]
pub struct RealBasis {
    /// Orthonormal real fields `ψ_i`.
    pub psi: Vec<Field>,
    /// `T_ij = ⟨φ_j, ψ_i⟩`, so `φ_j = Σ_i T_ij ψ_i`.
    pub t: CMat,
    /// Real matrix of `A` on the unstable space in the `ψ` basis.
    pub lambda: Vec<Vec<f64>>,
    /// `Q_iℓ`: `ψ_ℓ`-coordinate of `P_N D(∂ψ_i/∂n)`.
    pub q: Vec<Vec<f64>>,
    /// Combination coefficients `α*_ij`.
    pub alpha_star: Vec<Vec<f64>>,
    /// Real gain matrix `η R`, `R = −ν(kI + Λ − ηνI)⁻¹`.
    pub gain: Vec<Vec<f64>>,
    /// Largest imaginary part discarded when forming the real matrices.
    pub imag_defect: f64,
}

/// The feedback law in a variant-independent form: boundary fields
/// `g_a = traces_a + α n⃗`, a law matrix `L` with control coefficients
/// `c = L v`, `v_j = ⟨Y, φ*_j⟩`, and the expected pairing
/// `K_ia = ⟨D g_a, φ*_i⟩` implied by the construction.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    pub variant: Variant,
    pub gains: GainParameters,
    pub f: CMat,
    pub x: CMat,
    pub cond_f: f64,
    pub alpha: AlphaProfile,
    pub walls: Vec<Wall>,
    pub traces: Vec<BoundaryField>,
    pub law: CMat,
    pub expected_pairing: CMat,
    pub real: Option<RealBasis>,
}

impl FeedbackLaw {
    /// Boundary fields `g_a = traces_a + α n⃗`.
    pub fn boundary_fields(&self) -> Vec<BoundaryField> {
        let an = self.alpha.normal_field();
        self.traces
            .iter()
            .map(|t| {
                let mut g = t.clone();
                g.axpy(C64::new(1.0, 0.0), &an);
                g
            })
            .collect()
    }

    /// `max_ij |∫_walls traces_j · conj(∂φ*_i/∂n) − δ_ij|` (complex and
    /// restricted variants).
    pub fn delta_defect(&self, adjoint: &[BoundaryMode]) -> f64 {
        let mut d: f64 = 0.0;
        for (j, t) in self.traces.iter().enumerate() {
            for (i, a) in adjoint.iter().enumerate() {
                let z = t.pairing(&single(a), &self.walls);
                let want = if i == j { 1.0 } else { 0.0 };
                d = d.max((z - want).norm());
            }
        }
        d
    }
}

fn complex_traces(adjoint: &[BoundaryMode], x: &CMat, walls: &[Wall]) -> Vec<BoundaryField> {
    let n = adjoint.len();
    (0..n)
        .map(|j| {
            let mut f = BoundaryField::new();
            for (i, t) in adjoint.iter().enumerate() {
                let mut b = *t;
                for w in Wall::BOTH {
                    if !walls.contains(&w) {
                        b.u[w.index()] = czero();
                    }
                    b.v[w.index()] = czero();
                }
                if x[(j, i)] != czero() {
                    f.add_scaled(&b, x[(j, i)]);
                }
            }
            f
        })
        .collect()
}

fn complex_like(
    spectrum: &Spectrum,
    gains: &GainParameters,
    alpha: AlphaProfile,
    variant: Variant,
) -> Result<FeedbackLaw> {
    let walls = variant.walls();
    let adjoint = adjoint_traces(spectrum);
    let (f, cond_f) = gram_matrix(&adjoint, &walls)?;
    let n = adjoint.len();
    // φ_j = Σ_i X_ji t_i with X = F⁻¹ gives ∫ φ_j conj(t_i) = (XF)_ji = δ_ji
    let x = if n == 0 {
        CMat::zeros(0, 0)
    } else {
        linalg::inverse(&f, "trace Gram matrix")?
    };
    let traces = complex_traces(&adjoint, &x, &walls);
    let nu = gains.nu;
    let k = gains.k_shift;
    let law = CMat::from_fn(n, n, |a, j| if a == j { gains.mu[j] * gains.eta } else { czero() });
    let expected = CMat::from_fn(n, n, |i, a| {
        if i == a {
            -nu / (gains.lambdas[i] + k)
        } else {
            czero()
        }
    });
    Ok(FeedbackLaw {
        variant,
        gains: gains.clone(),
        f,
        x,
        cond_f,
        alpha,
        walls,
        traces,
        law,
        expected_pairing: expected,
        real: None,
    })
}

fn check_gains(spectrum: &Spectrum, gains: &GainParameters) -> Result<()> {
    if !spectrum.semisimple.passed {
        return Err(Error::NotSemisimple(
            "unstable eigenvalues failed the semisimplicity check".into(),
        ));
    }
    let l = spectrum.unstable_lambdas();
    if l.len() != gains.lambdas.len() || l.iter().zip(&gains.lambdas).any(|(a, b)| a != b) {
        return Err(Error::Mismatch("gains were selected for a different spectrum".into()));
    }
    Ok(())
}

/// Complex law `u = η Σ_j μ_j ⟨Y, φ*_j⟩ (φ_j + α n⃗)` with `α = alpha0·H(y)`.
pub fn build_feedback(spectrum: &Spectrum, gains: &GainParameters, alpha0: f64) -> Result<FeedbackLaw> {
    check_gains(spectrum, gains)?;
    complex_like(spectrum, gains, AlphaProfile::Constant { alpha0 }, Variant::Complex)
}

/// Single-wall law: traces, Gram matrix and `α(x) = alpha0·cos x` all live
/// on `wall`; the output vanishes on the other wall.
pub fn restrict_support(spectrum: &Spectrum, gains: &GainParameters, alpha0: f64, wall: Wall) -> Result<FeedbackLaw> {
    check_gains(spectrum, gains)?;
    let variant = match wall {
        Wall::Lower => Variant::RestrictedLower,
        Wall::Upper => Variant::RestrictedUpper,
    };
    complex_like(spectrum, gains, AlphaProfile::Cosine { alpha0, wall }, variant)
}

fn real_matrix(m: &CMat, defect: &mut f64) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    *defect = defect.max(m[(i, j)].im.abs() / (1.0 + m[(i, j)].norm()));
                    m[(i, j)].re
                })
                .collect()
        })
        .collect()
}

fn from_real(r: &[Vec<f64>]) -> CMat {
    CMat::from_fn(r.len(), r.first().map_or(0, |x| x.len()), |i, j| C64::new(r[i][j], 0.0))
}

/// Real-valued law built on the orthonormalized `{Re φ_j, Im φ_j}` system.
///
/// With `w` the `ψ`-coordinates of `P_N Y`, the output is
/// `u = Σ_j (ηR w)_j (h_j + α n⃗)` where `h_j = Σ_i α*_ij ∂ψ_i/∂n` satisfies
/// `P_N D h_j = ψ_j` and `R = −ν(kI + Λ − ηνI)⁻¹`. The closed-loop spectrum
/// on the unstable space is `{ρ_j}`, identical to the complex law.
pub fn real_feedback(spectrum: &Spectrum, gains: &GainParameters, alpha0: f64) -> Result<FeedbackLaw> {
    check_gains(spectrum, gains)?;
    let grid = &spectrum.grid;
    let flow: &ChannelFlow = &spectrum.flow;
    let n = spectrum.n_unstable;
    let unstable = spectrum.unstable();
    let one = C64::new(1.0, 0.0);
    let ihalf = C64::new(0.0, -0.5);

    // Re φ_j and Im φ_j for the m > 0 member of each conjugate pair, written
    // as combinations of the complex modes: coefficient rows over j.
    let mut raw: Vec<Vec<C64>> = Vec::new();
    for (j, mode) in unstable.iter().enumerate() {
        if mode.m < 0 {
            continue;
        }
        let p = mode.partner;
        if p >= n {
            return Err(Error::Mismatch("unstable mode has a stable partner".into()));
        }
        let mut re = vec![czero(); n];
        re[j] += 0.5 * one;
        re[p] += 0.5 * one;
        let mut im = vec![czero(); n];
        im[j] += ihalf;
        im[p] -= ihalf;
        raw.push(re);
        raw.push(im);
    }
    if raw.len() != n {
        return Err(Error::Mismatch("unstable modes do not come in conjugate pairs".into()));
    }
    let field_of = |c: &[C64]| {
        let mut f = Field::new();
        for (j, cj) in c.iter().enumerate() {
            if *cj != czero() {
                f.add_scaled(&unstable[j].direct, *cj);
            }
        }
        f
    };
    // Gram–Schmidt on coefficient vectors, measured in the energy product
    let mut beta: Vec<Vec<C64>> = Vec::new();
    let mut psi: Vec<Field> = Vec::new();
    for r in raw {
        let mut c = r.clone();
        for _ in 0..2 {
            let f = field_of(&c);
            for (b, p) in beta.iter().zip(&psi) {
                let h = inner_product(grid, &f, p)?;
                for (ci, bi) in c.iter_mut().zip(b) {
                    *ci -= h * bi;
                }
            }
        }
        let f = field_of(&c);
        let nrm = inner_product(grid, &f, &f)?.re.sqrt();
        if nrm < 1e-12 {
            return Err(Error::IndependenceFailure { cond: f64::INFINITY });
        }
        for ci in c.iter_mut() {
            *ci /= nrm;
        }
        psi.push(field_of(&c));
        beta.push(c);
    }
    let phi: Vec<Field> = unstable.iter().map(|m| Field::from_modes(vec![m.direct.clone()])).collect();
    let adj: Vec<Field> = unstable.iter().map(|m| Field::from_modes(vec![m.adjoint.clone()])).collect();
    let t = CMat::from_fn(n, n, |i, j| inner_product(grid, &phi[j], &psi[i]).unwrap_or(czero()));
    let tinv = linalg::inverse(&t, "real basis change")?;
    let diag = CMat::from_fn(n, n, |i, j| if i == j { gains.lambdas[i] } else { czero() });
    let lam_c = &(&t * &diag) * &tinv;
    let mut imag_defect: f64 = 0.0;
    let lambda = real_matrix(&lam_c, &mut imag_defect);

    // χ_i = ∂ψ_i/∂n from the direct wall data, and their lifts
    let k = gains.k_shift;
    let chi: Vec<BoundaryField> = beta
        .iter()
        .map(|b| {
            let mut f = BoundaryField::new();
            for (j, bj) in b.iter().enumerate() {
                if *bj == czero() {
                    continue;
                }
                let w = &unstable[j].wall;
                let mode = BoundaryMode {
                    m: unstable[j].m,
                    u: Wall::BOTH.map(|wl| w.direct_trace(wl)),
                    v: [czero(); 2],
                };
                f.add_scaled(&mode, *bj);
            }
            f
        })
        .collect();
    let mut qc = CMat::zeros(n, n);
    for (i, c) in chi.iter().enumerate() {
        let lifted = lift_boundary_field(flow, grid, k, c)?;
        let coords: Vec<C64> = adj
            .iter()
            .map(|a| inner_product(grid, &lifted, a))
            .collect::<Result<_>>()?;
        for l in 0..n {
            let mut z = czero();
            for (j, cj) in coords.iter().enumerate() {
                z += t[(l, j)] * cj;
            }
            qc[(i, l)] = z;
        }
    }
    let q = real_matrix(&qc, &mut imag_defect);
    let qr = from_real(&q);
    let qcond = linalg::condition_number(&qr)?;
    if !qcond.is_finite() || qcond > 1e12 {
        return Err(Error::IndependenceFailure { cond: qcond });
    }
    let qinv = linalg::inverse(&qr, "real pairing matrix")?;
    let alpha_star: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| qinv[(j, i)].re).collect()).collect();
    let traces: Vec<BoundaryField> = (0..n)
        .map(|j| {
            let mut h = BoundaryField::new();
            for (i, c) in chi.iter().enumerate() {
                h.axpy(C64::new(alpha_star[i][j], 0.0), c);
            }
            h
        })
        .collect();

    let nu = gains.nu;
    let eta = gains.eta;
    let lr = from_real(&lambda);
    let shifted = CMat::from_fn(n, n, |i, j| {
        lr[(i, j)] + if i == j { C64::new(k - eta * nu, 0.0) } else { czero() }
    });
    let sinv = linalg::inverse(&shifted, "real gain matrix")?;
    let gain_c = CMat::from_fn(n, n, |i, j| sinv[(i, j)] * (-nu * eta));
    let gain = real_matrix(&gain_c, &mut imag_defect);
    let law = &from_real(&gain) * &t;
    let adjoint = adjoint_traces(spectrum);
    let (f, cond_f) = gram_matrix(&adjoint, &Wall::BOTH)?;
    Ok(FeedbackLaw {
        variant: Variant::Real,
        gains: gains.clone(),
        f,
        x: qinv,
        cond_f,
        alpha: AlphaProfile::Constant { alpha0 },
        walls: Wall::BOTH.to_vec(),
        traces,
        law,
        expected_pairing: tinv,
        real: Some(RealBasis {
            psi,
            t,
            lambda,
            q,
            alpha_star,
            gain,
            imag_defect,
        }),
    })
}

/// Build the law for any variant.
pub fn build_variant(spectrum: &Spectrum, gains: &GainParameters, alpha0: f64, variant: Variant) -> Result<FeedbackLaw> {
    match variant {
        Variant::Complex => build_feedback(spectrum, gains, alpha0),
        Variant::Real => real_feedback(spectrum, gains, alpha0),
        Variant::RestrictedLower => restrict_support(spectrum, gains, alpha0, Wall::Lower),
        Variant::RestrictedUpper => restrict_support(spectrum, gains, alpha0, Wall::Upper),
    }
}

/// Control output for a given state.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    /// `v_j = ⟨Y, φ*_j⟩`.
    pub modal: Vec<C64>,
    /// Coefficients `c_a` of the boundary fields `g_a`.
    pub coefficients: Vec<C64>,
    pub boundary: BoundaryField,
}

impl ControlOutput {
    /// The scalar multiplying `α n⃗`, `Σ_a c_a`.
    pub fn normal_scalar(&self) -> C64 {
        self.coefficients.iter().sum()
    }
}

pub fn evaluate_control(spectrum: &Spectrum, law: &FeedbackLaw, state: &Field) -> Result<ControlOutput> {
    let grid = &spectrum.grid;
    let modal: Vec<C64> = spectrum
        .unstable()
        .iter()
        .map(|m| inner_product(grid, state, &Field::from_modes(vec![m.adjoint.clone()])))
        .collect::<Result<_>>()?;
    let coefficients = linalg::matvec(&law.law, &modal);
    let mut boundary = BoundaryField::new();
    for (c, g) in coefficients.iter().zip(law.boundary_fields()) {
        boundary.axpy(*c, &g);
    }
    Ok(ControlOutput {
        modal,
        coefficients,
        boundary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObliquenessReport {
    pub alpha0: f64,
    pub min_abs_cos: f64,
    /// `max |u·n⃗ − σ α(x)|` over the sample points, `σ` the modal scalar.
    pub normal_defect: f64,
    pub normal_scalar: f64,
    /// Largest imaginary part of the physical boundary velocity.
    pub imag_defect: f64,
}

/// Sample the physical boundary velocity at `n_points` equispaced `x` per
/// active wall and report `|cos∠(u, n⃗)|` and the normal component.
pub fn obliqueness_report(law: &FeedbackLaw, out: &ControlOutput, n_points: usize) -> Result<ObliquenessReport> {
    if out.boundary.max_abs() == 0.0 {
        return Err(Error::NoControl);
    }
    let sigma = out.normal_scalar();
    let mut min_cos = f64::INFINITY;
    let mut normal_defect: f64 = 0.0;
    let mut imag: f64 = sigma.im.abs();
    for &w in &law.walls {
        for i in 0..n_points {
            let x = 2.0 * PI * i as f64 / n_points as f64;
            let (u, v) = out.boundary.eval(x, w);
            imag = imag.max(u.im.abs()).max(v.im.abs());
            let un = v.re * w.normal_sign();
            let mag = (u.re * u.re + v.re * v.re).sqrt();
            let cos = if mag > 0.0 { un.abs() / mag } else { 0.0 };
            min_cos = min_cos.min(cos);
            normal_defect = normal_defect.max((un - sigma.re * law.alpha.value(x, w)).abs());
        }
    }
    Ok(ObliquenessReport {
        alpha0: law.alpha.alpha0(),
        min_abs_cos: min_cos,
        normal_defect,
        normal_scalar: sigma.re,
        imag_defect: imag,
    })
}
