//! Periodic channel `(0, 2π) × (0, 1)` with the parabolic base flow and the
//! Fourier-mode field representation.

use crate::linalg::czero;
use crate::spectral::SpectralGrid;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFlow {
    nu: f64,
    a: f64,
    wavenumbers: Vec<i32>,
}

/// `(U, U′, U″)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseFlow {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
}

impl ChannelFlow {
    /// Flow with wavenumbers `{±1, …, ±max_wavenumber}`.
    pub fn new(nu: f64, a: f64, max_wavenumber: u32) -> Result<Self> {
        let mut ms: Vec<i32> = (1..=max_wavenumber as i32).collect();
        ms.extend((1..=max_wavenumber as i32).map(|m| -m));
        Self::with_wavenumbers(nu, a, ms)
    }

    pub fn with_wavenumbers(nu: f64, a: f64, mut wavenumbers: Vec<i32>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
        }
        // a = 0 is the Stokes limit and is allowed.
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be non-negative, got {a}")));
        }
        if wavenumbers.is_empty() {
            return Err(Error::InvalidParameter("no wavenumbers retained".into()));
        }
        if wavenumbers.contains(&0) {
            return Err(Error::InvalidParameter("wavenumber 0 is excluded".into()));
        }
        wavenumbers.sort_unstable();
        wavenumbers.dedup();
        if wavenumbers.iter().any(|m| !wavenumbers.contains(&-m)) {
            return Err(Error::InvalidParameter(
                "wavenumber set must be closed under negation".into(),
            ));
        }
        Ok(ChannelFlow { nu, a, wavenumbers })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Profile coefficient `C = −a/(2ν)`.
    pub fn c(&self) -> f64 {
        -self.a / (2.0 * self.nu)
    }

    pub fn wavenumbers(&self) -> &[i32] {
        &self.wavenumbers
    }

    pub fn positive_wavenumbers(&self) -> Vec<i32> {
        self.wavenumbers.iter().copied().filter(|&m| m > 0).collect()
    }

    /// Classical plane-Poiseuille Reynolds number `U_c h / ν` built from the
    /// centreline speed and half-width.
    pub fn poiseuille_reynolds(&self) -> f64 {
        self.a / (16.0 * self.nu * self.nu)
    }

    pub fn eval_base_flow(&self, y: f64) -> Result<BaseFlow> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain(y));
        }
        let c = self.c();
        Ok(BaseFlow {
            u: c * (y * y - y),
            du: c * (2.0 * y - 1.0),
            d2u: 2.0 * c,
        })
    }

    /// Base-flow samples `(U, U′, U″)` at the grid nodes.
    pub fn sample(&self, grid: &SpectralGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c = self.c();
        let y = grid.nodes();
        (
            y.iter().map(|y| c * (y * y - y)).collect(),
            y.iter().map(|y| c * (2.0 * y - 1.0)).collect(),
            vec![2.0 * c; y.len()],
        )
    }
}

/// One Fourier component `(u_m(y), v_m(y)) e^{imx}` sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    pub m: i32,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl ModeProfile {
    pub fn zeros(m: i32, n: usize) -> Self {
        ModeProfile {
            m,
            u: vec![czero(); n],
            v: vec![czero(); n],
        }
    }

    /// Velocity from a stream-mode profile via `u = i v′/m`.
    pub fn from_stream(grid: &SpectralGrid, m: i32, v: Vec<C64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "stream reconstruction needs m != 0".into(),
            ));
        }
        let dv = grid.apply(1, &v);
        let f = C64::new(0.0, 1.0 / m as f64);
        let u = dv.iter().map(|d| f * d).collect();
        Ok(ModeProfile { m, u, v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `∫₀¹ (u ū′ + v v̄′) dy`, zero for different wavenumbers.
    pub fn dot(&self, other: &ModeProfile, grid: &SpectralGrid) -> C64 {
        if self.m != other.m {
            return czero();
        }
        let w = grid.quad_weights();
        let mut acc = czero();
        for i in 0..w.len() {
            acc += (self.u[i] * other.u[i].conj() + self.v[i] * other.v[i].conj()) * w[i];
        }
        acc
    }

    pub fn scaled(&self, c: C64) -> ModeProfile {
        ModeProfile {
            m: self.m,
            u: self.u.iter().map(|z| z * c).collect(),
            v: self.v.iter().map(|z| z * c).collect(),
        }
    }

    /// The `−m` component of the real field whose `m` component is `self`.
    pub fn conjugate(&self) -> ModeProfile {
        ModeProfile {
            m: -self.m,
            u: self.u.iter().map(|z| z.conj()).collect(),
            v: self.v.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Velocity field as a finite Fourier sum; modes are kept sorted by `m`
/// with at most one profile per wavenumber.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field {
    modes: Vec<ModeProfile>,
}

impl Field {
    pub fn new() -> Self {
        Field { modes: Vec::new() }
    }

    pub fn from_modes(modes: Vec<ModeProfile>) -> Self {
        let mut f = Field::new();
        for p in modes {
            f.add_scaled(&p, C64::new(1.0, 0.0));
        }
        f
    }

    pub fn modes(&self) -> &[ModeProfile] {
        &self.modes
    }

    pub fn mode(&self, m: i32) -> Option<&ModeProfile> {
        self.modes.iter().find(|p| p.m == m)
    }

    pub fn wavenumbers(&self) -> Vec<i32> {
        self.modes.iter().map(|p| p.m).collect()
    }

    /// `self += c · p`.
    pub fn add_scaled(&mut self, p: &ModeProfile, c: C64) {
        match self.modes.binary_search_by_key(&p.m, |q| q.m) {
            Ok(i) => {
                let q = &mut self.modes[i];
                for (a, b) in q.u.iter_mut().zip(&p.u) {
                    *a += b * c;
                }
                for (a, b) in q.v.iter_mut().zip(&p.v) {
                    *a += b * c;
                }
            }
            Err(i) => self.modes.insert(i, p.scaled(c)),
        }
    }

    pub fn axpy(&mut self, c: C64, other: &Field) {
        for p in &other.modes {
            self.add_scaled(p, c);
        }
    }

    pub fn scaled(&self, c: C64) -> Field {
        Field {
            modes: self.modes.iter().map(|p| p.scaled(c)).collect(),
        }
    }

    /// Largest mismatch between the `−m` component and the conjugate of the
    /// `m` component, i.e. the distance from a real physical field.
    pub fn realness_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for p in &self.modes {
            let q = match self.mode(-p.m) {
                Some(q) => q.clone(),
                None => ModeProfile::zeros(-p.m, p.len()),
            };
            let c = p.conjugate();
            for i in 0..p.len() {
                d = d.max((q.u[i] - c.u[i]).norm()).max((q.v[i] - c.v[i]).norm());
            }
        }
        d
    }

    pub fn norm(&self, grid: &SpectralGrid) -> f64 {
        self.modes
            .iter()
            .map(|p| p.dot(p, grid).re)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// Energy inner product `Σ_m ∫₀¹ (u ū′ + v v̄′) dy`; the common `2π` from
/// the `x` integral is left out everywhere.
pub fn inner_product(grid: &SpectralGrid, f: &Field, g: &Field) -> Result<C64> {
    let n = grid.len();
    for p in f.modes().iter().chain(g.modes()) {
        if p.u.len() != n || p.v.len() != n {
            return Err(Error::Mismatch(format!(
                "profile for m={} has {} samples, grid has {n}",
                p.m,
                p.v.len()
            )));
        }
    }
    let mut acc = czero();
    for p in f.modes() {
        if let Some(q) = g.mode(p.m) {
            acc += p.dot(q, grid);
        }
    }
    Ok(acc)
}

/// Which wall of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Wall {
    /// `y = 0`, outward normal `(0, −1)`.
    Lower,
    /// `y = 1`, outward normal `(0, +1)`.
    Upper,
}

impl Wall {
    pub const BOTH: [Wall; 2] = [Wall::Lower, Wall::Upper];

    pub fn normal_sign(self) -> f64 {
        match self {
            Wall::Lower => -1.0,
            Wall::Upper => 1.0,
        }
    }

    pub fn node(self, grid: &SpectralGrid) -> usize {
        match self {
            Wall::Lower => 0,
            Wall::Upper => grid.m(),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Wall::Lower => 0,
            Wall::Upper => 1,
        }
    }
}

/// Boundary velocity data `(u, v)` per wall for one wavenumber; `u` is the
/// tangential and `v` the wall-normal (vertical) component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMode {
    pub m: i32,
    pub u: [C64; 2],
    pub v: [C64; 2],
}

impl BoundaryMode {
    pub fn zero(m: i32) -> Self {
        BoundaryMode {
            m,
            u: [czero(); 2],
            v: [czero(); 2],
        }
    }
}

/// Boundary velocity as a finite Fourier sum on both walls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryField {
    modes: Vec<BoundaryMode>,
}

impl BoundaryField {
    pub fn new() -> Self {
        BoundaryField { modes: Vec::new() }
    }

    pub fn modes(&self) -> &[BoundaryMode] {
        &self.modes
    }

    pub fn mode(&self, m: i32) -> Option<&BoundaryMode> {
        self.modes.iter().find(|b| b.m == m)
    }

    pub fn add_scaled(&mut self, b: &BoundaryMode, c: C64) {
        let i = match self.modes.binary_search_by_key(&b.m, |q| q.m) {
            Ok(i) => i,
            Err(i) => {
                self.modes.insert(i, BoundaryMode::zero(b.m));
                i
            }
        };
        let q = &mut self.modes[i];
        for w in 0..2 {
            q.u[w] += b.u[w] * c;
            q.v[w] += b.v[w] * c;
        }
    }

    pub fn axpy(&mut self, c: C64, other: &BoundaryField) {
        for b in &other.modes {
            self.add_scaled(b, c);
        }
    }

    /// Physical `(u, v)` at `(x, wall)`.
    pub fn eval(&self, x: f64, wall: Wall) -> (C64, C64) {
        let w = wall.index();
        let mut u = czero();
        let mut v = czero();
        for b in &self.modes {
            let e = C64::from_polar(1.0, b.m as f64 * x);
            u += b.u[w] * e;
            v += b.v[w] * e;
        }
        (u, v)
    }

    /// `Σ_walls Σ_m (u ū′ + v v̄′)`: the boundary pairing `∫_∂O f · ḡ` with
    /// the `2π` left out.
    pub fn pairing(&self, other: &BoundaryField, walls: &[Wall]) -> C64 {
        let mut acc = czero();
        for b in &self.modes {
            if let Some(c) = other.mode(b.m) {
                for w in walls {
                    let i = w.index();
                    acc += b.u[i] * c.u[i].conj() + b.v[i] * c.v[i].conj();
                }
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|b| b.u.iter().chain(&b.v))
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}
