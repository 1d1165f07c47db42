//! Direct and adjoint Orr–Sommerfeld eigenproblems per wavenumber, spurious
//! mode filtering, and the semisimplicity and unique-continuation checks.

use crate::channel::{ChannelFlow, ModeProfile, Wall};
use crate::linalg::{self, czero, frobenius, CMat};
use crate::spectral::{build_grid, clamp_fourth_order, ReducedPencil, SpectralGrid};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PencilKind {
    Direct,
    Adjoint,
}

/// `A v = λ B v` for one wavenumber. The full nodal operators are kept next
/// to the clamped reduction so that eigenvectors can be checked against
/// either.
#[derive(Debug, Clone)]
pub struct ModePencil {
    pub m: i32,
    pub kind: PencilKind,
    pub a: CMat,
    pub b: CMat,
    pub reduced: ReducedPencil,
}

fn check_m(m: i32) -> Result<()> {
    if m == 0 {
        Err(Error::InvalidParameter("wavenumber m = 0 has no Orr–Sommerfeld pencil".into()))
    } else {
        Ok(())
    }
}

fn mass_operator(grid: &SpectralGrid, m: i32) -> CMat {
    let n = grid.len();
    let d2 = grid.d2();
    let m2 = (m * m) as f64;
    CMat::from_fn(n, n, |i, j| C64::new(d2[(i, j)] - if i == j { m2 } else { 0.0 }, 0.0))
}

/// `−ν v⁗ + (2νm² + imU) v″ − (νm⁴ + im³U + imU″) v`.
pub fn assemble_orr_sommerfeld(flow: &ChannelFlow, grid: &SpectralGrid, m: i32) -> Result<ModePencil> {
    check_m(m)?;
    let n = grid.len();
    let nu = flow.nu();
    let mf = m as f64;
    let (u, _, d2u) = flow.sample(grid);
    let (d2, d4) = (grid.d2(), grid.d4());
    let a = CMat::from_fn(n, n, |i, j| {
        let c2 = C64::new(2.0 * nu * mf * mf, mf * u[i]);
        let mut z = C64::new(-nu * d4[(i, j)], 0.0) + c2 * d2[(i, j)];
        if i == j {
            z -= C64::new(nu * mf.powi(4), mf.powi(3) * u[i] + mf * d2u[i]);
        }
        z
    });
    let b = mass_operator(grid, m);
    let reduced = clamp_fourth_order(grid, &a, &b)?;
    Ok(ModePencil {
        m,
        kind: PencilKind::Direct,
        a,
        b,
        reduced,
    })
}

/// `−ν w⁗ + (2νm² − imU) w″ − 2imU′ w′ − (νm⁴ − im³U) w`, whose eigenvalues
/// are the conjugates of the direct ones.
pub fn assemble_adjoint(flow: &ChannelFlow, grid: &SpectralGrid, m: i32) -> Result<ModePencil> {
    check_m(m)?;
    let n = grid.len();
    let nu = flow.nu();
    let mf = m as f64;
    let (u, du, _) = flow.sample(grid);
    let (d1, d2, d4) = (grid.d1(), grid.d2(), grid.d4());
    let a = CMat::from_fn(n, n, |i, j| {
        let c2 = C64::new(2.0 * nu * mf * mf, -mf * u[i]);
        let c1 = C64::new(0.0, -2.0 * mf * du[i]);
        let mut z = C64::new(-nu * d4[(i, j)], 0.0) + c2 * d2[(i, j)] + c1 * d1[(i, j)];
        if i == j {
            z -= C64::new(nu * mf.powi(4), -mf.powi(3) * u[i]);
        }
        z
    });
    let b = mass_operator(grid, m);
    let reduced = clamp_fourth_order(grid, &a, &b)?;
    Ok(ModePencil {
        m,
        kind: PencilKind::Adjoint,
        a,
        b,
        reduced,
    })
}

/// One eigenpair with its nodal eigenvector, normalized to unit energy.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub m: i32,
    pub lambda: C64,
    pub v: Vec<C64>,
    /// Backward error `‖Lc − λc‖ / (‖L‖_F ‖c‖)` of the standard-form problem
    /// `L = B⁻¹A` on the clamped subspace.
    pub residual: f64,
}

fn cmp_lambda(a: &C64, b: &C64) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

/// Energy norm of a stream-mode profile, `(∫ |v′|²/m² + |v|²)^{1/2}`.
pub fn energy_norm(grid: &SpectralGrid, m: i32, v: &[C64]) -> f64 {
    let dv = grid.apply(1, v);
    let m2 = (m * m) as f64;
    let w = grid.quad_weights();
    (0..v.len())
        .map(|i| w[i] * (dv[i].norm_sqr() / m2 + v[i].norm_sqr()))
        .sum::<f64>()
        .sqrt()
}

/// Eigenvalues only, sorted by `(Re λ, Im λ)`.
pub fn pencil_eigenvalues(pencil: &ModePencil) -> Result<Vec<C64>> {
    let l = linalg::solve(&pencil.reduced.b, &pencil.reduced.a, "B_m on the clamped subspace")?;
    let (mut vals, _) = linalg::eig(&l)?;
    vals.sort_by(cmp_lambda);
    Ok(vals)
}

/// Solve the pencil through `B⁻¹A` and return the `n_keep` eigenpairs of
/// smallest real part (all of them when `n_keep == 0`), lifted to nodal
/// values and normalized to unit energy.
pub fn solve_spectrum(grid: &SpectralGrid, pencil: &ModePencil, n_keep: usize) -> Result<Vec<Eigenpair>> {
    let l = linalg::solve(&pencil.reduced.b, &pencil.reduced.a, "B_m on the clamped subspace")?;
    let (vals, vecs) = linalg::eig(&l)?;
    let lnorm = frobenius(&l);
    let dim = vals.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| cmp_lambda(&vals[i], &vals[j]));
    if n_keep > 0 {
        order.truncate(n_keep);
    }
    let basis = grid.clamped();
    let mut out = Vec::with_capacity(order.len());
    for k in order {
        let c: Vec<C64> = (0..dim).map(|i| vecs[(i, k)]).collect();
        let lc = linalg::matvec(&l, &c);
        let r: Vec<C64> = lc.iter().zip(&c).map(|(a, b)| a - vals[k] * b).collect();
        let residual = linalg::vec_norm(&r) / (lnorm * linalg::vec_norm(&c));
        let mut v = basis.lift(&c);
        let nrm = energy_norm(grid, pencil.m, &v);
        // fix the phase so that the largest entry is real and positive
        let piv = v
            .iter()
            .copied()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap_or(Ordering::Equal))
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = piv.conj() / piv.norm();
        for z in v.iter_mut() {
            *z *= phase / nrm;
        }
        out.push(Eigenpair {
            m: pencil.m,
            lambda: vals[k],
            v,
            residual,
        });
    }
    Ok(out)
}

/// `N = #{j : Re λ_j < −margin}`; any `|Re λ| ≤ margin` is an error.
pub fn count_unstable(eigenvalues: &[C64], margin: f64) -> Result<usize> {
    let mut n = 0;
    for l in eigenvalues {
        if l.re.abs() <= margin {
            return Err(Error::NeutralEigenvalue {
                re: l.re,
                im: l.im,
                margin,
            });
        }
        if l.re < -margin {
            n += 1;
        }
    }
    Ok(n)
}

/// An eigenvector tagged with its wavenumber, used by the hypothesis checks.
#[derive(Debug, Clone)]
pub struct ModeVector {
    pub m: i32,
    pub lambda: C64,
    pub v: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterInfo {
    pub re: f64,
    pub im: f64,
    pub algebraic: usize,
    pub geometric: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemisimpleReport {
    pub passed: bool,
    pub cluster_tol: f64,
    pub clusters: Vec<ClusterInfo>,
}

fn clusters(lambdas: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = lambdas.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = 1.0 + lambdas[i].norm().max(lambdas[j].norm());
            if (lambdas[i] - lambdas[j]).norm() <= tol * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => groups[k].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Cluster the eigenvalues (relative tolerance `cluster_tol·(1+|λ|)`) and
/// compare each cluster's size with the numerical rank of its stacked
/// eigenvectors. Vectors of different wavenumbers live in orthogonal Fourier
/// components and are embedded accordingly.
pub fn check_semisimple(modes: &[ModeVector], cluster_tol: f64) -> SemisimpleReport {
    let lambdas: Vec<C64> = modes.iter().map(|m| m.lambda).collect();
    let mut ms: Vec<i32> = modes.iter().map(|m| m.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut out = Vec::new();
    let mut passed = true;
    for group in clusters(&lambdas, cluster_tol) {
        let len = modes[group[0]].v.len();
        let rows = ms.len() * len;
        let mat = CMat::from_fn(rows, group.len(), |r, c| {
            let mode = &modes[group[c]];
            let slot = ms.iter().position(|&x| x == mode.m).unwrap();
            if r / len == slot {
                let nrm = linalg::vec_norm(&mode.v);
                if nrm > 0.0 {
                    mode.v[r % len] / nrm
                } else {
                    czero()
                }
            } else {
                czero()
            }
        });
        let sv = linalg::singular_values(&mat).unwrap_or_default();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > 1e-6 * smax.max(f64::MIN_POSITIVE)).count();
        if rank != group.len() {
            passed = false;
        }
        let c = lambdas[group[0]];
        out.push(ClusterInfo {
            re: c.re,
            im: c.im,
            algebraic: group.len(),
            geometric: rank,
        });
    }
    SemisimpleReport {
        passed,
        cluster_tol,
        clusters: out,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BiorthReport {
    /// Largest `|⟨φ_j, φ*_k⟩| / (‖φ_j‖‖φ*_k‖)` over pairs in different
    /// clusters, measured before rescaling.
    pub max_cross_pairing: f64,
    /// `‖gram − I‖_max` after rescaling.
    pub gram_defect: f64,
}

/// Replace the adjoint profiles of the modes listed in `replace` by the dual
/// basis of the direct profiles: afterwards `⟨φ_j, φ*_k⟩ = δ_jk` for every
/// `j` and every replaced `k`. Profiles not listed are left untouched. All
/// modes must share one wavenumber.
pub fn dual_complete(
    grid: &SpectralGrid,
    direct: &[ModeVector],
    adjoint: &mut [ModeVector],
    replace: &[usize],
) -> Result<()> {
    let n = direct.len();
    if n == 0 || replace.is_empty() {
        return Ok(());
    }
    let prof = |mv: &ModeVector| ModeProfile::from_stream(grid, mv.m, mv.v.clone());
    let dp: Vec<ModeProfile> = direct.iter().map(prof).collect::<Result<_>>()?;
    let ap: Vec<ModeProfile> = adjoint.iter().map(prof).collect::<Result<_>>()?;
    let gram = CMat::from_fn(n, n, |j, k| dp[j].dot(&ap[k], grid));
    let inv = linalg::solve(&gram, &CMat::identity(n, n), "retained-mode pairing matrix")?;
    let old: Vec<Vec<C64>> = adjoint.iter().map(|a| a.v.clone()).collect();
    for &k in replace {
        let mut w = vec![czero(); old[0].len()];
        for (l, ol) in old.iter().enumerate() {
            let coef = inv[(l, k)].conj();
            for (wi, oi) in w.iter_mut().zip(ol) {
                *wi += oi * coef;
            }
        }
        adjoint[k].v = w;
    }
    Ok(())
}

/// Rescale the adjoint profiles so that `⟨φ_j, φ*_k⟩ = δ_jk`. `direct[j]`
/// and `adjoint[j]` must be partners (eigenvalues `λ_j`, `λ̄_j`); repeated
/// eigenvalues are handled by inverting the cluster's Gram block.
pub fn biorthonormalize(
    grid: &SpectralGrid,
    direct: &[ModeVector],
    adjoint: &mut [ModeVector],
    cluster_tol: f64,
) -> Result<BiorthReport> {
    if direct.len() != adjoint.len() {
        return Err(Error::Mismatch(format!(
            "{} direct modes but {} adjoint modes",
            direct.len(),
            adjoint.len()
        )));
    }
    let n = direct.len();
    let prof = |mv: &ModeVector| ModeProfile::from_stream(grid, mv.m, mv.v.clone());
    let dp: Vec<ModeProfile> = direct.iter().map(prof).collect::<Result<_>>()?;
    let ap: Vec<ModeProfile> = adjoint.iter().map(prof).collect::<Result<_>>()?;
    let dn: Vec<f64> = dp.iter().map(|p| p.dot(p, grid).re.sqrt()).collect();
    let an: Vec<f64> = ap.iter().map(|p| p.dot(p, grid).re.sqrt()).collect();
    let gram = CMat::from_fn(n, n, |j, k| dp[j].dot(&ap[k], grid));
    // clusters never mix wavenumbers here: different m are exactly orthogonal
    let keyed: Vec<C64> = direct.iter().map(|d| d.lambda).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for g in clusters(&keyed, cluster_tol) {
        let mut by_m: Vec<(i32, Vec<usize>)> = Vec::new();
        for i in g {
            match by_m.iter_mut().find(|(m, _)| *m == direct[i].m) {
                Some((_, v)) => v.push(i),
                None => by_m.push((direct[i].m, vec![i])),
            }
        }
        groups.extend(by_m.into_iter().map(|(_, v)| v));
    }
    let mut group_of = vec![0usize; n];
    for (gi, g) in groups.iter().enumerate() {
        for &i in g {
            group_of[i] = gi;
        }
    }
    let mut max_cross: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            if group_of[j] != group_of[k] && direct[j].m == adjoint[k].m {
                max_cross = max_cross.max(gram[(j, k)].norm() / (dn[j] * an[k]));
            }
        }
    }
    for g in &groups {
        let r = g.len();
        let block = CMat::from_fn(r, r, |a, b| gram[(g[a], g[b])]);
        if r == 1 {
            let c = block[(0, 0)];
            let modulus = c.norm() / (dn[g[0]] * an[g[0]]);
            if modulus < 1e-10 {
                return Err(Error::DegeneratePairing { index: g[0], modulus });
            }
            let s = C64::new(1.0, 0.0) / c.conj();
            for z in adjoint[g[0]].v.iter_mut() {
                *z *= s;
            }
        } else {
            let sv = linalg::singular_values(&block)?;
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = dn[g[0]] * an[g[0]];
            if smin / scale < 1e-10 {
                return Err(Error::DegeneratePairing {
                    index: g[0],
                    modulus: smin / scale,
                });
            }
            let inv = linalg::inverse(&block, "cluster pairing block")?;
            let old: Vec<Vec<C64>> = g.iter().map(|&i| adjoint[i].v.clone()).collect();
            for (b, &kb) in g.iter().enumerate() {
                let mut w = vec![czero(); old[0].len()];
                for (l, ol) in old.iter().enumerate() {
                    let coef = inv[(l, b)].conj();
                    for (wi, oi) in w.iter_mut().zip(ol) {
                        *wi += oi * coef;
                    }
                }
                adjoint[kb].v = w;
            }
        }
    }
    let ap: Vec<ModeProfile> = adjoint.iter().map(prof).collect::<Result<_>>()?;
    let mut defect: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let want = if j == k { 1.0 } else { 0.0 };
            defect = defect.max((dp[j].dot(&ap[k], grid) - want).norm());
        }
    }
    Ok(BiorthReport {
        max_cross_pairing: max_cross,
        gram_defect: defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UcEntry {
    pub kind: PencilKind,
    pub m: i32,
    pub re: f64,
    pub im: f64,
    /// `(|v″(0)| + |v″(1)|) / ‖v‖_{L²}`
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniqueContinuationReport {
    pub passed: bool,
    pub floor: f64,
    pub entries: Vec<UcEntry>,
}

/// Relative wall curvature `(|v″(0)| + |v″(1)|)/‖v‖`; zero for the zero
/// vector.
pub fn wall_margin(grid: &SpectralGrid, v: &[C64]) -> f64 {
    let d2 = grid.apply(2, v);
    let w = grid.quad_weights();
    let nrm = (0..v.len()).map(|i| w[i] * v[i].norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return 0.0;
    }
    (d2[0].norm() + d2[grid.m()].norm()) / nrm
}

/// Check that every supplied mode has a non-vanishing wall curvature, the
/// discrete form of the unique-continuation property.
pub fn unique_continuation_check(
    grid: &SpectralGrid,
    modes: &[(PencilKind, ModeVector)],
    floor: f64,
) -> UniqueContinuationReport {
    let mut passed = true;
    let entries = modes
        .iter()
        .map(|(kind, mv)| {
            let margin = wall_margin(grid, &mv.v);
            // a zero vector never passes, whatever the floor
            if margin <= 0.0 || margin < floor {
                passed = false;
            }
            UcEntry {
                kind: *kind,
                m: mv.m,
                re: mv.lambda.re,
                im: mv.lambda.im,
                margin,
            }
        })
        .collect();
    UniqueContinuationReport {
        passed,
        floor,
        entries,
    }
}

/// Wall values of a direct/adjoint pair, index 0 is `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallData {
    pub v: [C64; 2],
    pub dv: [C64; 2],
    pub d2v: [C64; 2],
    pub du: [C64; 2],
    pub v_star: [C64; 2],
    pub dv_star: [C64; 2],
    pub d2v_star: [C64; 2],
    pub du_star: [C64; 2],
}

impl WallData {
    fn new(grid: &SpectralGrid, m: i32, v: &[C64], w: &[C64]) -> Self {
        let at = |f: &[C64]| [f[0], f[grid.m()]];
        let im = C64::new(0.0, 1.0 / m as f64);
        let dv = grid.apply(1, v);
        let d2v = grid.apply(2, v);
        let dw = grid.apply(1, w);
        let d2w = grid.apply(2, w);
        let du = at(&d2v).map(|z| z * im);
        let du_star = at(&d2w).map(|z| z * im);
        WallData {
            v: at(v),
            dv: at(&dv),
            d2v: at(&d2v),
            du,
            v_star: at(w),
            dv_star: at(&dw),
            d2v_star: at(&d2w),
            du_star,
        }
    }

    /// Tangential component of `∂φ*/∂n` at a wall (`n = ∓e_y`).
    pub fn adjoint_trace(&self, wall: Wall) -> C64 {
        self.du_star[wall.index()] * wall.normal_sign()
    }

    /// Tangential component of `∂φ/∂n` at a wall.
    pub fn direct_trace(&self, wall: Wall) -> C64 {
        self.du[wall.index()] * wall.normal_sign()
    }
}

/// A direct eigenmode together with its biorthonormal adjoint partner.
#[derive(Debug, Clone)]
pub struct EigenMode {
    pub m: i32,
    pub lambda: C64,
    pub direct: ModeProfile,
    pub adjoint: ModeProfile,
    pub wall: WallData,
    pub residual: f64,
    pub adjoint_residual: f64,
    /// `|λ(M) − λ(M′)|` between the working and the check resolution.
    pub drift: f64,
    /// Index of the `−m` mode with eigenvalue `λ̄`.
    pub partner: usize,
}

impl EigenMode {
    pub fn is_unstable(&self) -> bool {
        self.lambda.re < 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub m: i32,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub wall_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WavenumberSummary {
    pub m: i32,
    pub computed: usize,
    pub filtered: usize,
    pub retained: usize,
    pub unstable: usize,
    /// Smallest `Re λ` among physical modes left out of the stable
    /// truncation (`None` if none were dropped).
    pub truncation_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Stable modes kept per wavenumber.
    pub stable_per_wavenumber: usize,
    pub margin: f64,
    pub cluster_tol: f64,
    pub filter_tol: f64,
    pub residual_tol: f64,
    pub uc_floor: f64,
    /// Check resolution for the filter; defaults to `3M/2` rounded to even.
    pub check_resolution: Option<usize>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            stable_per_wavenumber: 40,
            margin: 1e-8,
            cluster_tol: 1e-6,
            filter_tol: 1e-6,
            residual_tol: 1e-8,
            uc_floor: 1e-6,
            check_resolution: None,
        }
    }
}

pub fn check_resolution_for(m: usize) -> usize {
    let r = (3 * m) / 2;
    r + r % 2
}

/// All retained eigenmodes of the channel, sorted by `(Re λ, Im λ, m)`; the
/// first `n_unstable` entries are the unstable ones.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: SpectralGrid,
    pub flow: ChannelFlow,
    pub modes: Vec<EigenMode>,
    pub n_unstable: usize,
    /// `⟨φ_j, φ*_k⟩` over the unstable modes.
    pub gram: CMat,
    pub biorth: BiorthReport,
    /// `max |⟨φ_j, φ*_k⟩ − δ_jk|` over all retained modes of equal `m`.
    pub pairing_defect: f64,
    pub semisimple: SemisimpleReport,
    pub unique_continuation: UniqueContinuationReport,
    pub rows: Vec<SpectrumRow>,
    pub wavenumbers: Vec<WavenumberSummary>,
    pub check_resolution: usize,
    pub options: SpectrumOptions,
}

impl Spectrum {
    pub fn unstable(&self) -> &[EigenMode] {
        &self.modes[..self.n_unstable]
    }

    pub fn stable(&self) -> &[EigenMode] {
        &self.modes[self.n_unstable..]
    }

    pub fn unstable_lambdas(&self) -> Vec<C64> {
        self.unstable().iter().map(|m| m.lambda).collect()
    }

    /// Least `Re λ` over the retained stable modes.
    pub fn stable_gap(&self) -> Option<f64> {
        self.stable().iter().map(|m| m.lambda.re).reduce(f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.residual.max(m.adjoint_residual))
            .fold(0.0, f64::max)
    }
}

struct WavenumberResult {
    pairs: Vec<(Eigenpair, Eigenpair, f64)>,
    rows: Vec<SpectrumRow>,
    filtered_lambdas: Vec<C64>,
    computed: usize,
}

fn nearest(target: C64, set: &[C64]) -> (usize, f64) {
    set.iter()
        .enumerate()
        .map(|(i, z)| (i, (z - target).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .unwrap_or((usize::MAX, f64::INFINITY))
}

fn solve_wavenumber(
    flow: &ChannelFlow,
    grid: &SpectralGrid,
    check: &SpectralGrid,
    m: i32,
    opts: &SpectrumOptions,
) -> Result<WavenumberResult> {
    let direct = solve_spectrum(grid, &assemble_orr_sommerfeld(flow, grid, m)?, 0)?;
    let reference = pencil_eigenvalues(&assemble_orr_sommerfeld(flow, check, m)?)?;
    let mut adjoint = solve_spectrum(grid, &assemble_adjoint(flow, grid, m)?, 0)?;
    let computed = direct.len();
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    let mut lambdas = Vec::new();
    for d in direct {
        let scale = 1.0 + d.lambda.norm();
        let (_, drift) = nearest(d.lambda, &reference);
        if drift >= opts.filter_tol * scale || d.residual > opts.residual_tol {
            continue;
        }
        let adj_l: Vec<C64> = adjoint.iter().map(|a| a.lambda.conj()).collect();
        let (ia, dist) = nearest(d.lambda, &adj_l);
        if dist >= opts.filter_tol * scale || adjoint[ia].residual > opts.residual_tol {
            continue;
        }
        let a = adjoint.remove(ia);
        rows.push(SpectrumRow {
            m,
            re: d.lambda.re,
            im: d.lambda.im,
            residual: d.residual,
            wall_margin: wall_margin(grid, &d.v),
        });
        lambdas.push(d.lambda);
        pairs.push((d, a, drift));
    }
    Ok(WavenumberResult {
        pairs,
        rows,
        filtered_lambdas: lambdas,
        computed,
    })
}

fn conj_pair(e: &Eigenpair) -> Eigenpair {
    Eigenpair {
        m: -e.m,
        lambda: e.lambda.conj(),
        v: e.v.iter().map(|z| z.conj()).collect(),
        residual: e.residual,
    }
}

/// Compute, filter, pair and biorthonormalize the spectrum over the flow's
/// wavenumber set. Wavenumbers `m > 0` are solved (in parallel); the `−m`
/// modes are their exact conjugates.
pub fn compute_spectrum(flow: &ChannelFlow, grid: &SpectralGrid, opts: &SpectrumOptions) -> Result<Spectrum> {
    let check_m = opts.check_resolution.unwrap_or_else(|| check_resolution_for(grid.m()));
    let check = build_grid(check_m)?;
    let positive = flow.positive_wavenumbers();
    let results: Vec<(i32, WavenumberResult)> = positive
        .par_iter()
        .map(|&m| solve_wavenumber(flow, grid, &check, m, opts).map(|r| (m, r)))
        .collect::<Result<_>>()?;

    let mut all_lambdas: Vec<C64> = Vec::new();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    // (direct, adjoint, drift) for both signs of m
    let mut kept: Vec<(Eigenpair, Eigenpair, f64)> = Vec::new();
    for (m, r) in results {
        all_lambdas.extend(r.filtered_lambdas.iter().copied());
        all_lambdas.extend(r.filtered_lambdas.iter().map(|z| z.conj()));
        let n_unst = r.pairs.iter().filter(|p| p.0.lambda.re < 0.0).count();
        let limit = n_unst + opts.stable_per_wavenumber;
        let threshold = r.pairs.get(limit).map(|p| p.0.lambda.re);
        let filtered = r.pairs.len();
        for row in &r.rows {
            rows.push(row.clone());
            rows.push(SpectrumRow {
                m: -m,
                im: -row.im,
                ..row.clone()
            });
        }
        for (d, a, drift) in r.pairs.into_iter().take(limit) {
            kept.push((conj_pair(&d), conj_pair(&a), drift));
            kept.push((d, a, drift));
        }
        summaries.push(WavenumberSummary {
            m,
            computed: r.computed,
            filtered,
            retained: filtered.min(limit),
            unstable: n_unst,
            truncation_threshold: threshold,
        });
    }
    all_lambdas.sort_by(cmp_lambda);
    count_unstable(&all_lambdas, opts.margin)?;

    kept.sort_by(|a, b| cmp_lambda(&a.0.lambda, &b.0.lambda).then(a.0.m.cmp(&b.0.m)));
    rows.sort_by(|a, b| {
        cmp_lambda(&C64::new(a.re, a.im), &C64::new(b.re, b.im)).then(a.m.cmp(&b.m))
    });
    let n_unstable = kept.iter().filter(|p| p.0.lambda.re < -opts.margin).count();

    let direct: Vec<ModeVector> = kept
        .iter()
        .map(|(d, _, _)| ModeVector {
            m: d.m,
            lambda: d.lambda,
            v: d.v.clone(),
        })
        .collect();
    let mut adjoint: Vec<ModeVector> = kept
        .iter()
        .map(|(d, a, _)| ModeVector {
            m: a.m,
            lambda: d.lambda,
            v: a.v.clone(),
        })
        .collect();

    let semisimple = check_semisimple(&direct[..n_unstable], opts.cluster_tol);
    let biorth = {
        let mut unst = adjoint[..n_unstable].to_vec();
        let r = biorthonormalize(grid, &direct[..n_unstable], &mut unst, opts.cluster_tol)?;
        adjoint[..n_unstable].clone_from_slice(&unst);
        r
    };
    // Stable modes are strongly non-normal (eigenvalue condition numbers of
    // 1e5 are common), so their exact adjoints are only approximately
    // biorthogonal. They are replaced by the dual basis of the retained
    // direct modes of the same wavenumber.
    for &m in flow.wavenumbers() {
        let idx: Vec<usize> = (0..direct.len()).filter(|&i| direct[i].m == m).collect();
        let d: Vec<ModeVector> = idx.iter().map(|&i| direct[i].clone()).collect();
        let mut a: Vec<ModeVector> = idx.iter().map(|&i| adjoint[i].clone()).collect();
        let replace: Vec<usize> = (0..idx.len()).filter(|&k| idx[k] >= n_unstable).collect();
        dual_complete(grid, &d, &mut a, &replace)?;
        for (k, &i) in idx.iter().enumerate() {
            adjoint[i] = a[k].clone();
        }
    }

    let mut uc_modes = Vec::new();
    for j in 0..n_unstable {
        uc_modes.push((PencilKind::Direct, direct[j].clone()));
        uc_modes.push((PencilKind::Adjoint, adjoint[j].clone()));
    }
    let unique_continuation = unique_continuation_check(grid, &uc_modes, opts.uc_floor);

    let mut modes: Vec<EigenMode> = Vec::with_capacity(kept.len());
    for (j, (d, a, drift)) in kept.iter().enumerate() {
        let w = &adjoint[j].v;
        modes.push(EigenMode {
            m: d.m,
            lambda: d.lambda,
            direct: ModeProfile::from_stream(grid, d.m, d.v.clone())?,
            adjoint: ModeProfile::from_stream(grid, d.m, w.clone())?,
            wall: WallData::new(grid, d.m, &d.v, w),
            residual: d.residual,
            adjoint_residual: a.residual,
            drift: *drift,
            partner: usize::MAX,
        });
    }
    for j in 0..modes.len() {
        let (m, l) = (modes[j].m, modes[j].lambda);
        let p = (0..modes.len())
            .filter(|&k| modes[k].m == -m)
            .min_by(|&a, &b| {
                (modes[a].lambda - l.conj())
                    .norm()
                    .partial_cmp(&(modes[b].lambda - l.conj()).norm())
                    .unwrap_or(Ordering::Equal)
            })
            .ok_or_else(|| Error::Mismatch(format!("mode {j} has no conjugate partner")))?;
        modes[j].partner = p;
    }

    let gram = CMat::from_fn(n_unstable, n_unstable, |j, k| {
        modes[j].direct.dot(&modes[k].adjoint, grid)
    });
    let mut pairing_defect: f64 = 0.0;
    for j in 0..modes.len() {
        for k in 0..modes.len() {
            if modes[j].m == modes[k].m {
                let want = if j == k { 1.0 } else { 0.0 };
                pairing_defect =
                    pairing_defect.max((modes[j].direct.dot(&modes[k].adjoint, grid) - want).norm());
            }
        }
    }

    Ok(Spectrum {
        grid: grid.clone(),
        flow: flow.clone(),
        modes,
        n_unstable,
        gram,
        biorth,
        pairing_defect,
        semisimple,
        unique_continuation,
        rows,
        wavenumbers: summaries,
        check_resolution: check_m,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_unstable_examples() {
        let l = |r: f64| C64::new(r, 0.0);
        assert_eq!(count_unstable(&[l(-0.1), l(0.2), l(1.0)], 1e-6).unwrap(), 1);
        assert_eq!(count_unstable(&[l(0.1), l(0.2)], 1e-6).unwrap(), 0);
        assert!(matches!(
            count_unstable(&[l(1e-9)], 1e-6),
            Err(Error::NeutralEigenvalue { .. })
        ));
    }

    #[test]
    fn zero_wavenumber_rejected() {
        let f = ChannelFlow::new(1.0, 0.0, 1).unwrap();
        let g = build_grid(16).unwrap();
        assert!(assemble_orr_sommerfeld(&f, &g, 0).is_err());
        assert!(assemble_adjoint(&f, &g, 0).is_err());
    }

    #[test]
    fn conjugate_wavenumber_symmetry() {
        let f = ChannelFlow::new(0.01, 1.0, 2).unwrap();
        let g = build_grid(16).unwrap();
        let p = assemble_orr_sommerfeld(&f, &g, 2).unwrap();
        let q = assemble_orr_sommerfeld(&f, &g, -2).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((q.a[(i, j)].conj() - p.a[(i, j)]).norm() < 1e-12 * (1.0 + p.a[(i, j)].norm()));
            }
        }
    }

    #[test]
    fn stokes_adjoint_equals_direct() {
        let f = ChannelFlow::new(0.5, 0.0, 1).unwrap();
        let g = build_grid(16).unwrap();
        let p = assemble_orr_sommerfeld(&f, &g, 1).unwrap();
        let q = assemble_adjoint(&f, &g, 1).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((p.a[(i, j)] - q.a[(i, j)]).norm() <= 1e-12 * (1.0 + p.a[(i, j)].norm()));
            }
        }
    }

    #[test]
    fn jordan_block_is_not_semisimple() {
        let j = CMat::from_fn(2, 2, |i, k| C64::new(if i == k || (i == 0 && k == 1) { 1.0 } else { 0.0 }, 0.0));
        let (vals, vecs) = linalg::eig(&j).unwrap();
        let modes: Vec<ModeVector> = (0..2)
            .map(|c| ModeVector {
                m: 1,
                lambda: vals[c],
                v: vec![vecs[(0, c)], vecs[(1, c)]],
            })
            .collect();
        let r = check_semisimple(&modes, 1e-6);
        assert!(!r.passed);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].algebraic, 2);
        assert_eq!(r.clusters[0].geometric, 1);
    }

    #[test]
    fn separated_and_conjugate_eigenvalues_are_semisimple() {
        let e = |m: i32, l: C64, k: usize| {
            let mut v = vec![czero(); 4];
            v[k] = C64::new(1.0, 0.0);
            ModeVector { m, lambda: l, v }
        };
        let l = C64::new(-0.3, 19.0);
        let r = check_semisimple(&[e(2, l, 0), e(-2, l.conj(), 1), e(1, C64::new(-0.1, 0.0), 2)], 1e-6);
        assert!(r.passed);
        assert_eq!(r.clusters.len(), 3);
        assert!(r.clusters.iter().all(|c| c.algebraic == 1 && c.geometric == 1));
    }

    #[test]
    fn zero_vector_fails_unique_continuation() {
        let g = build_grid(16).unwrap();
        let z = ModeVector {
            m: 1,
            lambda: C64::new(-1.0, 0.0),
            v: vec![czero(); g.len()],
        };
        let r = unique_continuation_check(&g, &[(PencilKind::Direct, z)], 0.0);
        assert!(!r.passed);
    }
}
