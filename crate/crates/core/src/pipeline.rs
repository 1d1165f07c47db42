//! Orchestration of the command-line stages and their artifacts.

use crate::channel::ChannelFlow;
use crate::config::RunConfig;
use crate::controller::{self, obliqueness_report, AlphaProfile, FeedbackLaw, GainParameters, Variant};
use crate::export::{self, matrix};
use crate::galerkin;
use crate::lift::{self, LiftedSet};
use crate::sim::{self, ModalSystem, Trajectory};
use crate::spectral::{build_grid, SpectralGrid};
use crate::spectrum::{self, compute_spectrum, pencil_eigenvalues, Spectrum, SpectrumOptions};
use crate::{Error, Result, C64};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Exit codes of the command-line tool.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SPECTRUM: i32 = 3;
pub const EXIT_GAINS: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

pub const DUALITY_TOL: f64 = 1e-6;
pub const BIORTH_TOL: f64 = 1e-8;
pub const COND_F_MAX: f64 = 1e8;
pub const MISMATCH_TOL: f64 = 1e-8;
pub const NEUTRALITY_TOL: f64 = 1e-8;
pub const NORMAL_DEFECT_TOL: f64 = 1e-10;
const SURROGATE: &str = "quadratic Galerkin surrogate on retained eigenmodes, not a Navier-Stokes solver";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Design,
    Simulate,
    Verify,
    Sweep,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        match s {
            "spectrum" => Some(Command::Spectrum),
            "design" => Some(Command::Design),
            "simulate" => Some(Command::Simulate),
            "verify" => Some(Command::Verify),
            "sweep" => Some(Command::Sweep),
            _ => None,
        }
    }
}

/// A named pass/fail check; `code` is the exit code used when it fails.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    #[serde(skip)]
    pub code: i32,
}

fn cert(name: &str, passed: bool, value: f64, bound: f64, code: i32) -> Certificate {
    Certificate {
        name: name.into(),
        passed,
        value,
        bound,
        code,
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub certificates: Vec<Certificate>,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    /// First failing certificate's code, 0 if all pass.
    pub fn exit_code(&self) -> i32 {
        self.certificates
            .iter()
            .find(|c| !c.passed)
            .map_or(EXIT_PASS, |c| c.code)
    }
}

pub fn spectrum_options(cfg: &RunConfig) -> SpectrumOptions {
    SpectrumOptions {
        stable_per_wavenumber: cfg.j,
        margin: cfg.margin,
        cluster_tol: cfg.cluster_tol,
        ..SpectrumOptions::default()
    }
}

pub fn build_spectrum(cfg: &RunConfig) -> Result<Spectrum> {
    let flow = ChannelFlow::new(cfg.nu, cfg.a, cfg.m_x)?;
    let grid = build_grid(cfg.m)?;
    compute_spectrum(&flow, &grid, &spectrum_options(cfg))
}

/// Gains, law and lifts for a spectrum with at least one unstable mode.
#[derive(Debug, Clone)]
pub struct Design {
    pub gains: GainParameters,
    pub law: FeedbackLaw,
    pub lifts: LiftedSet,
}

pub fn build_design(spectrum: &Spectrum, alpha0: f64, variant: Variant) -> Result<Option<Design>> {
    if spectrum.n_unstable == 0 {
        return Ok(None);
    }
    let gains = controller::select_gains(&spectrum.unstable_lambdas(), spectrum.flow.nu())?;
    let law = controller::build_variant(spectrum, &gains, alpha0, variant)?;
    let lifts = lift::lift_law(&spectrum.flow, &spectrum.grid, &law)?;
    Ok(Some(Design { gains, law, lifts }))
}

fn spectrum_certificates(s: &Spectrum) -> Vec<Certificate> {
    vec![
        cert("semisimple", s.semisimple.passed, s.semisimple.clusters.len() as f64, 0.0, EXIT_SPECTRUM),
        cert(
            "unique_continuation",
            s.unique_continuation.passed,
            s.unique_continuation.entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min),
            s.unique_continuation.floor,
            EXIT_SPECTRUM,
        ),
        cert("biorthogonality", s.biorth.gram_defect <= BIORTH_TOL, s.biorth.gram_defect, BIORTH_TOL, EXIT_SPECTRUM),
        cert(
            "residual",
            s.max_residual() <= s.options.residual_tol,
            s.max_residual(),
            s.options.residual_tol,
            EXIT_SPECTRUM,
        ),
    ]
}

fn hypotheses_json(s: &Spectrum) -> Value {
    json!({
        "n_unstable": s.n_unstable,
        "unstable": s.unstable().iter().map(|m| json!({"m": m.m, "lambda": [m.lambda.re, m.lambda.im], "drift": m.drift})).collect::<Vec<_>>(),
        "semisimple": s.semisimple,
        "unique_continuation": s.unique_continuation,
        "biorthogonality": s.biorth,
        "pairing_defect": s.pairing_defect,
        "max_residual": s.max_residual(),
        "stable_gap": s.stable_gap(),
        "check_resolution": s.check_resolution,
        "wavenumbers": s.wavenumbers,
    })
}

fn write_spectrum_csv(path: &Path, cfg: &RunConfig, s: &Spectrum) -> Result<()> {
    let header: Vec<String> = ["m", "re", "im", "residual", "wall_margin"].iter().map(|h| h.to_string()).collect();
    export::write_csv(
        path,
        cfg,
        &header,
        s.rows.iter().map(|r| vec![r.m as f64, r.re, r.im, r.residual, r.wall_margin]),
    )
}

fn design_certificates(d: &Design) -> Vec<Certificate> {
    let gc = d.gains.certificate();
    let circulation = d.law.alpha.circulation(&d.law.walls);
    vec![
        cert(
            "gain_inequality",
            gc.passed,
            gc.lhs.iter().copied().fold(f64::INFINITY, f64::min),
            0.0,
            EXIT_GAINS,
        ),
        cert("trace_gram_condition", d.law.cond_f < COND_F_MAX, d.law.cond_f, COND_F_MAX, EXIT_SPECTRUM),
        cert("circulation", circulation.abs() <= 1e-12, circulation, 1e-12, EXIT_VERIFY),
    ]
}

fn design_json(s: &Spectrum, d: &Design) -> Value {
    let law = &d.law;
    let grid = &s.grid;
    let modes: Vec<Value> = s
        .unstable()
        .iter()
        .map(|m| {
            json!({
                "m": m.m,
                "lambda": [m.lambda.re, m.lambda.im],
                "adjoint_trace": [
                    export::complex_pair(m.wall.adjoint_trace(crate::channel::Wall::Lower)),
                    export::complex_pair(m.wall.adjoint_trace(crate::channel::Wall::Upper)),
                ],
                "adjoint_v": m.adjoint.v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "adjoint_u": m.adjoint.u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let real = law.real.as_ref().map(|r| {
        json!({
            "t": matrix(&r.t),
            "lambda": r.lambda,
            "q": r.q,
            "alpha_star": r.alpha_star,
            "gain": r.gain,
            "imag_defect": r.imag_defect,
        })
    });
    json!({
        "variant": law.variant.name(),
        "n_unstable": s.n_unstable,
        "eigenvalues": s.unstable_lambdas().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "k": d.gains.k_shift,
        "eta": d.gains.eta,
        "mu": d.gains.mu.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "gamma0": d.gains.gamma0(),
        "gain_certificate": d.gains.certificate(),
        "F": matrix(&law.f),
        "X": matrix(&law.x),
        "cond_F": law.cond_f,
        "alpha": law.alpha,
        "walls": law.walls,
        "law": matrix(&law.law),
        "expected_pairing": matrix(&law.expected_pairing),
        "real_law": real,
        "y": grid.nodes(),
        "modes": modes,
    })
}

fn trajectory_csv(path: &Path, cfg: &RunConfig, tr: &Trajectory) -> Result<()> {
    let nu = tr.z_unstable.first().map_or(0, |z| z.len());
    let ns = tr.z_stable.first().map_or(0, |z| z.len());
    let mut header = vec!["t".to_string()];
    for j in 0..nu + ns {
        header.push(format!("z{j}_re"));
        header.push(format!("z{j}_im"));
    }
    header.push("state_norm".into());
    header.push("control_norm".into());
    let rows = (0..tr.times.len()).map(|i| {
        let mut r = Vec::with_capacity(header.len());
        r.push(tr.times[i]);
        for z in tr.z_unstable[i].iter().chain(&tr.z_stable[i]) {
            r.push(z.re);
            r.push(z.im);
        }
        r.push(tr.state_norm[i]);
        r.push(tr.control_norm[i]);
        r
    });
    export::write_csv(path, cfg, &header, rows)
}

/// Linear open/closed-loop runs from the seeded random state.
pub struct SimulationResult {
    pub open: Trajectory,
    pub closed: Trajectory,
    pub certificates: Vec<Certificate>,
    pub summary: Value,
}

pub fn run_simulation(cfg: &RunConfig, s: &Spectrum, design: Option<&Design>) -> Result<SimulationResult> {
    let init = sim::random_initial(s, cfg.seed, cfg.stable_weight)?;
    let open = sim::simulate_open_loop(s, &init, cfg.t_end, cfg.dt)?;
    let closed = match design {
        Some(d) => {
            let sys = ModalSystem::closed_loop(s, &d.law, &d.lifts)?;
            sim::simulate_linear(&sys, &init, cfg.t_end, cfg.dt)?
        }
        None => open.clone(),
    };
    let gamma0 = design.map_or(f64::INFINITY, |d| d.gains.gamma0());
    let gap = s.stable_gap().unwrap_or(f64::INFINITY);
    let target = 0.9 * gamma0.min(gap);
    let long_enough = (-gamma0.min(gap) * cfg.t_end).exp() <= 1e-3;
    let fit = closed.gamma_fit.unwrap_or(f64::NAN);
    let mismatch = closed.controller_mismatch.iter().copied().fold(0.0, f64::max);
    let realness = closed.realness_defect.iter().copied().fold(0.0, f64::max);
    let mut certs = vec![
        cert("closed_loop_rate", fit >= target, fit, target, EXIT_VERIFY),
        cert("modal_bound", closed.mode_bound_ok, 0.0, 0.0, EXIT_VERIFY),
        cert("controller_consistency", mismatch <= MISMATCH_TOL, mismatch, MISMATCH_TOL, EXIT_VERIFY),
        cert("realness", realness <= 1e-8, realness, 1e-8, EXIT_VERIFY),
    ];
    if long_enough {
        certs.push(cert("closed_loop_ratio", closed.decay_ratio() <= 1e-3, closed.decay_ratio(), 1e-3, EXIT_VERIFY));
        if s.n_unstable > 0 {
            certs.push(cert("open_loop_growth", open.decay_ratio() >= 10.0, open.decay_ratio(), 10.0, EXIT_VERIFY));
        }
    }
    let summary = json!({
        "n_unstable": s.n_unstable,
        "variant": cfg.variant.name(),
        "gamma0": if gamma0.is_finite() { Some(gamma0) } else { None },
        "stable_gap": s.stable_gap(),
        "gamma_fit": closed.gamma_fit,
        "gamma_fit_open": open.gamma_fit,
        "closed_ratio": closed.decay_ratio(),
        "open_ratio": open.decay_ratio(),
        "horizon_reaches_1e-3": long_enough,
        "max_controller_mismatch": mismatch,
        "max_realness_defect": realness,
    });
    Ok(SimulationResult {
        open,
        closed,
        certificates: certs,
        summary,
    })
}

/// Obliqueness of the law for several `alpha0` at the state `init`.
pub fn obliqueness_sweep(s: &Spectrum, variant: Variant, alphas: &[f64], seed: u64) -> Result<Vec<controller::ObliquenessReport>> {
    let init = sim::random_initial(s, seed, 0.3)?;
    let mut c = init.unstable.clone();
    c.extend(init.stable.iter().copied());
    let state = sim::modal_field(s, &c);
    let gains = controller::select_gains(&s.unstable_lambdas(), s.flow.nu())?;
    alphas
        .iter()
        .map(|&a| {
            let law = controller::build_variant(s, &gains, a, variant)?;
            let out = controller::evaluate_control(s, &law, &state)?;
            obliqueness_report(&law, &out, 256)
        })
        .collect()
}

fn verify(cfg: &RunConfig, s: &Spectrum, design: Option<&Design>) -> Result<(Vec<Certificate>, Value)> {
    let mut certs = spectrum_certificates(s);
    let neutral = galerkin::energy_neutrality(s, cfg.seed)?;
    certs.push(cert("energy_neutrality", neutral <= NEUTRALITY_TOL, neutral, NEUTRALITY_TOL, EXIT_VERIFY));
    let mut body = json!({
        "n_unstable": s.n_unstable,
        "hypotheses": hypotheses_json(s),
        "energy_neutrality": neutral,
    });
    let Some(d) = design else {
        body["controller"] = json!("not needed: no unstable modes");
        return Ok((certs, body));
    };
    certs.extend(design_certificates(d));
    let duality = lift::verify_duality(s, d.gains.k_shift, &d.lifts.fields, &d.law.expected_pairing)?;
    certs.push(cert(
        "duality",
        duality.max_scaled_residual <= DUALITY_TOL,
        duality.max_scaled_residual,
        DUALITY_TOL,
        EXIT_VERIFY,
    ));
    let adj = controller::adjoint_traces(s);
    let delta = match d.law.variant {
        Variant::Real => None,
        _ => Some(d.law.delta_defect(&adj)),
    };
    if let Some(delta) = delta {
        certs.push(cert("delta_pairing", delta <= 1e-8, delta, 1e-8, EXIT_VERIFY));
    }
    let obliq = match d.law.alpha {
        AlphaProfile::Constant { .. } => {
            let alphas = [1.0, 10.0, 100.0];
            let reps = obliqueness_sweep(s, d.law.variant, &alphas, cfg.seed)?;
            let increasing = reps.windows(2).all(|w| w[1].min_abs_cos > w[0].min_abs_cos);
            let normal = reps.iter().map(|r| r.normal_defect / r.normal_scalar.abs().max(1e-300)).fold(0.0, f64::max);
            certs.push(cert("obliqueness_increasing", increasing, reps[2].min_abs_cos, 0.0, EXIT_VERIFY));
            certs.push(cert("obliqueness_large_alpha", reps[2].min_abs_cos > 0.99, reps[2].min_abs_cos, 0.99, EXIT_VERIFY));
            certs.push(cert("normal_component", normal <= NORMAL_DEFECT_TOL, normal, NORMAL_DEFECT_TOL, EXIT_VERIFY));
            json!(reps)
        }
        AlphaProfile::Cosine { .. } => json!("not applicable: α vanishes at points of the active wall"),
    };
    let sim = run_simulation(cfg, s, Some(d))?;
    let consistency: Vec<Certificate> = sim
        .certificates
        .iter()
        .filter(|c| matches!(c.name.as_str(), "controller_consistency" | "modal_bound" | "realness"))
        .cloned()
        .collect();
    certs.extend(consistency);
    body["duality"] = json!(duality);
    body["delta_defect"] = json!(delta);
    body["obliqueness"] = obliq;
    body["gain_certificate"] = json!(d.gains.certificate());
    body["trajectory"] = sim.summary;
    Ok((certs, body))
}

/// Galerkin stability-ball estimate and quadratic-scaling check.
pub fn galerkin_sweep(cfg: &RunConfig, s: &Spectrum, d: &Design) -> Result<(Vec<Certificate>, Value)> {
    let sys = ModalSystem::closed_loop(s, &d.law, &d.lifts)?;
    let gs = galerkin::build_galerkin(s, &d.law, &d.lifts, &sys, cfg.galerkin_stable)?;
    let init = sim::random_initial(s, cfg.seed, cfg.stable_weight)?;
    let dir = galerkin::direction(&gs, &init);
    let radius = galerkin::stability_radius(&gs, &d.law.expected_pairing, &dir, cfg.t_end, cfg.dt)?;
    let ratio = galerkin::richardson_ratio(&gs, &d.law.expected_pairing, &dir, 1e-4, cfg.t_end, cfg.dt)?;
    let rate = radius.rate_at_rho.unwrap_or(f64::NAN);
    let certs = vec![
        cert("stability_radius", radius.rho_star > 0.0, radius.rho_star, 0.0, EXIT_VERIFY),
        cert("rate_inside_ball", rate >= 0.8 * gs.gamma0, rate, 0.8 * gs.gamma0, EXIT_VERIFY),
        cert(
            "failure_outside_ball",
            radius.failing_amplitude.is_some(),
            radius.failing_amplitude.unwrap_or(f64::NAN),
            10.0 * radius.rho_star,
            EXIT_VERIFY,
        ),
        cert("quadratic_scaling", (3.5..=4.5).contains(&ratio), ratio, 4.0, EXIT_VERIFY),
    ];
    let body = json!({
        "model": SURROGATE,
        "n_modes": gs.dim(),
        "gamma0": gs.gamma0,
        "radius": radius,
        "richardson_ratio": ratio,
        "richardson_eps": 1e-4,
    });
    Ok((certs, body))
}

fn certificates_json(c: &[Certificate]) -> Value {
    json!({
        "passed": c.iter().all(|c| c.passed),
        "certificates": c,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(x), Some(y)) = (a.as_object_mut(), b.as_object()) {
        for (k, v) in y {
            x.insert(k.clone(), v.clone());
        }
    }
    a
}

/// Run one command and write its artifacts into `out`.
pub fn run_command(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    std::fs::create_dir_all(out)?;
    let s = build_spectrum(cfg)?;
    let mut artifacts = Vec::new();
    let mut emit = |name: &str| {
        let p = out.join(name);
        artifacts.push(p.clone());
        p
    };
    let certificates = match cmd {
        Command::Spectrum => {
            write_spectrum_csv(&emit("spectrum.csv"), cfg, &s)?;
            let c = spectrum_certificates(&s);
            export::write_json(&emit("hypotheses.json"), cfg, &merge(hypotheses_json(&s), certificates_json(&c)))?;
            c
        }
        Command::Design => {
            let d = build_design(&s, cfg.alpha0, cfg.variant)?;
            let (c, body) = match &d {
                Some(d) => (design_certificates(d), design_json(&s, d)),
                None => (vec![], json!({"n_unstable": 0, "controller": "not needed: no unstable modes"})),
            };
            export::write_json(&emit("design.json"), cfg, &merge(body, certificates_json(&c)))?;
            c
        }
        Command::Simulate => {
            let d = build_design(&s, cfg.alpha0, cfg.variant)?;
            let r = run_simulation(cfg, &s, d.as_ref())?;
            trajectory_csv(&emit("trajectory_open.csv"), cfg, &r.open)?;
            trajectory_csv(&emit("trajectory_closed.csv"), cfg, &r.closed)?;
            export::write_json(&emit("summary.json"), cfg, &merge(r.summary, certificates_json(&r.certificates)))?;
            r.certificates
        }
        Command::Verify => {
            let d = build_design(&s, cfg.alpha0, cfg.variant)?;
            let (c, body) = verify(cfg, &s, d.as_ref())?;
            export::write_json(&emit("verify.json"), cfg, &merge(body, certificates_json(&c)))?;
            c
        }
        Command::Sweep => {
            let d = build_design(&s, cfg.alpha0, cfg.variant)?.ok_or_else(|| {
                Error::InvalidParameter("the stability-ball sweep needs at least one unstable mode".into())
            })?;
            let (c, body) = galerkin_sweep(cfg, &s, &d)?;
            export::write_json(&emit("sweep.json"), cfg, &merge(body, certificates_json(&c)))?;
            c
        }
    };
    Ok(CommandOutcome {
        certificates,
        artifacts,
    })
}

/// One point of the instability sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub nu: f64,
    pub a: f64,
    pub reynolds: f64,
    /// Unstable eigenvalues (both signs of `m`) at the working resolution.
    pub unstable: Vec<(i32, C64)>,
    /// Largest relative change of an unstable eigenvalue between the two
    /// resolutions.
    pub cross_resolution: f64,
}

impl SweepPoint {
    pub fn qualifies(&self, min_unstable: usize, tol: f64) -> bool {
        self.unstable.len() >= min_unstable && self.cross_resolution <= tol
    }
}

fn unstable_at(flow: &ChannelFlow, grid: &SpectralGrid, m: i32) -> Result<Vec<C64>> {
    let p = spectrum::assemble_orr_sommerfeld(flow, grid, m)?;
    Ok(pencil_eigenvalues(&p)?.into_iter().filter(|l| l.re < 0.0).collect())
}

/// Scan `a = 16 ν² Re` over the given `ν` and Poiseuille Reynolds numbers,
/// comparing the unstable eigenvalues at resolutions `m1` and `m2`.
pub fn instability_sweep(nus: &[f64], reynolds: &[f64], max_m: u32, m1: usize, m2: usize) -> Result<Vec<SweepPoint>> {
    let (g1, g2) = (build_grid(m1)?, build_grid(m2)?);
    let mut out = Vec::new();
    for &nu in nus {
        for &re in reynolds {
            let a = 16.0 * nu * nu * re;
            let flow = ChannelFlow::new(nu, a, max_m)?;
            let mut unstable = Vec::new();
            let mut worst: f64 = 0.0;
            for m in 1..=max_m as i32 {
                let l1 = unstable_at(&flow, &g1, m)?;
                let all2 = pencil_eigenvalues(&spectrum::assemble_orr_sommerfeld(&flow, &g2, m)?)?;
                for l in &l1 {
                    let near = all2
                        .iter()
                        .map(|z| (z - l).norm())
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max(near / l.norm());
                    unstable.push((m, *l));
                    unstable.push((-m, l.conj()));
                }
            }
            out.push(SweepPoint {
                nu,
                a,
                reynolds: re,
                unstable,
                cross_resolution: worst,
            });
        }
    }
    Ok(out)
}
