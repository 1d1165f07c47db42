//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use oseen_stab::channel::ChannelFlow;
use oseen_stab::config::RunConfig;
use oseen_stab::controller::{adjoint_traces, closed_loop_rate, eta_lower_bound, gain_lhs, Variant};
use oseen_stab::lift::verify_duality;
use oseen_stab::pipeline::{build_design, galerkin_sweep, instability_sweep, obliqueness_sweep, run_simulation, Design};
use oseen_stab::spectral::build_grid;
use oseen_stab::spectrum::{assemble_orr_sommerfeld, compute_spectrum, pencil_eigenvalues, SpectrumOptions};
use oseen_stab::C64;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn by_real_part(mut l: Vec<C64>) -> Vec<C64> {
    l.sort_by(|a, b| a.re.total_cmp(&b.re));
    l
}

fn design(variant: Variant) -> Result<Design, String> {
    build_design(common::spectrum(), 1.0, variant)
        .map_err(err)?
        .ok_or_else(|| "no unstable modes".to_string())
}

fn horizon_config(variant: Variant) -> Result<RunConfig, String> {
    let gamma0 = common::gains().gamma0();
    Ok(RunConfig {
        nu: common::NU,
        a: common::A,
        m: common::M,
        variant,
        t_end: (1000.0f64).ln() / gamma0,
        ..RunConfig::default()
    })
}

fn spectral_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let flow = ChannelFlow::new(cfg.nu, cfg.a, cfg.m_x).map_err(err)?;
    let opts = SpectrumOptions::default();
    for m in [64, 96] {
        compute_spectrum(&flow, &build_grid(m).map_err(err)?, &opts).map_err(err)?;
    }
    let (g1, g2) = (build_grid(64).map_err(err)?, build_grid(96).map_err(err)?);
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, C64::new(0.0, 0.0));
    for m in 1..=cfg.m_x as i32 {
        let l1 = by_real_part(pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &g1, m).map_err(err)?).map_err(err)?);
        let l2 = pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &g2, m).map_err(err)?).map_err(err)?;
        for l in &l1[..20] {
            let d = l2.iter().map(|z| (z - l).norm()).fold(f64::INFINITY, f64::min) / l.norm();
            if d > worst {
                worst = d;
                worst_at = (m, *l);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && secs < 30.0,
        format!(
            "max relative change {worst:.2e} (m={}, λ={:.6}) bound 1e-8; {secs:.1} s bound 30 s",
            worst_at.0, worst_at.1
        ),
    ))
}

fn stokes_limit() -> Outcome {
    let nu = 0.002;
    let flow = ChannelFlow::new(nu, 0.0, 3).map_err(err)?;
    let grid = build_grid(64).map_err(err)?;
    // every eigenvalue that survives the resolution filter
    let opts = SpectrumOptions {
        stable_per_wavenumber: usize::MAX,
        ..SpectrumOptions::default()
    };
    let s = compute_spectrum(&flow, &grid, &opts).map_err(err)?;
    let imag = s.modes.iter().map(|m| m.lambda.im.abs()).fold(0.0, f64::max);
    let min_re = s.modes.iter().map(|m| m.lambda.re).fold(f64::INFINITY, f64::min);
    let mut root_err: f64 = 0.0;
    let mut tail = 0;
    for m in 1..=3 {
        let smallest = s.modes.iter().filter(|e| e.m == m).map(|e| e.lambda.re).fold(f64::INFINITY, f64::min);
        let (even, _) = common::stokes_roots(nu, m as f64);
        root_err = root_err.max((smallest - even).abs() / even);
        let raw = pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &grid, m).map_err(err)?).map_err(err)?;
        tail += raw.iter().filter(|z| z.im.abs() > 1e-8).count();
    }
    Ok((
        imag <= 1e-8 && min_re > 0.0 && root_err <= 1e-8,
        format!(
            "{} resolved eigenvalues: max |Im λ| {imag:.2e}, min Re λ {min_re:.4e}, characteristic root error {root_err:.2e} ({tail} complex unresolved tail eigenvalues filtered)",
            s.modes.len()
        ),
    ))
}

fn instability_search() -> Outcome {
    let points = instability_sweep(&[0.002, 0.003, 0.004], &[2500.0, 5000.0, 10000.0, 20000.0], 3, 64, 96).map_err(err)?;
    let Some(p) = points.iter().find(|p| p.qualifies(2, 1e-8)) else {
        return Ok((false, format!("no qualifying point among {}", points.len())));
    };
    let frozen = (p.nu - common::NU).abs() < 1e-15 && (p.a - common::A).abs() < 1e-12;
    Ok((
        frozen,
        format!(
            "nu={} a={} (Re={}) N={} cross-resolution {:.2e}; frozen configuration {}",
            p.nu,
            p.a,
            p.reynolds,
            p.unstable.len(),
            p.cross_resolution,
            if frozen { "matches" } else { "differs" }
        ),
    ))
}

fn hypotheses() -> Outcome {
    let s = common::spectrum();
    let law = common::law(Variant::Complex, 1.0);
    let uc = &s.unique_continuation;
    let min_uc = uc.entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    let ok = s.semisimple.passed && law.cond_f < 1e8 && !uc.entries.is_empty() && min_uc >= 1e-6;
    Ok((
        ok,
        format!(
            "semisimple {}, cond(F) {:.3e}, min wall margin {min_uc:.3e} over {} modes",
            s.semisimple.passed,
            law.cond_f,
            uc.entries.len()
        ),
    ))
}

fn biorthogonality() -> Outcome {
    let d = common::spectrum().biorth.gram_defect;
    Ok((d <= 1e-8, format!("‖gram − I‖_max {d:.2e}")))
}

fn duality() -> Outcome {
    let s = common::spectrum();
    let (law, lifts) = common::design(Variant::Complex, 1.0);
    let r = verify_duality(s, law.gains.k_shift, &lifts.fields, &law.expected_pairing).map_err(err)?;
    Ok((
        r.max_scaled_residual <= 1e-6,
        format!("max |λ+k|/ν-scaled residual {:.2e}", r.max_scaled_residual),
    ))
}

fn gain_certificate() -> Outcome {
    let g = common::gains();
    let cert = g.certificate();
    let rates_ok = g.lambdas.iter().all(|&l| closed_loop_rate(l, g.k_shift, g.eta, g.nu).re > 0.0);
    // brute-force signs on a (k, η) grid against the interval construction
    let mut disagree = 0;
    let n = 200;
    for i in 0..n {
        let k = g.k_shift * 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64);
        let bound = g
            .lambdas
            .iter()
            .map(|&l| eta_lower_bound(l, k, g.nu))
            .try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)));
        for j in 1..=n {
            let eta = 10.0 * g.eta * j as f64 / n as f64;
            let brute = g.lambdas.iter().all(|&l| gain_lhs(l, k, eta, g.nu) > 0.0);
            let interval = bound.is_some_and(|b| eta > b);
            let near = bound.is_some_and(|b| (eta - b).abs() <= 1e-9 * b);
            if brute != interval && !near {
                disagree += 1;
            }
        }
    }
    let chosen = g.lambdas.iter().all(|&l| gain_lhs(l, g.k_shift, g.eta, g.nu) > 0.0);
    Ok((
        cert.passed && rates_ok && chosen && disagree == 0,
        format!(
            "k={:.4e} η={:.4e}, min lhs {:.3e}, γ₀ {:.4e}, grid disagreements {disagree}",
            g.k_shift,
            g.eta,
            cert.lhs.iter().copied().fold(f64::INFINITY, f64::min),
            g.gamma0()
        ),
    ))
}

fn closed_vs_open() -> Outcome {
    let s = common::spectrum();
    let cfg = horizon_config(Variant::Complex)?;
    let d = design(Variant::Complex)?;
    let r = run_simulation(&cfg, s, Some(&d)).map_err(err)?;
    let gamma0 = d.gains.gamma0();
    let target = 0.9 * gamma0.min(s.stable_gap().unwrap_or(f64::INFINITY));
    let fit = r.closed.gamma_fit.unwrap_or(f64::NAN);
    let (closed, open) = (r.closed.decay_ratio(), r.open.decay_ratio());
    Ok((
        closed <= 1e-2 && fit >= target && open >= 10.0,
        format!(
            "T={:.2}: closed ratio {closed:.3e} (≤ 1e-2), γ_fit {fit:.4e} (≥ {target:.4e}), open ratio {open:.3e} (≥ 10)",
            cfg.t_end
        ),
    ))
}

fn obliqueness() -> Outcome {
    let reps = obliqueness_sweep(common::spectrum(), Variant::Complex, &[1.0, 10.0, 100.0], 0).map_err(err)?;
    let increasing = reps.windows(2).all(|w| w[1].min_abs_cos > w[0].min_abs_cos);
    let normal = reps
        .iter()
        .map(|r| r.normal_defect / r.normal_scalar.abs().max(1e-300))
        .fold(0.0, f64::max);
    let cos: Vec<String> = reps.iter().map(|r| format!("{:.3e}", 1.0 - r.min_abs_cos)).collect();
    Ok((
        increasing && reps[2].min_abs_cos > 0.99 && normal <= 1e-10,
        format!("1 − min |cos| at alpha0 = 1, 10, 100: {}; normal-component defect {normal:.2e}", cos.join(", ")),
    ))
}

fn variants() -> Outcome {
    let s = common::spectrum();
    let complex = run_simulation(&horizon_config(Variant::Complex)?, s, Some(&design(Variant::Complex)?)).map_err(err)?;
    let real = run_simulation(&horizon_config(Variant::Real)?, s, Some(&design(Variant::Real)?)).map_err(err)?;
    let (fc, fr) = (complex.closed.gamma_fit.unwrap_or(f64::NAN), real.closed.gamma_fit.unwrap_or(f64::NAN));
    let realness = real.closed.realness_defect.iter().copied().fold(0.0, f64::max);
    let rel = (fr - fc).abs() / fc;
    let mut ok = realness <= 1e-8 && rel <= 0.05;
    let mut detail = format!("real: defect {realness:.1e}, γ_fit {fr:.4e} vs complex {fc:.4e} ({:.2}%)", 100.0 * rel);
    let target = 0.9 * common::gains().gamma0().min(s.stable_gap().unwrap_or(f64::INFINITY));
    let adj = adjoint_traces(s);
    for v in [Variant::RestrictedLower, Variant::RestrictedUpper] {
        let d = design(v)?;
        let delta = d.law.delta_defect(&adj);
        let r = run_simulation(&horizon_config(v)?, s, Some(&d)).map_err(err)?;
        let fit = r.closed.gamma_fit.unwrap_or(f64::NAN);
        let ratio = r.closed.decay_ratio();
        ok &= delta <= 1e-8 && ratio < 1.0 && fit >= target;
        detail += &format!("; {}: δ defect {delta:.1e}, ratio {ratio:.2e}, γ_fit {fit:.4e}", v.name());
    }
    Ok((ok, detail))
}

fn galerkin() -> Outcome {
    let cfg = horizon_config(Variant::Complex)?;
    let d = design(Variant::Complex)?;
    let (certs, _) = galerkin_sweep(&cfg, common::spectrum(), &d).map_err(err)?;
    let ok = certs.iter().all(|c| c.passed);
    let detail: Vec<String> = certs.iter().map(|c| format!("{} {:.4e}", c.name, c.value)).collect();
    Ok((ok, detail.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("spectral convergence", spectral_convergence),
        ("Stokes limit", stokes_limit),
        ("instability sweep", instability_search),
        ("hypothesis certificates", hypotheses),
        ("biorthogonality", biorthogonality),
        ("duality identity", duality),
        ("gain certificate", gain_certificate),
        ("closed-loop decay vs open-loop growth", closed_vs_open),
        ("obliqueness", obliqueness),
        ("real and restricted variants", variants),
        ("nonlinear Galerkin surrogate", galerkin),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
