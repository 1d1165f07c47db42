#![allow(dead_code)]

use oseen_stab::channel::ChannelFlow;
use oseen_stab::controller::{build_variant, select_gains, FeedbackLaw, GainParameters, Variant};
use oseen_stab::lift::{lift_law, LiftedSet};
use oseen_stab::spectral::build_grid;
use oseen_stab::spectrum::{compute_spectrum, Spectrum, SpectrumOptions};
use std::sync::OnceLock;

/// Frozen configuration with two unstable modes (m = ±2).
pub const NU: f64 = 0.002;
pub const A: f64 = 0.64;
pub const M: usize = 96;

pub fn spectrum() -> &'static Spectrum {
    static S: OnceLock<Spectrum> = OnceLock::new();
    S.get_or_init(|| {
        let flow = ChannelFlow::new(NU, A, 3).unwrap();
        compute_spectrum(&flow, &build_grid(M).unwrap(), &SpectrumOptions::default()).unwrap()
    })
}

pub fn gains() -> GainParameters {
    select_gains(&spectrum().unstable_lambdas(), NU).unwrap()
}

pub fn design(variant: Variant, alpha0: f64) -> (FeedbackLaw, LiftedSet) {
    let s = spectrum();
    let law = build_variant(s, &gains(), alpha0, variant).unwrap();
    let lifts = lift_law(&s.flow, &s.grid, &law).unwrap();
    (law, lifts)
}

pub fn law(variant: Variant, alpha0: f64) -> FeedbackLaw {
    build_variant(spectrum(), &gains(), alpha0, variant).unwrap()
}

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) < 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Clamped Stokes modes on a channel of half-width `h = 1/2`: with
/// `λ = ν(β² + m²)`, even modes satisfy `β tan βh = −m tanh mh` and odd
/// modes `m tan βh = β tanh mh`.
pub fn stokes_roots(nu: f64, m: f64) -> (f64, f64) {
    let h = 0.5;
    let even = |b: f64| b * (b * h).sin() * (m * h).cosh() + m * (b * h).cos() * (m * h).sinh();
    let odd = |b: f64| b * (b * h).cos() * (m * h).sinh() - m * (b * h).sin() * (m * h).cosh();
    let pi = std::f64::consts::PI;
    let be = bisect(even, (0.5 * pi + 1e-9) / h, (pi - 1e-9) / h);
    let bo = bisect(odd, (pi + 1e-9) / h, (1.5 * pi - 1e-9) / h);
    (nu * (be * be + m * m), nu * (bo * bo + m * m))
}
