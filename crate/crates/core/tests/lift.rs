mod common;

use oseen_stab::channel::{BoundaryField, BoundaryMode, ChannelFlow, Field, ModeProfile};
use oseen_stab::controller::Variant;
use oseen_stab::lift::{lift_boundary_field, solve_dirichlet_mode, verify_duality};
use oseen_stab::linalg::{self, CMat};
use oseen_stab::spectral::build_grid;
use oseen_stab::spectrum::assemble_orr_sommerfeld;
use oseen_stab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn lift_matches_clamped_correction_of_known_field() {
    // w: solenoidal field with stream function v_w = 1 + 2y − y³ + y⁵/3
    let flow = ChannelFlow::new(0.01, 0.8, 2).unwrap();
    let grid = build_grid(48).unwrap();
    let (m, k) = (2, 30.0);
    let vw: Vec<C64> = grid
        .nodes()
        .iter()
        .map(|&y| c(1.0 + 2.0 * y - y.powi(3) + y.powi(5) / 3.0, 0.5 * y * y))
        .collect();
    let w = ModeProfile::from_stream(&grid, m, vw.clone()).unwrap();
    let last = grid.m();
    let data = BoundaryMode {
        m,
        u: [w.u[0], w.u[last]],
        v: [w.v[0], w.v[last]],
    };
    let lifted = solve_dirichlet_mode(&flow, &grid, k, &data).unwrap();

    // oracle: D(trace w) = w + e with e clamped and (A + kB)e = −(A + kB)w inside
    let p = assemble_orr_sommerfeld(&flow, &grid, m).unwrap();
    let n = grid.len();
    let op = CMat::from_fn(n, n, |i, j| p.a[(i, j)] + p.b[(i, j)] * k);
    let basis = grid.clamped();
    let lift = basis.lift_matrix();
    let rows = basis.interior();
    let red = CMat::from_fn(rows.len(), basis.dim(), |r, q| {
        (0..n).map(|j| op[(rows[r], j)] * lift[(j, q)]).sum()
    });
    let opw = linalg::matvec(&op, &vw);
    let rhs: Vec<C64> = rows.iter().map(|&r| -opw[r]).collect();
    let coef = linalg::solve_vec(&red, &rhs, "oracle").unwrap();
    let e = basis.lift(&coef);
    let scale = vw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..n {
        let want = vw[i] + e[i];
        assert!((lifted.profile.v[i] - want).norm() <= 1e-8 * scale, "node {i}");
    }
}

fn random_data(rng: &mut ChaCha8Rng, m: i32) -> BoundaryField {
    let mut r = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut f = BoundaryField::new();
    f.add_scaled(
        &BoundaryMode {
            m,
            u: [r(), r()],
            v: [r(), r()],
        },
        c(1.0, 0.0),
    );
    f
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    let mut d: f64 = 0.0;
    for p in a.modes() {
        let q = b.mode(p.m).unwrap();
        for i in 0..p.u.len() {
            d = d.max((p.u[i] - q.u[i]).norm()).max((p.v[i] - q.v[i]).norm());
        }
    }
    d
}

#[test]
fn lift_is_linear() {
    let flow = ChannelFlow::new(0.005, 1.0, 3).unwrap();
    let grid = build_grid(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [1, -3] {
        let (g1, g2) = (random_data(&mut rng, m), random_data(&mut rng, m));
        let (a, b) = (c(0.7, -1.1), c(-2.0, 0.4));
        let mut g = BoundaryField::new();
        g.axpy(a, &g1);
        g.axpy(b, &g2);
        let k = 50.0;
        let lhs = lift_boundary_field(&flow, &grid, k, &g).unwrap();
        let mut rhs = Field::new();
        rhs.axpy(a, &lift_boundary_field(&flow, &grid, k, &g1).unwrap());
        rhs.axpy(b, &lift_boundary_field(&flow, &grid, k, &g2).unwrap());
        let scale = lhs.modes()[0].max_abs();
        assert!(max_diff(&lhs, &rhs) <= 1e-10 * scale);
    }
}

#[test]
fn lift_norm_decreases_with_shift() {
    let flow = ChannelFlow::new(0.002, 0.64, 3).unwrap();
    let grid = build_grid(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in [1, 2, 3] {
        let g = random_data(&mut rng, m);
        let norms: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&k| lift_boundary_field(&flow, &grid, k, &g).unwrap().norm(&grid))
            .collect();
        assert!(norms[1] <= norms[0] * (1.0 + 1e-10), "m={m}: {norms:?}");
        assert!(norms[2] <= norms[1] * (1.0 + 1e-10), "m={m}: {norms:?}");
    }
}

#[test]
fn duality_identity_for_all_variants() {
    let s = common::spectrum();
    for v in [Variant::Complex, Variant::Real, Variant::RestrictedLower, Variant::RestrictedUpper] {
        let (law, lifts) = common::design(v, 1.0);
        let r = verify_duality(s, law.gains.k_shift, &lifts.fields, &law.expected_pairing).unwrap();
        assert!(r.max_scaled_residual <= 1e-6, "{v:?}: {:e}", r.max_scaled_residual);
        if v == Variant::Complex {
            let k = law.gains.k_shift;
            for (i, row) in r.pairing.iter().enumerate() {
                let want = -s.flow.nu() / (s.modes[i].lambda + k);
                let got = c(row[i][0], row[i][1]);
                assert!((got - want).norm() <= 1e-6 * want.norm());
            }
        }
    }
}

/// The `α n⃗` part of every law pairs to zero with the unstable adjoints. In
/// the channel this rests on wavenumber separation: a general wall-normal
/// datum would pair with the adjoint pressure.
#[test]
fn alpha_part_is_invisible_to_adjoints() {
    let s = common::spectrum();
    let k = common::gains().k_shift;
    let nu = s.flow.nu();
    for v in [Variant::Complex, Variant::RestrictedLower, Variant::RestrictedUpper] {
        let law = common::law(v, 10.0);
        let d = lift_boundary_field(&s.flow, &s.grid, k, &law.alpha.normal_field()).unwrap();
        assert!(d.norm(&s.grid) > 0.0);
        for mode in s.unstable() {
            let adj = Field::from_modes(vec![mode.adjoint.clone()]);
            let p = oseen_stab::channel::inner_product(&s.grid, &d, &adj).unwrap();
            assert!(p.norm() <= 1e-6 * nu / (mode.lambda + k).norm(), "{v:?}: {p}");
        }
    }
}
