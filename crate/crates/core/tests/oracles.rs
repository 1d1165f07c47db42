//! Discretization checked against independent references: closed-form
//! Stokes roots, an orthonormalized shooting solver, polynomial exactness and
//! the Lagrange identity of the adjoint pair.

mod common;

use common::stokes_roots;
use oseen_stab::channel::ChannelFlow;
use oseen_stab::spectral::build_grid;
use oseen_stab::spectrum::{assemble_adjoint, assemble_orr_sommerfeld, pencil_eigenvalues};
use oseen_stab::C64;

fn sorted_real(mut l: Vec<C64>) -> Vec<C64> {
    l.sort_by(|a, b| a.re.total_cmp(&b.re));
    l
}

#[test]
fn stokes_spectrum_matches_characteristic_roots() {
    let grid = build_grid(64).unwrap();
    for (nu, m) in [(0.01, 1), (0.004, 2), (0.02, 3)] {
        let flow = ChannelFlow::new(nu, 0.0, 3).unwrap();
        let l = sorted_real(pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &grid, m).unwrap()).unwrap());
        for z in &l[..20] {
            assert!(z.im.abs() <= 1e-8 && z.re > 0.0, "{z}");
        }
        let (even, odd) = stokes_roots(nu, m as f64);
        assert!((l[0].re - even).abs() <= 1e-8 * even, "even {} vs {even}", l[0].re);
        assert!((l[1].re - odd).abs() <= 1e-8 * odd, "odd {} vs {odd}", l[1].re);
    }
}

type State = [C64; 4];

/// `v⁗` from the direct eigenproblem `A v = λ (v″ − m² v)`.
fn rhs(y: f64, s: &State, lambda: C64, nu: f64, c: f64, m: f64) -> State {
    let i = C64::new(0.0, 1.0);
    let u = c * (y * y - y);
    let d2u = 2.0 * c;
    let v4 = ((2.0 * nu * m * m + i * m * u - lambda) * s[2]
        - (nu * m.powi(4) + i * m.powi(3) * u + i * m * d2u - lambda * m * m) * s[0])
        / nu;
    [s[1], s[2], s[3], v4]
}

fn orthonormalize(a: &mut State, b: &mut State) {
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.iter_mut().for_each(|z| *z /= na);
    let p: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    b.iter_mut().zip(a.iter()).for_each(|(y, x)| *y -= p * x);
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    b.iter_mut().for_each(|z| *z /= nb);
}

/// Integrate the two solutions with clamped data at `y = 0` by RK4, keeping
/// them orthonormal, and return the wall determinant `v₁v₂′ − v₂v₁′` at `y = 1`.
fn shooting_det(lambda: C64, nu: f64, c: f64, m: f64, steps: usize) -> C64 {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut sol = [[zero, zero, one, zero], [zero, zero, zero, one]];
    let h = 1.0 / steps as f64;
    for k in 0..steps {
        let y = k as f64 * h;
        for s in sol.iter_mut() {
            let f = |y: f64, s: &State| rhs(y, s, lambda, nu, c, m);
            let add = |s: &State, k: &State, t: f64| -> State { std::array::from_fn(|i| s[i] + k[i] * t) };
            let k1 = f(y, s);
            let k2 = f(y + 0.5 * h, &add(s, &k1, 0.5 * h));
            let k3 = f(y + 0.5 * h, &add(s, &k2, 0.5 * h));
            let k4 = f(y + h, &add(s, &k3, h));
            *s = std::array::from_fn(|i| s[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0));
        }
        let [a, b] = &mut sol;
        orthonormalize(a, b);
    }
    sol[0][0] * sol[1][1] - sol[1][0] * sol[0][1]
}

fn shoot(start: C64, nu: f64, c: f64, m: f64) -> C64 {
    let steps = 20000;
    let mut x0 = start;
    let mut x1 = start * (1.0 + 1e-6);
    let mut f0 = shooting_det(x0, nu, c, m, steps);
    for _ in 0..30 {
        let f1 = shooting_det(x1, nu, c, m, steps);
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (x2 - x1).norm() <= 1e-13 * x2.norm() {
            return x2;
        }
        (x0, f0, x1) = (x1, f1, x2);
    }
    x1
}

#[test]
fn poiseuille_eigenvalues_match_shooting() {
    let (nu, a) = (0.002, 0.64);
    let flow = ChannelFlow::new(nu, a, 3).unwrap();
    let grid = build_grid(96).unwrap();
    for m in [1, 2] {
        let l = sorted_real(pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &grid, m).unwrap()).unwrap());
        let target = l[0];
        // start the secant iteration visibly off the collocation value
        let root = shoot(target * C64::new(1.0 + 1e-4, 1e-4), nu, flow.c(), m as f64);
        let rel = (root - target).norm() / target.norm();
        assert!(rel <= 1e-6, "m={m}: shooting {root} vs collocation {target} ({rel:e})");
        if m == 2 {
            assert!(target.re < 0.0, "m=2 mode should be unstable: {target}");
        }
    }
}

#[test]
fn differentiation_and_quadrature_are_exact_on_polynomials() {
    let m = 32;
    let grid = build_grid(m).unwrap();
    let y = grid.nodes();
    for k in [0usize, 1, 3, 7, 16, 32] {
        let v: Vec<C64> = y.iter().map(|y| C64::new(y.powi(k as i32), 0.0)).collect();
        for p in 1..=4usize {
            let d = grid.apply(p, &v);
            let dp = grid.diff(p);
            let fall = |k: usize, p: usize| (0..p).map(|i| k as f64 - i as f64).product::<f64>();
            for (i, yi) in y.iter().enumerate() {
                let exact = if k >= p { fall(k, p) * yi.powi((k - p) as i32) } else { 0.0 };
                // rounding bound of the row product
                let mag: f64 = (0..y.len()).map(|j| dp[(i, j)].abs() * v[j].re.abs()).sum();
                let tol = 1e3 * f64::EPSILON * mag + 1e-12 * exact.abs();
                assert!((d[i].re - exact).abs() <= tol, "k={k} p={p} y={yi}: {} vs {exact}", d[i].re);
            }
        }
        let q = grid.integrate(&y.iter().map(|y| y.powi(k as i32)).collect::<Vec<_>>());
        assert!((q - 1.0 / (k as f64 + 1.0)).abs() <= 1e-14, "k={k}: {q}");
    }
}

/// `v = y²(1−y)²(1+2y)`, whose derivatives are written out by hand.
fn poly(y: f64) -> [f64; 5] {
    // v = y² − 2y³ + y⁴ + 2y³ − 4y⁴ + 2y⁵ = y² − 3y⁴ + 2y⁵
    [
        y * y - 3.0 * y.powi(4) + 2.0 * y.powi(5),
        2.0 * y - 12.0 * y.powi(3) + 10.0 * y.powi(4),
        2.0 - 36.0 * y * y + 40.0 * y.powi(3),
        -72.0 * y + 120.0 * y * y,
        -72.0 + 240.0 * y,
    ]
}

#[test]
fn nodal_operator_matches_symbolic_form() {
    let (nu, a, m) = (0.01, 0.3, 2.0);
    let flow = ChannelFlow::new(nu, a, 2).unwrap();
    let grid = build_grid(32).unwrap();
    let p = assemble_orr_sommerfeld(&flow, &grid, 2).unwrap();
    let y = grid.nodes();
    let v: Vec<C64> = y.iter().map(|&y| C64::new(poly(y)[0], 0.0)).collect();
    let c = -a / (2.0 * nu);
    let i = C64::new(0.0, 1.0);
    for (r, &yr) in y.iter().enumerate() {
        let d = poly(yr);
        let u = c * (yr * yr - yr);
        let exact = -nu * d[4] + (2.0 * nu * m * m + i * m * u) * d[2]
            - (nu * m.powi(4) + i * m.powi(3) * u + i * m * 2.0 * c) * d[0];
        let got: C64 = (0..y.len()).map(|j| p.a[(r, j)] * v[j]).sum();
        let mag: f64 = (0..y.len()).map(|j| (p.a[(r, j)] * v[j]).norm()).sum();
        assert!((got - exact).norm() <= 1e3 * f64::EPSILON * mag, "y={yr}: {got} vs {exact}");
        let mass: C64 = (0..y.len()).map(|j| p.b[(r, j)] * v[j]).sum();
        let mag: f64 = (0..y.len()).map(|j| (p.b[(r, j)] * v[j]).norm()).sum();
        assert!((mass.re - (d[2] - m * m * d[0])).abs() <= 1e3 * f64::EPSILON * mag);
    }
}

#[test]
fn stokes_adjoint_pencil_equals_direct() {
    let flow = ChannelFlow::new(0.01, 0.0, 2).unwrap();
    let grid = build_grid(48).unwrap();
    let d = assemble_orr_sommerfeld(&flow, &grid, 2).unwrap();
    let a = assemble_adjoint(&flow, &grid, 2).unwrap();
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            assert!((d.a[(i, j)] - a.a[(i, j)]).norm() <= 1e-12 * (1.0 + d.a[(i, j)].norm()));
        }
    }
}

#[test]
fn adjoint_satisfies_lagrange_identity() {
    // ∫ w̄ (A v) = ∫ conj(A† w) v for clamped v, w
    let flow = ChannelFlow::new(0.003, 0.5, 3).unwrap();
    let grid = build_grid(64).unwrap();
    let y = grid.nodes();
    let bump = |y: f64| y * y * (1.0 - y) * (1.0 - y);
    let v: Vec<C64> = y.iter().map(|&y| C64::new(1.0 + y, 0.5 - y * y) * bump(y)).collect();
    let w: Vec<C64> = y.iter().map(|&y| C64::new(y * y * y - 0.2, 2.0 * y) * bump(y)).collect();
    for m in [1, -2, 3] {
        let a = assemble_orr_sommerfeld(&flow, &grid, m).unwrap().a;
        let at = assemble_adjoint(&flow, &grid, m).unwrap().a;
        let apply = |mat: &oseen_stab::linalg::CMat, x: &[C64]| -> Vec<C64> {
            (0..x.len()).map(|r| (0..x.len()).map(|j| mat[(r, j)] * x[j]).sum()).collect()
        };
        let av = apply(&a, &v);
        let atw = apply(&at, &w);
        let lhs = grid.integrate_complex(&w.iter().zip(&av).map(|(w, x)| w.conj() * x).collect::<Vec<_>>());
        let rhs = grid.integrate_complex(&atw.iter().zip(&v).map(|(x, v)| x.conj() * v).collect::<Vec<_>>());
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0), "m={m}: {lhs} vs {rhs}");
    }
}

/// The adjoint is collocated on its own, so conjugacy holds up to the
/// discretization error; at this Reynolds number M = 128 resolves the
/// leading modes of every wavenumber well below the tolerance.
#[test]
fn adjoint_eigenvalues_are_conjugates() {
    let flow = ChannelFlow::new(0.002, 0.64, 3).unwrap();
    let grid = build_grid(128).unwrap();
    for m in [1, 2, 3] {
        let d = sorted_real(pencil_eigenvalues(&assemble_orr_sommerfeld(&flow, &grid, m).unwrap()).unwrap());
        let a = pencil_eigenvalues(&assemble_adjoint(&flow, &grid, m).unwrap()).unwrap();
        for l in &d[..10] {
            let near = a.iter().map(|z| (z - l.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(near <= 1e-8, "m={m}: {l} has no adjoint partner ({near:e})");
        }
    }
}
