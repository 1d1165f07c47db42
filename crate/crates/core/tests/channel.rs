use oseen_stab::channel::{inner_product, Field, ModeProfile};
use oseen_stab::spectral::{build_grid, SpectralGrid};
use oseen_stab::C64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn grid() -> &'static SpectralGrid {
    static G: OnceLock<SpectralGrid> = OnceLock::new();
    G.get_or_init(|| build_grid(24).unwrap())
}

/// Random field on wavenumbers ±1 and 2 built from random stream samples.
fn field() -> impl Strategy<Value = Field> {
    let n = grid().len();
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3 * n).prop_map(move |c| {
        let modes = [1, -1, 2]
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let v = c[k * n..(k + 1) * n].iter().map(|&(a, b)| C64::new(a, b)).collect();
                ModeProfile::from_stream(grid(), m, v).unwrap()
            })
            .collect();
        Field::from_modes(modes)
    })
}

fn scalar() -> impl Strategy<Value = C64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_sesquilinear(f in field(), g in field(), h in field(), a in scalar(), b in scalar()) {
        let ip = |x: &Field, y: &Field| inner_product(grid(), x, y).unwrap();
        let mut comb = f.scaled(a);
        comb.axpy(b, &g);
        let scale = 1.0 + ip(&f, &f).norm().max(ip(&g, &g).norm()).max(ip(&h, &h).norm());
        let tol = 1e-12 * scale * (1.0 + a.norm() + b.norm());
        // linear in the first argument
        let lhs = ip(&comb, &h);
        prop_assert!((lhs - (a * ip(&f, &h) + b * ip(&g, &h))).norm() <= tol);
        // conjugate-linear in the second
        let rhs = ip(&h, &comb);
        prop_assert!((rhs - (a.conj() * ip(&h, &f) + b.conj() * ip(&h, &g))).norm() <= tol);
        // Hermitian and positive
        prop_assert!((ip(&f, &g) - ip(&g, &f).conj()).norm() <= tol);
        let ff = ip(&f, &f);
        prop_assert!(ff.re > 0.0 && ff.im.abs() <= tol);
    }
}
