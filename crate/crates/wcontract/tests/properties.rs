use proptest::prelude::*;
use wcontract::functionals::{entropy, fisher, FISHER_FLOOR};
use wcontract::grid::{build_generator, build_grid, CurvatureParams, GridDensity, GridKind, Potential, WeightedGrid};
use wcontract::harness::{
    check_contraction_ii, check_contraction_iii, check_evi, converse_estimates, subtracted_integrals, ContractionExperiment,
    ConverseOptions, Space,
};
use wcontract::transport::{hopf_lax, w2, MassModel};

const TAU: f64 = std::f64::consts::TAU;

fn grid(circle: bool, n: usize) -> WeightedGrid<f64> {
    if circle {
        build_grid(GridKind::Circle, n, (0.0, TAU), &Potential::Zero, true).unwrap()
    } else {
        build_grid(GridKind::Interval, n, (-0.5, 0.5), &Potential::Quadratic, true).unwrap()
    }
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..1.0, n)
}

/// Grid shape plus two test vectors and two positive profiles of matching length.
fn setup() -> impl Strategy<Value = (bool, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (any::<bool>(), 12usize..40).prop_flat_map(|(c, n)| (Just(c), Just(n), values(n), values(n), positive(n), positive(n)))
}

/// Smooth positive profile `1 + a·cos(x + φ)` on the circle.
fn smooth(g: &WeightedGrid<f64>, a: f64, phase: f64) -> GridDensity<f64> {
    GridDensity::normalized(g, g.sample(|x| 1.0 + a * (x + phase).cos())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_identities((c, n, f, g, _, _) in setup()) {
        let grid = grid(c, n);
        let gen = build_generator(&grid).unwrap();
        let lf = gen.apply(&f).unwrap();
        let lg = gen.apply(&g).unwrap();
        let scale = 1.0 / (grid.dx * grid.dx);
        let ibp = grid.integrate_product(&f, &lg).unwrap() + grid.integrate(&gen.gamma(&f, &g).unwrap()).unwrap();
        prop_assert!(ibp.abs() <= 1e-11 * scale);
        prop_assert!(grid.integrate(&lf).unwrap().abs() <= 1e-11 * scale);
        let sym = grid.integrate_product(&f, &lg).unwrap() - grid.integrate_product(&g, &lf).unwrap();
        prop_assert!(sym.abs() <= 1e-11 * scale);
        prop_assert!(gen.gamma_sq(&f).unwrap().iter().all(|v| *v >= -1e-12 * scale));
        let ones = vec![1.0; n];
        prop_assert!(gen.apply(&ones).unwrap().iter().all(|v| v.abs() <= 1e-9 * scale));
    }

    #[test]
    fn semigroup_preserves_mass_and_positivity((c, n, _, _, p, _) in setup(), t in 0.0f64..2.0) {
        let space = Space::new(grid(c, n)).unwrap();
        let f = GridDensity::normalized(&space.grid, p).unwrap();
        let ft = space.spec.evolve(f.values(), t).unwrap();
        prop_assert!((space.grid.integrate(&ft).unwrap() - 1.0).abs() < 1e-10);
        let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.values().iter().copied().fold(0.0, f64::max);
        prop_assert!(ft.iter().all(|v| *v >= lo - 1e-10 && *v <= hi + 1e-10));
    }

    #[test]
    fn entropy_and_fisher_are_nonnegative((c, n, _, _, p, _) in setup()) {
        let grid = grid(c, n);
        let gen = build_generator(&grid).unwrap();
        let f = GridDensity::normalized(&grid, p).unwrap();
        prop_assert!(entropy(&grid, &f).value() >= -1e-12);
        prop_assert!(fisher(&gen, &grid, &f, FISHER_FLOOR).value() >= -1e-12);
    }

    #[test]
    fn w2_is_a_metric((c, n, _, _, p, q) in setup(), r in prop::collection::vec(0.2f64..1.0, 40), cell in any::<bool>()) {
        let grid = grid(c, n);
        let model = if cell { MassModel::Cell } else { MassModel::Atomic };
        let f = GridDensity::normalized(&grid, p).unwrap();
        let g = GridDensity::normalized(&grid, q).unwrap();
        let h = GridDensity::normalized(&grid, r[..n].to_vec()).unwrap();
        let d = |a: &GridDensity<f64>, b: &GridDensity<f64>| w2(&grid, a, b, model).unwrap();
        prop_assert!(d(&f, &f).abs() < 1e-7);
        prop_assert!((d(&f, &g) - d(&g, &f)).abs() < 1e-9);
        prop_assert!(d(&f, &g) <= d(&f, &h) + d(&h, &g) + 1e-9);
    }

    #[test]
    fn hopf_lax_is_monotone((c, n, psi, bump, _, _) in setup(), s in 0.05f64..1.0, ds in 0.01f64..1.0) {
        let grid = grid(c, n);
        let q = hopf_lax(&grid, &psi, s).unwrap();
        let later = hopf_lax(&grid, &psi, s + ds).unwrap();
        let above: Vec<f64> = psi.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
        let q_above = hopf_lax(&grid, &above, s).unwrap();
        for i in 0..n {
            prop_assert!(q[i] <= psi[i] + 1e-15);
            prop_assert!(later[i] <= q[i] + 1e-15);
            prop_assert!(q[i] <= q_above[i] + 1e-15);
        }
    }

    #[test]
    fn weakening_parameters_never_hurts(
        a in 0.1f64..0.8,
        b in 0.1f64..0.8,
        shift in 0.5f64..3.0,
        r in -1.0f64..0.05,
        dr in 0.0f64..1.0,
        m in 0.5f64..4.0,
        dm in 0.0f64..10.0,
    ) {
        let space = Space::new(grid(true, 32)).unwrap();
        let f = smooth(&space.grid, a, 0.0);
        let g = smooth(&space.grid, b, shift);
        let strong = CurvatureParams::new(r, m).unwrap();
        let weak = CurvatureParams::new(r - dr, m + dm).unwrap();
        let exp = ContractionExperiment::new(&space, f, g, strong, vec![0.2, 0.6]).unwrap();
        let weak_exp = exp.clone().with_params(weak);
        for check in [check_contraction_ii::<f64>, check_contraction_iii, check_evi] {
            for (s, w) in check(&exp).unwrap().iter().zip(check(&weak_exp).unwrap()) {
                prop_assert!(w.margin >= s.margin - 1e-12, "{} at t = {:?}: {} < {}", s.name, s.t, w.margin, s.margin);
                prop_assert!(!s.pass || w.pass);
            }
        }
    }

    #[test]
    fn square_form_follows_from_sinh_form(a in 0.1f64..0.8, b in 0.1f64..0.8, shift in 0.0f64..3.0, m in 0.5f64..4.0, t in 0.05f64..1.0) {
        let space = Space::new(grid(true, 32)).unwrap();
        let params = CurvatureParams::new(0.0, m).unwrap();
        let exp = ContractionExperiment::new(&space, smooth(&space.grid, a, 0.0), smooth(&space.grid, b, shift), params, vec![t]).unwrap();
        let (sinh, sq) = subtracted_integrals(&exp, t).unwrap();
        prop_assert!(sinh >= 0.25 * sq - 1e-14);
        let ii = &check_contraction_ii(&exp).unwrap()[0];
        let iii = &check_contraction_iii(&exp).unwrap()[0];
        prop_assert!(iii.margin >= 4.0 * ii.margin - 1e-12);
    }

    #[test]
    fn zero_time_margins_vanish(a in 0.1f64..0.8, b in 0.1f64..0.8, shift in 0.0f64..3.0, r in -1.0f64..0.3, m in 0.5f64..4.0) {
        let space = Space::new(grid(true, 32)).unwrap();
        let params = CurvatureParams::new(r, m).unwrap();
        let exp = ContractionExperiment::new(&space, smooth(&space.grid, a, 0.0), smooth(&space.grid, b, shift), params, vec![0.0]).unwrap();
        prop_assert_eq!(check_contraction_ii(&exp).unwrap()[0].margin, 0.0);
        prop_assert_eq!(check_contraction_iii(&exp).unwrap()[0].margin, 0.0);
    }

    #[test]
    fn converse_with_constant_test_function_is_trivial(a in 0.1f64..0.8, level in -2.0f64..2.0, t in 0.1f64..1.0) {
        let space = Space::new(grid(true, 32)).unwrap();
        let g = smooth(&space.grid, a, 0.0);
        let f = vec![level; 32];
        for r in converse_estimates(&space, &g, &f, t, &ConverseOptions::new(space.dx())).unwrap() {
            prop_assert!(r.lhs.abs() < 1e-9 && r.rhs.abs() < 1e-9, "{r:?}");
            prop_assert!(r.pass);
        }
    }
}
