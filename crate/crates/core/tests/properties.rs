use geomforce_core::expr::{BinOp, Func};
use geomforce_core::geometry::principal_curvatures;
use geomforce_core::*;
use proptest::prelude::*;

fn bindings(pairs: &[(&str, f64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn arb_expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(Expression::Num),
        (0usize..3).prop_map(Expression::Var),
        Just(Expression::Param("R".into())),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)];
        let func = prop_oneof![Just(Func::Sqrt), Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Log)];
        prop_oneof![
            inner.clone().prop_map(|a| Expression::Neg(Box::new(a))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expression::Binary(o, Box::new(a), Box::new(b))),
            (inner.clone(), 1i32..6).prop_map(|(a, n)| Expression::Pow(Box::new(a), n)),
            (func, inner).prop_map(|(f, a)| Expression::Call(f, Box::new(a))),
        ]
    })
}

/// Smooth test functions on a neighbourhood of the unit cube.
const SMOOTH: [&str; 4] = [
    "x^2*y - 3*z + sin(x*y)",
    "exp(x - y)*cos(z) + x^3",
    "sqrt(4 + x^2 + y^2 + z^2) * (1 + x*z)",
    "log(3 + x + y^2) / (2 + cos(z))",
];

fn central(f: &Expression, x: &[f64], i: usize, h: f64, params: &Bindings) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += h;
    b[i] -= h;
    (f.eval(&a, params).unwrap() - f.eval(&b, params).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unparse_then_parse_is_identity(e in arb_expression()) {
        let text = e.to_string();
        let back = parse_expression(&text).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn jet_first_and_second_derivatives_match_differences(
        which in 0usize..4,
        x in prop::array::uniform3(-0.8f64..0.8),
    ) {
        let f = parse_expression(SMOOTH[which]).unwrap();
        let params = Bindings::new();
        let jet = evaluate_jet(&f, &x, 3, &params).unwrap();
        for i in 0..3 {
            let fd = central(&f, &x, i, 1e-5, &params);
            prop_assert!((jet.d(&[i]) - fd).abs() < 1e-7 * (1.0 + fd.abs()));
            for j in 0..3 {
                // derivative of the exact first-derivative jet, differenced once
                let h = 1e-5;
                let mut a = x;
                let mut b = x;
                a[j] += h;
                b[j] -= h;
                let da = evaluate_jet(&f, &a, 1, &params).unwrap().d(&[i]);
                let db = evaluate_jet(&f, &b, 1, &params).unwrap().d(&[i]);
                let fd2 = (da - db) / (2.0 * h);
                prop_assert!((jet.d(&[i, j]) - fd2).abs() < 1e-6 * (1.0 + fd2.abs()));
            }
        }
    }

    #[test]
    fn product_rule_holds_for_jets(
        a in 0usize..4,
        b in 0usize..4,
        x in prop::array::uniform3(-0.8f64..0.8),
    ) {
        let params = Bindings::new();
        let f = parse_expression(SMOOTH[a]).unwrap();
        let g = parse_expression(SMOOTH[b]).unwrap();
        let fg = parse_expression(&format!("({}) * ({})", SMOOTH[a], SMOOTH[b])).unwrap();
        let (jf, jg, jfg) = (
            evaluate_jet(&f, &x, 2, &params).unwrap(),
            evaluate_jet(&g, &x, 2, &params).unwrap(),
            evaluate_jet(&fg, &x, 2, &params).unwrap(),
        );
        for i in 0..3 {
            for j in 0..3 {
                let leibniz = jf.d(&[i, j]) * jg.value()
                    + jf.d(&[i]) * jg.d(&[j])
                    + jf.d(&[j]) * jg.d(&[i])
                    + jf.value() * jg.d(&[i, j]);
                prop_assert!((jfg.d(&[i, j]) - leibniz).abs() < 1e-9 * (1.0 + leibniz.abs()));
            }
        }
    }

    #[test]
    fn unit_normal_is_orthogonal_to_its_derivatives(
        u in 0.05f64..0.95,
        v in 0.0f64..1.0,
        surface in 0usize..3,
    ) {
        let spec = match surface {
            0 => builtin_surface("torus", &bindings(&[("R", 2.0), ("r", 0.7)])).unwrap(),
            1 => builtin_surface("spheroid", &bindings(&[("a", 1.0), ("b", 2.0)])).unwrap(),
            _ => builtin_surface("spheroid", &bindings(&[("a", 2.0), ("b", 0.6)])).unwrap(),
        };
        let x = spec.parametric_point(u, v).unwrap();
        let nj = normal_jet(&spec, &x, ExtensionPolicy::GradientNormalized, 2).unwrap();
        let n = nj.n();
        prop_assert!((n.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| n[i] * nj.partial(i, &[j])).sum();
            prop_assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn geometric_potential_is_minus_half_squared_curvature_gap(
        u in 0.05f64..0.95,
        v in 0.0f64..1.0,
        big in 1.5f64..3.0,
        small in 0.3f64..1.2,
    ) {
        let spec = builtin_surface("torus", &bindings(&[("R", big), ("r", small)])).unwrap();
        let x = spec.parametric_point(u, v).unwrap();
        let s = curvature_sample(&spec, &x, ExtensionPolicy::SignedDistance).unwrap();
        let k = principal_curvatures(&s.shape, &s.n);
        let expect = -0.5 * (k[0] - k[1]).powi(2);
        prop_assert!((s.vg_geom - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        prop_assert!((s.chi_geom + s.lap_m).abs() == 0.0);
    }

    #[test]
    fn sphere_lap_m_vanishes_for_any_radius(
        a in 0.2f64..5.0,
        u in 0.05f64..0.95,
        v in 0.0f64..1.0,
        gradient in any::<bool>(),
    ) {
        let spec = builtin_surface("sphere", &bindings(&[("a", a)])).unwrap();
        let x = spec.parametric_point(u, v).unwrap();
        let policy = if gradient { ExtensionPolicy::GradientNormalized } else { ExtensionPolicy::SignedDistance };
        let s = curvature_sample(&spec, &x, policy).unwrap();
        prop_assert!(s.lap_m.abs() < 1e-10 / a.powi(3));
        prop_assert!((s.mean_curvature + 2.0 / a).abs() < 1e-12 / a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sphere_trajectories_conserve_energy_and_constraint(
        theta in 0.3f64..2.8,
        phi in 0.0f64..6.28,
        dir in prop::array::uniform3(-1.0f64..1.0),
        speed in 0.2f64..3.0,
    ) {
        let spec = builtin_surface("sphere", &bindings(&[("a", 1.0)])).unwrap();
        let x = vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let dn: f64 = (0..3).map(|i| dir[i] * x[i]).sum();
        let mut p: Vec<f64> = (0..3).map(|i| dir[i] - dn * x[i]).collect();
        let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        p.iter_mut().for_each(|c| *c *= speed / norm);
        let traj = integrate(&spec, &TrajectoryState { x, p, t: 0.0 }, &IntegratorConfig::new(1e-3, 500, 1.0)).unwrap();
        prop_assert!(traj.energy_drift() < 1e-10);
        prop_assert!(traj.f_residuals.iter().all(|r| *r < 1e-12));
        let force = force_residual(&spec, &traj, 1.0).unwrap();
        prop_assert!(force.max < 1e-8 * (1.0 + speed * speed));
    }

    #[test]
    fn torus_momentum_is_symmetric(seed in 0u64..1000) {
        use geomforce_core::lab::*;
        let grid = build_grid(LabSurface::Torus { major: 2.0, minor: 1.0 }, &[32, 32]).unwrap();
        let states = test_states(&grid, &TestConfig { count: 2, seed, band_fraction: 1.0 / 3.0 });
        for p in build_momentum(&grid, 1.0) {
            let lhs = grid.inner(&states[0], &p.apply(&states[1]));
            let rhs = grid.inner(&p.apply(&states[0]), &states[1]);
            prop_assert!((lhs - rhs).norm() < 1e-8);
        }
    }
}
