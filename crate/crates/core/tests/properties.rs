use leakyguide::asymptotics::weak_coupling_expansion;
use leakyguide::bounds::{bracketing_bound, skn_bound_rectwell};
use leakyguide::cli::output::render_csv;
use leakyguide::cli::tasks::{Cell, Table};
use leakyguide::{CouplingProfile, Geometry, ModeBasis};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn transverse_eigenvalues_ascend_and_grow_with_coupling(
        d1 in 0.3f64..2.0,
        d2 in 0.3f64..2.0,
        alpha0 in -3.0f64..3.0,
        step in 0.05f64..2.0,
    ) {
        let g = Geometry::new(d1, d2).unwrap();
        let lo = ModeBasis::solve(g, alpha0, 8).unwrap();
        let hi = ModeBasis::solve(g, alpha0 + step, 8).unwrap();
        prop_assert!(lo.modes.windows(2).all(|w| w[0].nu <= w[1].nu));
        prop_assert!(hi.nu1() > lo.nu1());
        for (a, b) in lo.modes.iter().zip(&hi.modes) {
            prop_assert!(b.nu >= a.nu - 1e-10 * a.nu.abs().max(1.0));
        }
    }

    #[test]
    fn bracketing_bounds_differ_by_one_and_grow_with_width(
        a in 0.05f64..5.0,
        da in 0.0f64..2.0,
        depth in 0.1f64..4.0,
    ) {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let b0 = ModeBasis::solve(g, 0.0, 2).unwrap();
        let b1 = ModeBasis::solve(g, -depth, 2).unwrap();
        let (u, l) = bracketing_bound(a, &b0, &b1).unwrap();
        let (u2, _) = bracketing_bound(a + da, &b0, &b1).unwrap();
        prop_assert_eq!(u, l + 1);
        prop_assert!(u2 >= u);
    }

    #[test]
    fn rank_one_corrected_bound_is_at_least_one(a in 0.02f64..3.0, gamma in 0.05f64..3.0) {
        let b = ModeBasis::solve(Geometry::new(1.0, 1.0).unwrap(), 0.0, 200).unwrap();
        let v = skn_bound_rectwell(a, gamma, &b).unwrap();
        prop_assert!(v.is_finite() && v >= 1.0 - 1e-12);
    }

    #[test]
    fn first_order_coefficient_is_linear_in_the_perturbation(
        values in prop::collection::vec(-2.0f64..2.0, 1..5),
        scale in 0.1f64..3.0,
    ) {
        let breaks: Vec<f64> = (0..=values.len()).map(|i| i as f64 * 0.5 - 1.0).collect();
        prop_assume!(values.iter().any(|v| v.abs() > 1e-3));
        let p = CouplingProfile::piecewise(0.0, breaks.clone(), values.clone()).unwrap();
        let q = CouplingProfile::piecewise(0.0, breaks, values.iter().map(|v| v * scale).collect()).unwrap();
        let b = ModeBasis::solve(Geometry::new(1.0, 1.0).unwrap(), 0.0, 64).unwrap();
        let cp = weak_coupling_expansion(&p, &b).unwrap().c1_lambda;
        let cq = weak_coupling_expansion(&q, &b).unwrap().c1_lambda;
        prop_assert!((cq - scale * cp).abs() <= 1e-12 * (1.0 + cq.abs()));
        prop_assert!((cp + 0.5 * b.chi1_sq() * p.integral()).abs() <= 1e-12 * (1.0 + cp.abs()));
    }

    #[test]
    fn csv_floats_round_trip_exactly(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let t = Table { columns: vec!["x".into()], rows: vec![vec![Cell::F(x)]] };
        let s = render_csv(&t);
        let back: f64 = s.lines().nth(1).unwrap().parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }
}
