use multipark::analytic::{averaged_densities, qrho1_display, regular_densities};
use multipark::degree::DegreeDistribution;
use multipark::exppoly::{int, rat, ExpPoly, Rational};
use multipark::motives::build_motive_system;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn term() -> impl Strategy<Value = (i64, i64, u32, i64)> {
    (-9i64..=9, 1i64..=6, 0u32..=3, 0i64..=6)
}

fn expoly() -> impl Strategy<Value = ExpPoly> {
    prop::collection::vec(term(), 0..5)
        .prop_map(|rows| rows.into_iter().map(|(n, d, p, r)| ExpPoly::term(rat(n, d), p, int(r))).sum())
}

fn distribution() -> impl Strategy<Value = DegreeDistribution> {
    prop::collection::btree_map(2u32..=7, 1i64..=5, 1..4).prop_map(|m| {
        let total: i64 = m.values().sum();
        DegreeDistribution::new(m.into_iter().map(|(k, w)| (k, rat(w, total))).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ring_laws(a in expoly(), b in expoly(), c in expoly()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn integrate_then_differentiate(f in expoly()) {
        let big_f = f.integrate0();
        prop_assert_eq!(big_f.derivative(), f);
        prop_assert_eq!(big_f.value_at_zero(), int(0));
    }

    #[test]
    fn ode_solution_substitutes(f in expoly(), decay in 0i64..=5, y0 in -3i64..=3) {
        let lambda = int(decay);
        let y = ExpPoly::solve_linear_ode(&f, &lambda, &int(y0)).unwrap();
        prop_assert!((&(&y.derivative() + &y.scale(&lambda)) - &f).is_zero());
        prop_assert_eq!(y.value_at_zero(), int(y0));
    }

    #[test]
    fn eval_matches_naive_sum(f in expoly(), t in 0.0f64..20.0) {
        let to_f = |r: &Rational| r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap();
        let parts: Vec<f64> = f
            .terms()
            .iter()
            .map(|x| to_f(&x.coeff) * t.powi(x.power as i32) * (-to_f(&x.rate) * t).exp())
            .collect();
        let naive: f64 = parts.iter().sum();
        let scale: f64 = parts.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        prop_assert!((f.eval(t) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn generating_function_shape(dist in distribution()) {
        prop_assert!((dist.gen_fun(1.0).unwrap() - 1.0).abs() < 1e-15);
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let g: Vec<f64> = grid.iter().map(|&s| dist.gen_fun(s).unwrap()).collect();
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(g.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-15));
    }

    #[test]
    fn averaged_first_layer_derivative(dist in distribution(), t in 0.0f64..10.0) {
        let q = qrho1_display(&dist).unwrap();
        let s = (-t).exp();
        let want = s * dist.gen_fun(s).unwrap();
        let got = q.derivative().eval(t);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn averaged_layers_are_probabilities(dist in distribution(), t in 0.0f64..15.0) {
        let a = averaged_densities(&dist).unwrap();
        let (d1, d2, d3) = (a.qd1.eval(t), a.qd2.eval(t), a.qd3.eval(t));
        prop_assert!(d1 >= -1e-12 && d2 >= -1e-12 && d3 >= -1e-12);
        prop_assert!(d1 + d2 + d3 <= 1.0 + 1e-12);
    }
}

#[test]
fn regular_is_the_point_mass_mean() {
    for d in 2..=50u32 {
        assert_eq!(DegreeDistribution::regular(d).unwrap().mean_degree(), int(d as i64));
    }
}

#[test]
fn regular_densities_rise_to_their_limits() {
    let grid: Vec<f64> = (0..=200).map(|i| 0.1 * i as f64).collect();
    for d in 2..=50u32 {
        let r = regular_densities(d).unwrap();
        for (name, f) in [("rho1", &r.rho1), ("rho2", &r.rho2)] {
            let lim = f.limit_at_infinity().unwrap().to_f64().unwrap();
            let v: Vec<f64> = grid.iter().map(|&t| f.eval(t)).collect();
            assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-13), "{name} d={d} not monotone");
            assert!(v.iter().all(|&x| x <= lim + 1e-13), "{name} d={d} exceeds limit");
        }
        for &t in &grid {
            let total = r.d1.eval(t) + r.d2.eval(t) + r.d3.eval(t);
            assert!(total <= 1.0 + 1e-12, "d={d} t={t}: D1+D2+D3 = {total}");
        }
    }
}

#[test]
fn pattern_probability_stays_in_unit_interval() {
    let sys = build_motive_system().unwrap();
    let y = &sys.target().closed_form;
    for i in 0..=3000 {
        let v = y.eval(0.01 * i as f64);
        assert!((-1e-15..=1.0).contains(&v), "Y({}) = {v}", 0.01 * i as f64);
    }
    let a1 = &sys.get("A1").unwrap().closed_form;
    let a2 = &sys.get("A2").unwrap().closed_form;
    let a3 = &sys.get("A3").unwrap().closed_form;
    let a4 = &sys.get("A4").unwrap().closed_form;
    let rhs = &(&(&a1.scale(&int(2)) + a2) - &a3.scale(&int(2))) - a4;
    assert!((&y.derivative() - &rhs).is_zero());
}
