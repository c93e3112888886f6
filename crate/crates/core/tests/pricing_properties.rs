use posform::payoff_space::{payoff_norm, payoff_norm_default, sup_grid, DominatingFunction, NormValue, Payoff};
use posform::pricing_form::{
    implied_form_from_curve, validate_call_curve, verify_norm_theorem, BoundaryWeights, CallCurve, Density,
    GeneralizedPricingForm, ImpliedFormOptions, ViolationKind,
};
use proptest::prelude::*;

fn builtin(kind: u8, k: f64) -> Payoff<f64> {
    match kind % 4 {
        0 => Payoff::call(k).unwrap(),
        1 => Payoff::put(k).unwrap(),
        2 => Payoff::forward(k).unwrap(),
        _ => Payoff::bond(),
    }
}

fn linear_payoff() -> impl Strategy<Value = Payoff<f64>> {
    prop::collection::vec((0u8..4, 1.0..300.0f64, -3.0..3.0f64), 1..5)
        .prop_map(|terms| Payoff::combination(terms.into_iter().map(|(kind, k, c)| (c, builtin(kind, k))).collect()))
}

/// Positive form: interior atoms, an exponential density and a slope weight,
/// with the atom at zero topping the measure mass up to one.
fn positive_form() -> impl Strategy<Value = GeneralizedPricingForm<f64>> {
    (
        prop::collection::vec((1.0..400.0f64, 0.0..0.2f64), 0..4),
        0.0..0.4f64,
        20.0..200.0f64,
        0.5..60.0f64,
    )
        .prop_map(|(atoms, mass, scale, slope)| {
            let used: f64 = atoms.iter().map(|a| a.1).sum::<f64>() + mass;
            let mut all = vec![(0.0, (1.0 - used).max(0.0))];
            all.extend(atoms);
            GeneralizedPricingForm::new(
                all,
                Some(Density::exponential(mass, scale)),
                BoundaryWeights::linear(slope),
            )
            .unwrap()
        })
}

fn atomic_form() -> impl Strategy<Value = GeneralizedPricingForm<f64>> {
    (prop::collection::vec((1u32..400, 0.01..0.2f64), 1..4), 0.0..20.0f64).prop_map(|(atoms, slope)| {
        let used: f64 = atoms.iter().map(|a| a.1).sum();
        let mut all = vec![(0.0, (1.0 - used).max(0.0))];
        all.extend(atoms.into_iter().map(|(x, w)| (x as f64, w)));
        GeneralizedPricingForm::new(all, None, BoundaryWeights::linear(slope)).unwrap()
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prices_are_linear(form in positive_form(), f in linear_payoff(), g in linear_payoff(),
                         alpha in -5.0..5.0f64, beta in -5.0..5.0f64) {
        let lhs = form.price(&f.scaled(alpha).plus(&g.scaled(beta))).unwrap();
        let rhs = alpha * form.price(&f).unwrap() + beta * form.price(&g).unwrap();
        prop_assert!(rel_close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn put_call_parity(form in positive_form(), k in 0.5..500.0f64) {
        let c = form.price(&Payoff::call(k).unwrap()).unwrap();
        let p = form.price(&Payoff::put(k).unwrap()).unwrap();
        let fwd = form.price(&Payoff::forward(k).unwrap()).unwrap();
        prop_assert!((c - p - fwd).abs() < 1e-10, "{}", c - p - fwd);
    }

    #[test]
    fn norm_is_homogeneous_and_subadditive(f in linear_payoff(), g in linear_payoff(), alpha in -4.0..4.0f64) {
        let fstar = DominatingFunction::Linear;
        let n = |p: &Payoff<f64>| payoff_norm_default(p, fstar).finite().unwrap();
        let nf = n(&f);
        prop_assert!(rel_close(n(&f.scaled(alpha)), alpha.abs() * nf, 1e-12));
        prop_assert!(n(&f.plus(&g)) <= nf + n(&g) + 1e-12);
    }

    #[test]
    fn norm_dominates_on_grid(f in linear_payoff()) {
        let nf = payoff_norm_default(&f, DominatingFunction::Linear).finite().unwrap();
        for s in sup_grid(&f.strikes()) {
            prop_assert!(f.eval(s).abs() <= (nf + 1e-9) * (1.0 + s));
        }
    }

    #[test]
    fn norms_are_equivalent(f in linear_payoff()) {
        let grid = sup_grid(&f.strikes());
        let c1 = grid.iter().map(|s| (1.0 + s * s) / (1.0 + s)).fold(f64::INFINITY, f64::min);
        let lin = payoff_norm(&f, DominatingFunction::Linear, &grid).finite().unwrap();
        let quad = payoff_norm(&f, DominatingFunction::Quadratic, &grid).finite().unwrap();
        prop_assert!(c1 * quad <= lin * (1.0 + 1e-12) + 1e-15, "{c1} {quad} {lin}");
    }

    #[test]
    fn norm_theorem_on_random_forms(form in positive_form(),
                                    samples in prop::collection::vec(linear_payoff(), 1..6)) {
        let report = verify_norm_theorem(&form, &samples, DominatingFunction::Linear).unwrap();
        prop_assert!(report.holds(), "{:?}", report.counterexamples);
        prop_assert!(report.max_ratio <= 1.0 + 1e-9);
        prop_assert!((report.saturation_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_forms_give_valid_curves(form in positive_form()) {
        let strikes: Vec<f64> = (0..=400).map(|i| i as f64).collect();
        let spot = form.price(&Payoff::forward(0.0).unwrap()).unwrap();
        let curve = form.call_curve(&strikes).unwrap();
        let v = validate_call_curve(&curve, spot, 1e-9).unwrap();
        prop_assert!(v.ok, "{:?}", v.violations);
    }

    /// With atoms on strike nodes the curve is piecewise linear, so a
    /// negative atom shows up as a concave kink.
    #[test]
    fn negative_atom_is_caught(form in atomic_form(), node in 1usize..399, frac in 1e-3..1.0f64) {
        let strikes: Vec<f64> = (0..=400).map(|i| i as f64).collect();
        let spot = form.price(&Payoff::forward(0.0).unwrap()).unwrap();
        let curve = form.call_curve(&strikes).unwrap();
        prop_assert!(validate_call_curve(&curve, spot, 1e-9).unwrap().ok);

        let x = node as f64;
        prop_assume!(form.atoms.iter().all(|a| a.0 != x));
        let w = frac * 0.1f64.min(spot / (2.0 * x));
        let mut bad = form.clone();
        bad.atoms.push((x, -w));
        bad.atoms[0].1 += w;
        prop_assert!(!bad.is_positive(1e-12));
        let spot = bad.price(&Payoff::forward(0.0).unwrap()).unwrap();
        let curve = bad.call_curve(&strikes).unwrap();
        let v = validate_call_curve(&curve, spot, 1e-9).unwrap();
        prop_assert!(v.has(ViolationKind::NonConvex), "{:?}", v.violations);
    }

    #[test]
    fn negative_slope_weight_is_caught(form in positive_form(), frac in 1e-3..1.0f64) {
        let mean = form.price(&Payoff::forward(0.0).unwrap()).unwrap() - form.boundary.linear_inf;
        prop_assume!(mean > 1e-2);
        let mut bad = form.clone();
        bad.boundary = BoundaryWeights::linear(-frac * mean / 2.0);
        let strikes: Vec<f64> = (0..=100).map(|i| 40.0 * i as f64).collect();
        let spot = bad.price(&Payoff::forward(0.0).unwrap()).unwrap();
        let curve = bad.call_curve(&strikes).unwrap();
        let v = validate_call_curve(&curve, spot, 1e-9).unwrap();
        prop_assert!(v.has(ViolationKind::Negative), "{:?}", v.violations);
    }

    #[test]
    fn measure_forms_have_vanishing_calls(mass in 0.1..1.0f64, scale in 10.0..200.0f64) {
        let form = GeneralizedPricingForm::new(
            vec![(0.0, 1.0 - mass)],
            Some(Density::exponential(mass, scale)),
            BoundaryWeights::zero(),
        )
        .unwrap();
        let spot = mass * scale;
        let far = form.price(&Payoff::call(100.0 * spot.max(1.0)).unwrap()).unwrap();
        let tail = mass * scale * (-100.0 * spot.max(1.0) / scale).exp();
        prop_assert!(far.abs() <= tail + 1e-12, "{far} vs {tail}");
    }

    #[test]
    fn implied_form_roundtrip(a in 0.0..100.0f64) {
        let form = GeneralizedPricingForm::exponential_with_tail_weight(100.0, a);
        let strikes: Vec<f64> = (0..=2000).map(|i| i as f64).collect();
        let curve = form.call_curve(&strikes).unwrap();
        let imp = implied_form_from_curve(&curve, 100.0, &ImpliedFormOptions::default()).unwrap();
        prop_assert!((imp.tail_limit - a).abs() < 1e-3);
        prop_assert!((imp.form.atoms[0].1 - a / 100.0).abs() < 1e-3);
        prop_assert_eq!(imp.representable_by_probability, a <= 1e-6);
        let d = imp.form.density.as_ref().unwrap();
        for k in [10.0, 100.0, 300.0, 500.0] {
            let exact = (100.0 - a) / 1e4 * (-k / 100.0f64).exp();
            prop_assert!((d.value_at(k) - exact).abs() <= 1e-3 * exact + 1e-12);
        }
    }
}

#[test]
fn power_call_norm_is_infinite() {
    let f = Payoff::power_call(100.0).unwrap();
    assert_eq!(payoff_norm_default(&f, DominatingFunction::Linear), NormValue::Infinite);
}

#[test]
fn sampled_curve_of_intro_form() {
    let form = GeneralizedPricingForm::exponential_with_tail_weight(100.0, 5.0);
    let curve = CallCurve::from_fn((0..=20).map(|i| 10.0 * i as f64).collect(), |k| {
        5.0 + 95.0 * (-k / 100.0f64).exp()
    });
    let priced = form.call_curve(&curve.strikes).unwrap();
    for (a, b) in priced.prices.iter().zip(&curve.prices) {
        assert!((a - b).abs() < 1e-8);
    }
}
