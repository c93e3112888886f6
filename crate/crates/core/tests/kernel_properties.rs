use posform::kernel::{bs_generator, propagate, KernelSpace, PricingKernelOperator, Stepping};
use posform::payoff_space::Payoff;
use posform::stochvol::bs_call;
use proptest::prelude::*;

fn smooth_payoff(space: &KernelSpace<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = space
        .grid
        .iter()
        .map(|&s| (-((s - 100.0) / 30.0).powi(2)).exp())
        .collect();
    if space.slope {
        v.push(0.0);
    }
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn plan(steps: usize) -> Stepping<f64> {
    Stepping {
        horizon: 1.0,
        steps,
        theta: 0.5,
        rannacher: false,
    }
}

#[test]
fn composition_converges_at_second_order() {
    let space = KernelSpace::uniform(0.0, 400.0, 101, true).unwrap();
    let h = bs_generator(0.03, 0.2, &space).unwrap();
    let f = smooth_payoff(&space);
    let u: Vec<Vec<f64>> = [4, 8, 16]
        .iter()
        .map(|&n| propagate(&f, &h, &plan(n)).unwrap())
        .collect();
    let e1 = max_diff(&u[0], &u[1]);
    let e2 = max_diff(&u[1], &u[2]);
    let order = (e1 / e2).log2();
    assert!((1.7..=2.3).contains(&order), "order {order} ({e1}, {e2})");
}

#[test]
fn split_horizon_matches_single_propagator() {
    let space = KernelSpace::<f64>::uniform(0.0, 800.0, 400, true).unwrap();
    let h = bs_generator(0.0, 0.2, &space).unwrap();
    let first = PricingKernelOperator::propagator(&h, 0.0, &Stepping::crank_nicolson(0.5, 32)).unwrap();
    let second = PricingKernelOperator::propagator(&h, 0.5, &Stepping::crank_nicolson(0.75, 48)).unwrap();
    let u = first.compose(&second).unwrap();
    assert_eq!((u.t1, u.t2), (0.0, 1.25));
    let call = space.vector_of(&Payoff::call(100.0).unwrap()).unwrap();
    let v = space.interpolate(&u.apply(&call), 100.0);
    assert!((v - bs_call(100.0, 100.0, 0.2, 1.25, 0.0)).abs() < 0.05, "{v}");
}

#[test]
fn positive_operators_compose_to_unit_norm() {
    let space = KernelSpace::<f64>::log_uniform(100.0, 120, true).unwrap();
    let h = bs_generator(0.02, 0.3, &space).unwrap();
    let a = PricingKernelOperator::step(&h, 0.0, 0.1, 1.0).unwrap();
    let b = PricingKernelOperator::step(&h, 0.1, 0.3, 1.0).unwrap();
    let u = a.compose(&b).unwrap();
    assert!(u.is_positive(1e-14));
    assert!((u.operator_norm(&space.fstar()).unwrap() - 1.0).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn implicit_steps_preserve_positivity(r in 0.0..0.1f64, sigma in 0.05..0.8f64, dt in 0.001..2.0f64,
                                          k in 20.0..300.0f64) {
        let space = KernelSpace::log_uniform(100.0, 80, true).unwrap();
        let h = bs_generator(r, sigma, &space).unwrap();
        let u = PricingKernelOperator::step(&h, 0.0, dt, 1.0).unwrap();
        prop_assert!(u.is_positive(1e-13));
        prop_assert!((u.operator_norm(&space.fstar()).unwrap() - 1.0).abs() < 1e-8);
        for f in [Payoff::call(k).unwrap(), Payoff::put(k).unwrap()] {
            let v = u.apply(&space.vector_of(&f).unwrap());
            prop_assert!(v.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn crank_nicolson_positive_below_bound(r in 0.0..0.1f64, sigma in 0.05..0.8f64, frac in 0.05..1.0f64) {
        let space = KernelSpace::log_uniform(100.0, 80, true).unwrap();
        let h = bs_generator(r, sigma, &space).unwrap();
        let dt = frac * h.positivity_dt_bound(0.5);
        let u = PricingKernelOperator::step(&h, 0.0, dt, 0.5).unwrap();
        prop_assert!(u.is_positive(1e-13), "min {}", u.min_entry());
        prop_assert!((u.operator_norm(&space.fstar()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn short_rate_is_read_back(r in 0.0..0.2f64, sigma in 0.0..0.6f64) {
        let space = KernelSpace::log_uniform(100.0, 60, true).unwrap();
        let h = bs_generator(r, sigma, &space).unwrap();
        for x in h.implied_short_rate() {
            prop_assert!((x - r).abs() < 1e-10);
        }
    }
}
