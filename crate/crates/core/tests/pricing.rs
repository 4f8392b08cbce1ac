use gvm_core::kernels::KernelSpec;
use gvm_core::market::{MarketSpec, SeasonalityFn, Theta};
use gvm_core::pricing::{
    bachelier_call, bachelier_call_alt, bachelier_call_delta, bachelier_put, bachelier_put_direct,
    bachelier_vol, call_price, discounted, price_option, put_price, reliability_option_price,
    tracking_error, DiscountCurve, OptionKind, ReliabilityOptionSpec, VanillaOption,
};
use gvm_core::special::INV_SQRT_2PI;
use proptest::prelude::*;

fn market() -> MarketSpec {
    MarketSpec::new(
        vec![KernelSpec::rl(0.75).unwrap(), KernelSpec::fbm(0.3).unwrap()],
        vec![1.0, 2.0],
        SeasonalityFn::Constant { level: 50.0 },
        Theta::constant(vec![0.2, 0.1]).unwrap(),
        2.0,
    )
    .unwrap()
}

#[test]
fn bachelier_examples() {
    assert!((bachelier_call(100.0, 100.0, 10.0) - 10.0 * INV_SQRT_2PI).abs() < 1e-12);
    assert!((bachelier_call_delta(100.0, 100.0, 10.0) - 0.5).abs() < 1e-15);
    assert_eq!(bachelier_call(105.0, 100.0, 0.0), 5.0);
    assert_eq!(bachelier_call(95.0, 100.0, 0.0), 0.0);
    // d = 0.5, N(0.5) = 0.691462461274013, n(0.5) = 0.3520653267642995
    let c = bachelier_call(100.0, 95.0, 10.0);
    assert!((c - 10.0 * (0.5 * 0.691462461274013 + 0.3520653267642995)).abs() < 1e-12);
    assert!((bachelier_put(100.0, 95.0, 10.0) - (c - 5.0)).abs() < 1e-12);
    assert!((bachelier_call_delta(100.0, 95.0, 10.0) - 0.691462461274013).abs() < 1e-14);
    assert_eq!(bachelier_put(90.0, 100.0, 0.0), 10.0);
}

#[test]
fn reliability_option_at_the_money_constant_kernel() {
    let m = MarketSpec::new(
        vec![KernelSpec::constant(1.0).unwrap()],
        vec![2.0],
        SeasonalityFn::Constant { level: 7.0 },
        Theta::zero(1),
        2.0,
    )
    .unwrap();
    let (t1, t2) = (0.5f64, 1.5f64);
    let r = reliability_option_price(&m, &ReliabilityOptionSpec { strike: 7.0, window: (t1, t2) }).unwrap();
    let exact = INV_SQRT_2PI * 2.0 / 3.0 * (t2.powf(1.5) - t1.powf(1.5));
    assert!((r.price - exact).abs() < 1e-8 * exact);
    let far = reliability_option_price(&m, &ReliabilityOptionSpec { strike: 7.0 + 30.0, window: (t1, t2) }).unwrap();
    assert!(far.price < 1e-12);
}

#[test]
fn vol_is_root_of_kernel_l2_sum() {
    let m = market();
    let sigma = bachelier_vol(&m, 0.2, 0.7, 1.0).unwrap();
    let v: f64 = m.factors().iter().map(|k| k.l2_segment(0.2, 0.7, 1.0).unwrap()).sum();
    assert!((sigma * sigma - v).abs() < 1e-12);
}

#[test]
fn market_prices_satisfy_parity() {
    let m = market();
    let call = VanillaOption::new(OptionKind::Call, 51.0, 0.5, 1.0).unwrap();
    let put = VanillaOption::new(OptionKind::Put, 51.0, 0.5, 1.0).unwrap();
    let c = call_price(&m, &call, 0.1, 50.3).unwrap();
    let p = put_price(&m, &put, 0.1, 50.3).unwrap();
    assert!((c - p - (50.3 - 51.0)).abs() < 1e-12);
}

#[test]
fn option_validation() {
    assert!(VanillaOption::new(OptionKind::Call, 50.0, 1.5, 1.0).is_err());
    assert!(VanillaOption::new(OptionKind::Call, f64::NAN, 0.5, 1.0).is_err());
    let m = market();
    let late = VanillaOption::new(OptionKind::Call, 50.0, 0.5, 1.0).unwrap();
    assert!(call_price(&m, &late, 0.6, 50.0).is_err());
}

#[test]
fn discounting_uses_integrated_rate() {
    let curve = DiscountCurve::piecewise(vec![0.0, 1.0], vec![0.02, 0.04]).unwrap();
    assert!((curve.integral(0.5, 1.5).unwrap() - 0.03).abs() < 1e-15);
    assert!((discounted(10.0, &curve, 0.5, 1.5).unwrap() - 10.0 * (-0.03f64).exp()).abs() < 1e-13);
    let m = market();
    let opt = VanillaOption::new(OptionKind::Call, 50.0, 0.9, 1.0).unwrap();
    let r = price_option(&m, &opt, 0.0, 50.0, &DiscountCurve::flat(0.05).unwrap()).unwrap();
    assert!((r.price - (-0.045f64).exp() * r.sigma * INV_SQRT_2PI).abs() < 1e-12);
    assert!((r.hedge_delta - 0.5).abs() < 1e-15);
}

#[test]
fn reliability_option_zero_vol_is_intrinsic() {
    let m = MarketSpec::new(
        vec![KernelSpec::constant(0.0).unwrap()],
        vec![1.0],
        SeasonalityFn::PiecewiseLinear {
            knots: vec![(0.0, 10.0), (1.0, 20.0)],
        },
        Theta::zero(1),
        1.0,
    )
    .unwrap();
    // ∫_0^1 (10 + 10T - 15)^+ dT = ∫_{1/2}^1 (10T - 5) dT = 1.25
    let r = reliability_option_price(&m, &ReliabilityOptionSpec { strike: 15.0, window: (0.0, 1.0) }).unwrap();
    assert!((r.price - 1.25).abs() < 1e-8, "{r:?}");
}

#[test]
fn tracking_error_vanishes_for_constant_kernel() {
    let m = MarketSpec::new(
        vec![KernelSpec::constant(1.3).unwrap()],
        vec![1.0],
        SeasonalityFn::Constant { level: 0.0 },
        Theta::zero(1),
        2.0,
    )
    .unwrap();
    assert!(tracking_error(&m, 0.5, 1.0, 1.0, 1.5).unwrap().abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parity_and_formula_equivalence(f in 50.0f64..150.0, k in 50.0f64..150.0, s in 0.1f64..30.0) {
        let c = bachelier_call(f, k, s);
        prop_assert!((c - bachelier_put(f, k, s) - (f - k)).abs() <= 1e-12);
        prop_assert!((c - bachelier_put_direct(f, k, s) - (f - k)).abs() <= 1e-12);
        prop_assert!((c - bachelier_call_alt(f, k, s)).abs() <= 1e-12);
        prop_assert!(c >= (f - k).max(0.0) - 1e-12);
    }

    #[test]
    fn call_monotone_in_strike_and_vol(f in 50.0f64..150.0, k in 50.0f64..150.0, dk in 0.01f64..5.0, s in 0.1f64..30.0, ds in 0.01f64..5.0) {
        // deep in the money the time value drops below the rounding unit of the price
        let slack = 4.0 * f64::EPSILON * f.max(k);
        prop_assert!(bachelier_call(f, k + dk, s) <= bachelier_call(f, k, s) + slack);
        prop_assert!(bachelier_call(f, k, s + ds) >= bachelier_call(f, k, s) - slack);
    }

    #[test]
    fn delta_is_strictly_inside_unit_interval(f in 90.0f64..110.0, k in 90.0f64..110.0, s in 0.5f64..30.0) {
        // beyond |d| = 8 the normal cdf rounds to 0 or 1 in double precision
        prop_assume!(((f - k) / s).abs() < 8.0);
        let d = bachelier_call_delta(f, k, s);
        prop_assert!(d > 0.0 && d < 1.0);
    }
}
