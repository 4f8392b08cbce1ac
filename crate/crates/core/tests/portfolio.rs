use gvm_core::kernels::KernelSpec;
use gvm_core::market::{MarketSpec, SeasonalityFn, Theta};
use gvm_core::portfolio::{optimal_delta, CRRAPolicy};
use gvm_core::simulation::{girsanov_density, mc_estimate, PathEnsemble, SeedSpec, TimeGrid};
use proptest::prelude::*;

fn market() -> MarketSpec {
    MarketSpec::new(
        vec![KernelSpec::rl(0.3).unwrap(), KernelSpec::std_ou(-1.0).unwrap()],
        vec![1.0, 1.5],
        SeasonalityFn::Constant { level: 40.0 },
        Theta::piecewise(vec![0.0, 0.5], vec![vec![0.3, -0.2], vec![0.1, 0.4]]).unwrap(),
        1.5,
    )
    .unwrap()
}

#[test]
fn closed_form_constants() {
    let th = Theta::constant(vec![0.2]).unwrap();
    let p = CRRAPolicy::new(0.5, 1.0, 1.0, th.clone()).unwrap();
    assert!((p.beta() - 1.0).abs() < 1e-15);
    assert!((p.c() + 2.0).abs() < 1e-15);
    // H0 = exp(½ β/(1-γ) ∫|θ|²) = exp(0.04)
    assert!((p.h0() - 0.04f64.exp()).abs() < 1e-14);
    assert!((p.expected_utility() - 2.0 * 0.04f64.exp().sqrt()).abs() < 1e-13);
    let log = CRRAPolicy::new(0.0, 2.0, 1.0, th).unwrap();
    assert!(log.is_log());
    assert_eq!(log.h0(), 1.0);
    assert!((log.expected_utility() - (2.0f64.ln() + 0.02)).abs() < 1e-14);
}

#[test]
fn invalid_parameters_are_rejected() {
    let th = Theta::constant(vec![0.2]).unwrap();
    assert!(CRRAPolicy::new(1.0, 1.0, 1.0, th.clone()).is_err());
    assert!(CRRAPolicy::new(0.5, 0.0, 1.0, th.clone()).is_err());
    assert!(CRRAPolicy::new(0.5, 1.0, 0.0, th).is_err());
    assert!(CRRAPolicy::for_market(&market(), 0.5, 1.0, 1.2).is_err());
}

#[test]
fn optimal_wealth_is_a_positive_q_martingale() {
    let m = market();
    let e = PathEnsemble::sample_increments(TimeGrid::uniform(0.9, 90).unwrap(), 40_000, 2, SeedSpec::new(8)).unwrap();
    let z = girsanov_density(m.theta(), &e).unwrap();
    for gamma in [-1.0, 0.0, 0.5] {
        let p = CRRAPolicy::for_market(&m, gamma, 1.0, 0.9).unwrap();
        for (k, t) in [(30usize, 0.3), (60, 0.6), (90, 0.9)] {
            let zt = z.column(k);
            let weighted: Vec<f64> = zt
                .iter()
                .map(|&zz| {
                    let x = p.optimal_wealth(t, zz).unwrap();
                    assert!(x > 0.0);
                    zz * x
                })
                .collect();
            let est = mc_estimate(&weighted).unwrap();
            assert!((est.mean - 1.0).abs() <= 3.0 * est.std_err.max(1e-12), "gamma={gamma} t={t}: {est:?}");
        }
    }
}

#[test]
fn delta_solves_the_hedge_equation() {
    let m = market();
    let p = CRRAPolicy::for_market(&m, 0.5, 1.0, 0.9).unwrap();
    for t in [0.1, 0.7] {
        let k = m.kernel_matrix(t).unwrap();
        let th = m.theta().at(t).to_vec();
        let d = optimal_delta(&p, 1.3, &k, &th).unwrap();
        for i in 0..2 {
            let lhs: f64 = (0..2).map(|j| d[j] * k.entries()[(j, i)]).sum();
            let rhs = 1.3 / (1.0 - 0.5) * th[i];
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}

#[test]
fn policy_json_round_trip() {
    let p = CRRAPolicy::for_market(&market(), -1.0, 2.0, 0.9).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<CRRAPolicy>(&text).unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn terminal_wealth_equals_optimal_wealth_at_horizon(gamma in -3.0f64..0.9, z in 0.05f64..5.0, th in -1.0f64..1.0) {
        let p = CRRAPolicy::new(gamma, 1.5, 1.0, Theta::constant(vec![th]).unwrap()).unwrap();
        let a = p.terminal_wealth(z).unwrap();
        let b = p.optimal_wealth(1.0, z).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn utility_is_increasing(gamma in -3.0f64..0.9, x in 0.01f64..10.0, dx in 0.01f64..1.0) {
        let p = CRRAPolicy::new(gamma, 1.0, 1.0, Theta::zero(1)).unwrap();
        prop_assert!(p.utility(x + dx) > p.utility(x));
    }
}
