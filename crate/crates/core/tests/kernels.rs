use gvm_core::kernels::{
    fbm_kernel_high, fbm_kernel_low, ou_kernel, ou_kernel_diff, reduced_low_kernel, rl_kernel,
    fbm_bar_constant, KernelSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

#[test]
fn smooth_kernels_vanish_on_the_diagonal() {
    for h in [0.55, 0.75, 0.95] {
        for t in [0.1, 1.0, 3.0] {
            assert_eq!(rl_kernel(h, t, t).unwrap(), 0.0);
            assert_eq!(fbm_kernel_high(h, t, t).unwrap(), 0.0);
        }
    }
    assert!(KernelSpec::std_ou(0.7).unwrap().eval(1.0, 1.0).unwrap().is_finite());
}

#[test]
fn rough_kernels_report_diagonal_singularity() {
    assert!(rl_kernel(0.3, 1.0, 1.0).is_err());
    assert!(fbm_kernel_low(0.3, 1.0, 1.0).is_err());
}

#[test]
fn brownian_limit_of_fbm_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let t = 0.1 + 2.0 * rng.random::<f64>();
        let s = t * (0.01 + 0.98 * rng.random::<f64>());
        let hi = fbm_kernel_high(0.501, t, s).unwrap();
        let lo = fbm_kernel_low(0.499, t, s).unwrap();
        assert!((hi - 1.0).abs() < 2e-2, "t={t} s={s} high {hi}");
        assert!((lo - 1.0).abs() < 2e-2, "t={t} s={s} low {lo}");
    }
}

#[test]
fn ou_forms_agree_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bases = [
        KernelSpec::rl(0.6).unwrap(),
        KernelSpec::rl(0.75).unwrap(),
        KernelSpec::rl(0.9).unwrap(),
        KernelSpec::fbm(0.6).unwrap(),
        KernelSpec::fbm(0.8).unwrap(),
    ];
    for base in &bases {
        for _ in 0..400 {
            let t = 0.05 + 1.95 * rng.random::<f64>();
            let s = t * (0.01 + 0.98 * rng.random::<f64>());
            let a = ou_kernel(0.7, base, t, s).unwrap();
            let b = ou_kernel_diff(0.7, base, t, s).unwrap();
            assert!((a - b).abs() <= 1e-7, "{base:?} t={t} s={s}: {a} vs {b}");
        }
    }
}

#[test]
fn ou_with_constant_base_is_exponential() {
    let one = KernelSpec::constant(1.0).unwrap();
    for (t, s) in [(1.0, 0.0), (2.0, 0.5), (0.3, 0.29)] {
        let v = ou_kernel(-0.4, &one, t, s).unwrap();
        assert!((v - (-0.4f64 * (t - s)).exp()).abs() < 1e-10);
    }
}

#[test]
fn covariance_identity_on_grid() {
    let pts = [0.2, 0.4, 0.6, 0.8, 1.0];
    for h in [0.3, 0.7] {
        let k = KernelSpec::fbm(h).unwrap();
        for &s in &pts {
            for &t in &pts {
                let v = k.covariance(s, t).unwrap();
                assert!((v - fbm_cov(h, s, t)).abs() < 1e-5, "H={h} s={s} t={t}");
            }
        }
    }
}

#[test]
fn flow_kernel_shrinks_to_point_kernel() {
    let k = KernelSpec::fbm(0.7).unwrap();
    let (t, tj) = (0.5, 1.0);
    let gaps: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&w| (k.flow_kernel(t, tj, tj + w).unwrap() - k.eval(tj + 0.5 * w, t).unwrap()).abs())
        .collect();
    // the kernel is smooth away from the diagonal, so the midpoint error is second order
    assert!(gaps[1] < 0.35 * gaps[0] && gaps[2] < 0.35 * gaps[1], "{gaps:?}");
}

#[test]
fn reduced_form_matches_direct_rough_kernel() {
    for h in [0.05, 0.2, 0.4] {
        for (t, s) in [(1.0, 0.5), (2.0, 1e-6), (1.0, 0.999)] {
            let direct = fbm_kernel_low(h, t, s).unwrap();
            let reduced = fbm_bar_constant(h) * s.powf(h - 0.5) * reduced_low_kernel(h, t / s).unwrap();
            assert!((direct / reduced - 1.0).abs() < 1e-9, "H={h} t={t} s={s}");
        }
    }
}

#[test]
fn kernel_json_round_trip() {
    let specs = [
        KernelSpec::constant(2.5).unwrap(),
        KernelSpec::rl(0.3).unwrap(),
        KernelSpec::fbm(0.8).unwrap(),
        KernelSpec::fbm(0.2).unwrap(),
        KernelSpec::std_ou(-1.5).unwrap(),
        KernelSpec::volterra_ou(0.5, KernelSpec::fbm(0.3).unwrap()).unwrap(),
    ];
    for k in specs {
        let text = serde_json::to_string(&k).unwrap();
        let back: KernelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, k);
    }
}

#[test]
fn invalid_kernel_json_is_rejected() {
    assert!(serde_json::from_str::<KernelSpec>(r#"{"type":"rl","hurst":1.5}"#).is_err());
    assert!(serde_json::from_str::<KernelSpec>(r#"{"type":"fbm","hurst":0.5}"#).is_err());
    assert!(serde_json::from_str::<KernelSpec>(
        r#"{"type":"volterra_ou","alpha":1,"base":{"type":"std_ou","alpha":1}}"#
    )
    .is_err());
}

fn any_kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|h| KernelSpec::rl(h).unwrap()),
        (0.05f64..0.45).prop_map(|h| KernelSpec::fbm(h).unwrap()),
        (0.55f64..0.95).prop_map(|h| KernelSpec::fbm(h).unwrap()),
        (-2.0f64..2.0).prop_map(|a| KernelSpec::std_ou(a).unwrap()),
        ((-1.0f64..1.0), (0.55f64..0.9))
            .prop_map(|(a, h)| KernelSpec::volterra_ou(a, KernelSpec::rl(h).unwrap()).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l2_segment_is_nondecreasing(k in any_kernel(), t in 0.05f64..2.0, dt in 0.01f64..1.0) {
        let a = k.l2_segment(0.0, t, t).unwrap();
        let b = k.l2_segment(0.0, t + dt, t + dt).unwrap();
        prop_assert!(a.is_finite() && a > 0.0);
        prop_assert!(b + 1e-9 >= a, "{a} then {b}");
    }

    #[test]
    fn fbm_variance_is_power_law(h in 0.02f64..0.98, t in 0.01f64..5.0) {
        prop_assume!((h - 0.5).abs() > 1e-3);
        let k = KernelSpec::fbm(h).unwrap();
        let v = k.l2_segment(0.0, t, t).unwrap();
        prop_assert!((v / t.powf(2.0 * h) - 1.0).abs() < 1e-7, "H={} t={} v={}", h, t, v);
    }

    #[test]
    fn fbm_covariance_identity(h in 0.1f64..0.9, s in 0.05f64..1.5, t in 0.05f64..1.5) {
        prop_assume!((h - 0.5).abs() > 1e-3);
        let k = KernelSpec::fbm(h).unwrap();
        let v = k.covariance(s, t).unwrap();
        prop_assert!((v - fbm_cov(h, s, t)).abs() < 1e-5);
    }

    #[test]
    fn increment_variance_matches_stationary_increments(h in 0.1f64..0.9, s in 0.05f64..1.0, d in 0.01f64..1.0) {
        prop_assume!((h - 0.5).abs() > 1e-3);
        let k = KernelSpec::fbm(h).unwrap();
        let v = k.increment_variance(s, s + d).unwrap();
        prop_assert!((v - d.powf(2.0 * h)).abs() < 1e-5);
    }

    #[test]
    fn rl_integrals_match_quadrature(h in 0.05f64..0.95, t in 0.1f64..2.0, frac in 0.0f64..0.9) {
        let k = KernelSpec::rl(h).unwrap();
        let a = frac * t;
        let as_ou = KernelSpec::volterra_ou(0.0, k.clone()).unwrap();
        let closed = k.l2_segment(a, t, t).unwrap();
        let quad = as_ou.l2_segment(a, t, t).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-7 * closed.max(1.0));
    }
}
