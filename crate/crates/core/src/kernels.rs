//! Scalar Volterra kernels `K(t, s)` and the integrals built on them.
//!
//! Every kernel is square integrable in `s` on `[0, t]` but several are
//! singular at `s = t` (rough regimes) or at `s = 0` (fractional Brownian
//! motion representations). Point evaluation at a singular point returns
//! [`Error::SingularPoint`]; the integral operations route around those
//! points with endpoint substitutions, see [`crate::quadrature`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    try_integrate, try_integrate_singular, try_integrate_singular_dist, QuadratureConfig,
};
use crate::special::{beta, beta_reg, gamma};

/// Which side of 1/2 a Hurst exponent sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HurstRegime {
    /// `H < 1/2`
    Rough,
    /// `H = 1/2`
    Brownian,
    /// `H > 1/2`
    Smooth,
}

/// Hurst exponent in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstExponent {
    value: f64,
    regime: HurstRegime,
}

impl HurstExponent {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hurst exponent {value} outside (0, 1)"
            )));
        }
        let regime = if value < 0.5 {
            HurstRegime::Rough
        } else if value > 0.5 {
            HurstRegime::Smooth
        } else {
            HurstRegime::Brownian
        };
        Ok(Self { value, regime })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn regime(&self) -> HurstRegime {
        self.regime
    }

    /// `H - 1/2`, the exponent of `(t - s)` near the diagonal.
    pub fn excess(&self) -> f64 {
        self.value - 0.5
    }
}

impl TryFrom<f64> for HurstExponent {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HurstExponent> for f64 {
    fn from(h: HurstExponent) -> f64 {
        h.value
    }
}

/// `c_{H,U} = 1 / Γ(H + 1/2)`.
pub fn rl_constant(h: f64) -> f64 {
    1.0 / gamma(h + 0.5)
}

/// `c̄_H = sqrt(2H Γ(3/2 - H) / (Γ(H + 1/2) Γ(2 - 2H)))`.
pub fn fbm_bar_constant(h: f64) -> f64 {
    (2.0 * h * gamma(1.5 - h) / (gamma(h + 0.5) * gamma(2.0 - 2.0 * h))).sqrt()
}

/// `c_H = (H - 1/2) c̄_H`, the constant of the compact-interval
/// representation for `H > 1/2`.
pub fn fbm_high_constant(h: f64) -> f64 {
    (h - 0.5) * fbm_bar_constant(h)
}

/// A scalar Volterra kernel with its normalizing constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw", into = "KernelSpecRaw")]
pub enum KernelSpec {
    Constant {
        c: f64,
    },
    RiemannLiouville {
        hurst: HurstExponent,
        norm: f64,
    },
    /// Fractional Brownian motion, `H > 1/2`; `norm` is `c_H`.
    FbmHigh {
        hurst: HurstExponent,
        norm: f64,
    },
    /// Fractional Brownian motion, `H < 1/2`; `norm` is `c̄_H`.
    FbmLow {
        hurst: HurstExponent,
        norm: f64,
    },
    /// `K(t, s) = exp(alpha (t - s))`.
    StdOu {
        alpha: f64,
    },
    /// Langevin equation `dY = alpha Y dt + dZ` driven by the Volterra
    /// process with kernel `base`.
    VolterraOu {
        alpha: f64,
        base: Box<KernelSpec>,
    },
}

impl KernelSpec {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter("constant kernel must be finite".into()));
        }
        Ok(Self::Constant { c })
    }

    pub fn rl(h: f64) -> Result<Self> {
        let hurst = HurstExponent::new(h)?;
        Ok(Self::RiemannLiouville {
            hurst,
            norm: rl_constant(h),
        })
    }

    /// Fractional Brownian motion kernel; picks the representation from the
    /// regime of `h`.
    pub fn fbm(h: f64) -> Result<Self> {
        let hurst = HurstExponent::new(h)?;
        match hurst.regime() {
            HurstRegime::Smooth => Ok(Self::FbmHigh {
                hurst,
                norm: fbm_high_constant(h),
            }),
            HurstRegime::Rough => Ok(Self::FbmLow {
                hurst,
                norm: fbm_bar_constant(h),
            }),
            HurstRegime::Brownian => Err(Error::InvalidParameter(
                "fbm kernel with H = 1/2 is the constant kernel 1".into(),
            )),
        }
    }

    pub fn std_ou(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        Ok(Self::StdOu { alpha })
    }

    pub fn volterra_ou(alpha: f64, base: KernelSpec) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if base.is_ou() {
            return Err(Error::InvalidParameter(
                "Volterra OU base must not itself be an OU kernel".into(),
            ));
        }
        Ok(Self::VolterraOu {
            alpha,
            base: Box::new(base),
        })
    }

    pub fn is_ou(&self) -> bool {
        matches!(self, Self::StdOu { .. } | Self::VolterraOu { .. })
    }

    pub fn hurst(&self) -> Option<HurstExponent> {
        match self {
            Self::RiemannLiouville { hurst, .. }
            | Self::FbmHigh { hurst, .. }
            | Self::FbmLow { hurst, .. } => Some(*hurst),
            Self::VolterraOu { base, .. } => base.hurst(),
            _ => None,
        }
    }

    /// Exponent `e` such that `K(t, s) ~ (t - s)^e` as `s -> t`, or 0 when
    /// the kernel is smooth and nonzero there.
    pub fn diagonal_exponent(&self) -> f64 {
        match self {
            Self::RiemannLiouville { hurst, .. }
            | Self::FbmHigh { hurst, .. }
            | Self::FbmLow { hurst, .. } => hurst.excess(),
            Self::VolterraOu { base, .. } => base.diagonal_exponent(),
            Self::Constant { .. } | Self::StdOu { .. } => 0.0,
        }
    }

    /// Exponent `e` such that `K(t, s) ~ s^e` as `s -> 0`.
    pub fn origin_exponent(&self) -> f64 {
        match self {
            Self::FbmHigh { hurst, .. } => -hurst.excess(),
            Self::FbmLow { hurst, .. } => hurst.excess(),
            Self::VolterraOu { base, .. } => base.origin_exponent(),
            _ => 0.0,
        }
    }

    /// True when point evaluation needs `s > 0`.
    pub fn needs_positive_s(&self) -> bool {
        match self {
            Self::FbmHigh { .. } | Self::FbmLow { .. } => true,
            Self::VolterraOu { base, .. } => base.needs_positive_s(),
            _ => false,
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        self.eval_with(t, s, &QuadratureConfig::default())
    }

    pub fn eval_with(&self, t: f64, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
        check_order("kernel", s, t)?;
        self.eval_offset(t, s, t - s, cfg)
    }

    /// Evaluation with the lag `d = t - s` supplied by the caller, who may
    /// know it more accurately than the rounded difference.
    fn eval_offset(&self, t: f64, s: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
        match self {
            Self::Constant { c } => Ok(*c),
            Self::RiemannLiouville { hurst, norm } => rl_eval(hurst, *norm, t, s, d),
            Self::FbmHigh { hurst, norm } => fbm_high_eval(hurst.value(), *norm, s, d, cfg),
            Self::FbmLow { hurst, norm } => fbm_low_eval(hurst.value(), *norm, t, s, d),
            Self::StdOu { alpha } => Ok((alpha * d).exp()),
            Self::VolterraOu { alpha, base } => {
                if supports_diff_form(base) {
                    ou_diff_eval(*alpha, base, s, d, cfg)
                } else {
                    ou_eval(*alpha, base, t, s, d, cfg)
                }
            }
        }
    }

    /// `∫_a^b K(t, s) ds` for `0 <= a <= b <= t`.
    pub fn integral(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        self.integral_with(t, a, b, &QuadratureConfig::default())
    }

    pub fn integral_with(&self, t: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
        check_segment("kernel_integral", a, b, t)?;
        match self {
            Self::Constant { c } => Ok(c * (b - a)),
            Self::RiemannLiouville { hurst, norm } => {
                let p = hurst.value() + 0.5;
                Ok(norm * ((t - a).powf(p) - (t - b).powf(p)) / p)
            }
            Self::StdOu { alpha } => {
                if *alpha == 0.0 {
                    Ok(b - a)
                } else {
                    Ok(((alpha * (t - a)).exp() - (alpha * (t - b)).exp()) / alpha)
                }
            }
            _ => {
                let (le, re) = self.segment_exponents(a, b, t, 1.0);
                let inner = cfg.tightened();
                let r = try_integrate_singular_dist(
                    |s, _, db| self.eval_offset(t, s, lag(t, s, b, db), &inner),
                    a,
                    b,
                    le,
                    re,
                    cfg,
                )?;
                Ok(r.value)
            }
        }
    }

    /// `∫_a^b K(t, s)^2 ds` for `0 <= a <= b <= t`.
    pub fn l2_segment(&self, a: f64, b: f64, t: f64) -> Result<f64> {
        self.l2_segment_with(a, b, t, &QuadratureConfig::default())
    }

    pub fn l2_segment_with(&self, a: f64, b: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        check_segment("l2_segment", a, b, t)?;
        match self {
            Self::Constant { c } => Ok(c * c * (b - a)),
            Self::RiemannLiouville { hurst, norm } => {
                let p = 2.0 * hurst.value();
                Ok(norm * norm * ((t - a).powf(p) - (t - b).powf(p)) / p)
            }
            Self::StdOu { alpha } => {
                if *alpha == 0.0 {
                    Ok(b - a)
                } else {
                    let k = 2.0 * alpha;
                    Ok(((k * (t - a)).exp() - (k * (t - b)).exp()) / k)
                }
            }
            _ => {
                let (le, re) = self.segment_exponents(a, b, t, 2.0);
                let inner = cfg.tightened();
                let r = try_integrate_singular_dist(
                    |s, _, db| {
                        let k = self.eval_offset(t, s, lag(t, s, b, db), &inner)?;
                        Ok(k * k)
                    },
                    a,
                    b,
                    le,
                    re,
                    cfg,
                )?;
                Ok(r.value)
            }
        }
    }

    /// `E[Z_t Z_s] = ∫_0^{min(s,t)} K(t, u) K(s, u) du`.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        self.covariance_with(s, t, &QuadratureConfig::default())
    }

    pub fn covariance_with(&self, s: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        if lo < 0.0 {
            return Err(Error::domain("covariance", "negative time"));
        }
        if lo == hi {
            return self.l2_segment_with(0.0, lo, lo, cfg);
        }
        if lo == 0.0 {
            return Ok(0.0);
        }
        let le = leading(2.0 * self.origin_exponent());
        let re = leading(self.diagonal_exponent());
        let inner = cfg.tightened();
        let r = try_integrate_singular_dist(
            |u, _, db| {
                Ok(self.eval_offset(hi, u, hi - u, &inner)? * self.eval_offset(lo, u, db, &inner)?)
            },
            0.0,
            lo,
            le,
            re,
            cfg,
        )?;
        Ok(r.value)
    }

    /// `E|Z_t - Z_s|^2 = ∫_0^s (K(t,u) - K(s,u))^2 du + ∫_s^t K(t,u)^2 du`.
    pub fn increment_variance(&self, s: f64, t: f64) -> Result<f64> {
        self.increment_variance_with(s, t, &QuadratureConfig::default())
    }

    pub fn increment_variance_with(&self, s: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        check_order("increment_variance", s, t)?;
        if s < 0.0 {
            return Err(Error::domain("increment_variance", "negative time"));
        }
        if s == t {
            return Ok(0.0);
        }
        let tail = self.l2_segment_with(s, t, t, cfg)?;
        if s == 0.0 {
            return Ok(tail);
        }
        let le = leading(2.0 * self.origin_exponent());
        let d = self.diagonal_exponent();
        let re = if d < 0.0 { 2.0 * d } else { 0.0 };
        let inner = cfg.tightened();
        let head = try_integrate_singular_dist(
            |u, _, db| {
                let diff = self.eval_offset(t, u, t - u, &inner)? - self.eval_offset(s, u, db, &inner)?;
                Ok(diff * diff)
            },
            0.0,
            s,
            le,
            re,
            cfg,
        )?;
        Ok(head.value + tail)
    }

    /// Delivery-period average `(1/(Tk - Tj)) ∫_{Tj}^{Tk} K(T, t) dT`.
    pub fn flow_kernel(&self, t: f64, tj: f64, tk: f64) -> Result<f64> {
        self.flow_kernel_with(t, tj, tk, &QuadratureConfig::default())
    }

    pub fn flow_kernel_with(&self, t: f64, tj: f64, tk: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if !(tj < tk) {
            return Err(Error::domain(
                "flow_kernel",
                format!("delivery start {tj} must precede end {tk}"),
            ));
        }
        if t > tj {
            return Err(Error::domain(
                "flow_kernel",
                format!("t={t} after delivery start {tj}"),
            ));
        }
        if t < 0.0 {
            return Err(Error::domain("flow_kernel", "negative time"));
        }
        let len = tk - tj;
        match self {
            Self::Constant { c } => Ok(*c),
            Self::RiemannLiouville { hurst, norm } => {
                let p = hurst.value() + 0.5;
                Ok(norm * ((tk - t).powf(p) - (tj - t).powf(p)) / (p * len))
            }
            Self::StdOu { alpha } => {
                if *alpha == 0.0 {
                    Ok(1.0)
                } else {
                    Ok(((alpha * (tk - t)).exp() - (alpha * (tj - t)).exp()) / (alpha * len))
                }
            }
            _ => {
                let le = if t == tj {
                    leading(self.diagonal_exponent())
                } else {
                    0.0
                };
                let inner = cfg.tightened();
                let r = try_integrate_singular_dist(
                    |big_t, da, _| {
                        let d = if t == tj { da } else { big_t - t };
                        self.eval_offset(big_t, t, d, &inner)
                    },
                    tj,
                    tk,
                    le,
                    0.0,
                    cfg,
                )?;
                Ok(r.value / len)
            }
        }
    }

    /// Check that `∫_0^t K(t,s)^2 ds` is finite and nondecreasing on a probe
    /// grid of `(0, horizon]`.
    pub fn check_square_integrable(&self, horizon: f64) -> Result<()> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let mut prev = 0.0;
        for k in 1..=8 {
            let t = horizon * k as f64 / 8.0;
            let v = self.l2_segment(0.0, t, t)?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "kernel not square integrable at t={t}"
                )));
            }
            if v + 1e-9 * v.abs().max(1.0) < prev {
                return Err(Error::InvalidParameter(format!(
                    "∫K² decreases at t={t}; kernel is not a valid variance profile"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// Leading endpoint exponents of `K(t, ·)^power` on `[a, b]`.
    fn segment_exponents(&self, a: f64, b: f64, t: f64, power: f64) -> (f64, f64) {
        let le = if a == 0.0 {
            leading(power * self.origin_exponent())
        } else {
            0.0
        };
        let re = if b == t {
            leading(power * self.diagonal_exponent())
        } else {
            0.0
        };
        (le, re)
    }
}

/// `t - s`, taken from the exact endpoint distance when the segment ends at `t`.
fn lag(t: f64, s: f64, b: f64, db: f64) -> f64 {
    if b == t {
        db
    } else {
        t - s
    }
}

fn leading(e: f64) -> f64 {
    if e.is_finite() {
        e
    } else {
        0.0
    }
}

fn check_order(op: &'static str, s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) {
        return Err(Error::domain(op, "non-finite time"));
    }
    if s > t {
        return Err(Error::domain(op, format!("s={s} > t={t}")));
    }
    Ok(())
}

fn check_segment(op: &'static str, a: f64, b: f64, t: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && t.is_finite()) {
        return Err(Error::domain(op, "non-finite bounds"));
    }
    if a < 0.0 {
        return Err(Error::domain(op, format!("a={a} < 0")));
    }
    if a > b {
        return Err(Error::domain(op, format!("a={a} > b={b}")));
    }
    if b > t {
        return Err(Error::domain(op, format!("b={b} > T={t}")));
    }
    Ok(())
}

fn rl_eval(hurst: &HurstExponent, norm: f64, t: f64, s: f64, d: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::domain("rl_kernel", "negative time"));
    }
    if d <= 0.0 {
        return match hurst.regime() {
            HurstRegime::Smooth => Ok(0.0),
            HurstRegime::Brownian => Ok(norm),
            HurstRegime::Rough => Err(Error::SingularPoint { t, s }),
        };
    }
    Ok(norm * d.powf(hurst.excess()))
}

fn fbm_high_eval(h: f64, c_h: f64, s: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::domain("fbm_kernel_high", format!("s={s} must be > 0")));
    }
    if d <= 0.0 {
        return Ok(0.0);
    }
    // v = (u - s)^{H - 1/2} turns ∫_s^t u^{H-1/2} (u-s)^{H-3/2} du into
    // (H - 1/2)^{-1} ∫_0^{(t-s)^{H-1/2}} (s + v^p)^{H-1/2} dv, p = 1/(H - 1/2).
    let e = h - 0.5;
    let p = 1.0 / e;
    let upper = d.powf(e);
    let r = try_integrate(|v| Ok((s + v.powf(p)).powf(e)), 0.0, upper, cfg)?;
    Ok(c_h / e * s.powf(-e) * r.value)
}

fn fbm_low_eval(h: f64, c_bar: f64, t: f64, s: f64, d: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::domain("fbm_kernel_low", format!("s={s} must be > 0")));
    }
    if d <= 0.0 {
        return Err(Error::SingularPoint { t, s });
    }
    // With r = t/s and v = 1/w the integral in the reduced kernel is
    // B(1-2H, H+1/2) I_{1-1/r}(H+1/2, 1-2H), and 1 - 1/r = d/t.
    let e = h - 0.5;
    let a = h + 0.5;
    let b = 1.0 - 2.0 * h;
    let tail = beta(b, a) * beta_reg(a, b, d / t);
    let head = (t / s).powf(e) * (d / s).powf(e);
    Ok(c_bar * s.powf(e) * (head - e * tail))
}

/// Bases with `K(u, u) = 0` and an integrable first-argument derivative,
/// for which the single-integral OU form applies.
fn supports_diff_form(base: &KernelSpec) -> bool {
    match base {
        KernelSpec::RiemannLiouville { hurst, .. } | KernelSpec::FbmHigh { hurst, .. } => {
            hurst.regime() == HurstRegime::Smooth
        }
        _ => false,
    }
}

/// `c_{H,U} (t - s)^{H - 1/2}`.
pub fn rl_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    let hurst = HurstExponent::new(h)?;
    check_order("rl_kernel", s, t)?;
    rl_eval(&hurst, rl_constant(h), t, s, t - s)
}

/// Compact-interval fBm kernel for `H > 1/2`.
pub fn fbm_kernel_high(h: f64, t: f64, s: f64) -> Result<f64> {
    let hurst = HurstExponent::new(h)?;
    if hurst.regime() != HurstRegime::Smooth {
        return Err(Error::UnsupportedRegime {
            op: "fbm_kernel_high",
            msg: format!("H={h} is not above 1/2"),
        });
    }
    check_order("fbm_kernel_high", s, t)?;
    fbm_high_eval(h, fbm_high_constant(h), s, t - s, &QuadratureConfig::default())
}

/// fBm kernel for `H < 1/2`.
pub fn fbm_kernel_low(h: f64, t: f64, s: f64) -> Result<f64> {
    let hurst = HurstExponent::new(h)?;
    if hurst.regime() != HurstRegime::Rough {
        return Err(Error::UnsupportedRegime {
            op: "fbm_kernel_low",
            msg: format!("H={h} is not below 1/2"),
        });
    }
    check_order("fbm_kernel_low", s, t)?;
    fbm_low_eval(h, fbm_bar_constant(h), t, s, t - s)
}

/// Scale-free part of the rough fBm kernel,
/// `r^{H-1/2} (r-1)^{H-1/2} + (1/2 - H) ∫_1^r v^{H-3/2} (v-1)^{H-1/2} dv`,
/// so that `K_H(t, s) = c̄_H s^{H-1/2} reduced_low_kernel(H, t/s)`.
pub fn reduced_low_kernel(h: f64, r: f64) -> Result<f64> {
    reduced_low_kernel_with(h, r, &QuadratureConfig::default())
}

pub fn reduced_low_kernel_with(h: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::UnsupportedRegime {
            op: "reduced_low_kernel",
            msg: format!("H={h} is not in (0, 1/2)"),
        });
    }
    if r <= 1.0 {
        return Err(Error::domain("reduced_low_kernel", format!("r={r} must exceed 1")));
    }
    let e = h - 0.5;
    let integral = try_integrate_singular(
        |v| Ok(v.powf(h - 1.5) * (v - 1.0).powf(e)),
        1.0,
        r,
        e,
        0.0,
        cfg,
    )?;
    Ok(r.powf(e) * (r - 1.0).powf(e) - e * integral.value)
}

/// Kernel of the OU process driven by `base`:
/// `alpha ∫_s^t e^{alpha (t-u)} K_Z(u, s) du + K_Z(t, s)`.
pub fn ou_kernel(alpha: f64, base: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    ou_kernel_with(alpha, base, t, s, &QuadratureConfig::default())
}

pub fn ou_kernel_with(
    alpha: f64,
    base: &KernelSpec,
    t: f64,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if base.is_ou() {
        return Err(Error::InvalidParameter(
            "OU kernels cannot be nested more than one level".into(),
        ));
    }
    check_order("ou_kernel", s, t)?;
    ou_eval(alpha, base, t, s, t - s, cfg)
}

fn ou_eval(alpha: f64, base: &KernelSpec, t: f64, s: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let direct = base.eval_offset(t, s, d, cfg)?;
    if alpha == 0.0 || d <= 0.0 {
        return Ok(direct);
    }
    let inner = cfg.tightened();
    let r = try_integrate_singular_dist(
        |w, _, rest| Ok((alpha * rest).exp() * base.eval_offset(s + w, s, w, &inner)?),
        0.0,
        d,
        leading(base.diagonal_exponent()),
        0.0,
        cfg,
    )?;
    Ok(alpha * r.value + direct)
}

/// Integrated-by-parts OU kernel `∫_s^t e^{alpha (t-u)} ∂_u K_Z(u, s) du`.
///
/// Valid only when `K_Z(u, u) = 0` with an integrable first-argument
/// derivative: Riemann-Liouville or fBm bases with `H > 1/2`.
pub fn ou_kernel_diff(alpha: f64, base: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    ou_kernel_diff_with(alpha, base, t, s, &QuadratureConfig::default())
}

pub fn ou_kernel_diff_with(
    alpha: f64,
    base: &KernelSpec,
    t: f64,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if let Some(hurst) = base.hurst().filter(|_| !base.is_ou()) {
        if hurst.regime() != HurstRegime::Smooth {
            return Err(Error::UnsupportedRegime {
                op: "ou_kernel_diff",
                msg: format!("requires H > 1/2, got {}", hurst.value()),
            });
        }
    }
    check_order("ou_kernel_diff", s, t)?;
    ou_diff_eval(alpha, base, s, t - s, cfg)
}

fn ou_diff_eval(alpha: f64, base: &KernelSpec, s: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let (hurst, norm, fbm) = match base {
        KernelSpec::RiemannLiouville { hurst, norm } => (*hurst, *norm, false),
        KernelSpec::FbmHigh { hurst, norm } => (*hurst, *norm, true),
        other => {
            return Err(Error::UnsupportedRegime {
                op: "ou_kernel_diff",
                msg: format!("base {other:?} does not vanish on the diagonal"),
            })
        }
    };
    if fbm && s <= 0.0 {
        return Err(Error::domain("ou_kernel_diff", format!("s={s} must be > 0")));
    }
    if d <= 0.0 {
        return Ok(0.0);
    }
    // Same substitution v = (u - s)^{H-1/2}, which absorbs (u-s)^{H-3/2} du.
    let e = hurst.excess();
    let p = 1.0 / e;
    let upper = d.powf(e);
    if fbm {
        let r = try_integrate(
            |v| {
                let w = v.powf(p);
                Ok((alpha * (d - w)).exp() * (s + w).powf(e))
            },
            0.0,
            upper,
            cfg,
        )?;
        Ok(norm / e * s.powf(-e) * r.value)
    } else {
        let r = try_integrate(|v| Ok((alpha * (d - v.powf(p))).exp()), 0.0, upper, cfg)?;
        Ok(norm * r.value)
    }
}

/// `∫_a^b K(T, u)^2 du`.
pub fn l2_segment(kernel: &KernelSpec, a: f64, b: f64, big_t: f64) -> Result<f64> {
    kernel.l2_segment(a, b, big_t)
}

/// `E|Z_t - Z_s|^2`.
pub fn increment_variance(kernel: &KernelSpec, s: f64, t: f64) -> Result<f64> {
    kernel.increment_variance(s, t)
}

/// Delivery-period averaged kernel.
pub fn flow_kernel(kernel: &KernelSpec, t: f64, tj: f64, tk: f64) -> Result<f64> {
    kernel.flow_kernel(t, tj, tk)
}

impl QuadratureConfig {
    /// Tolerances for integrands evaluated inside an outer integral.
    pub fn tightened(&self) -> Self {
        Self {
            abs_tol: (self.abs_tol * 1e-2).max(1e-15),
            rel_tol: (self.rel_tol * 1e-2).max(1e-14),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelSpecRaw {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hurst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<KernelSpecRaw>>,
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;

    fn try_from(raw: KernelSpecRaw) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::InvalidParameter(format!("kernel type '{}' needs '{name}'", raw.kind))
            })
        };
        match raw.kind.as_str() {
            "constant" => KernelSpec::constant(need(raw.c, "c")?),
            "rl" => KernelSpec::rl(need(raw.hurst, "hurst")?),
            "fbm" => KernelSpec::fbm(need(raw.hurst, "hurst")?),
            "std_ou" => KernelSpec::std_ou(need(raw.alpha, "alpha")?),
            "volterra_ou" => {
                let alpha = need(raw.alpha, "alpha")?;
                let base = raw.base.ok_or_else(|| {
                    Error::InvalidParameter("kernel type 'volterra_ou' needs 'base'".into())
                })?;
                KernelSpec::volterra_ou(alpha, KernelSpec::try_from(*base)?)
            }
            other => Err(Error::InvalidParameter(format!("unknown kernel type '{other}'"))),
        }
    }
}

impl From<KernelSpec> for KernelSpecRaw {
    fn from(k: KernelSpec) -> Self {
        let blank = |kind: &str| KernelSpecRaw {
            kind: kind.to_string(),
            hurst: None,
            alpha: None,
            c: None,
            base: None,
        };
        match k {
            KernelSpec::Constant { c } => KernelSpecRaw {
                c: Some(c),
                ..blank("constant")
            },
            KernelSpec::RiemannLiouville { hurst, .. } => KernelSpecRaw {
                hurst: Some(hurst.value()),
                ..blank("rl")
            },
            KernelSpec::FbmHigh { hurst, .. } | KernelSpec::FbmLow { hurst, .. } => KernelSpecRaw {
                hurst: Some(hurst.value()),
                ..blank("fbm")
            },
            KernelSpec::StdOu { alpha } => KernelSpecRaw {
                alpha: Some(alpha),
                ..blank("std_ou")
            },
            KernelSpec::VolterraOu { alpha, base } => KernelSpecRaw {
                alpha: Some(alpha),
                base: Some(Box::new(KernelSpecRaw::from(*base))),
                ..blank("volterra_ou")
            },
        }
    }
}
