//! Bachelier pricing of options on forwards, reliability options, and the
//! tracking error of the instantaneous-forward proxy for flow forwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::quadrature::{try_integrate, try_integrate_singular, QuadratureConfig};
use crate::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// European option expiring at `expiry` on the forward maturing at
/// `underlying`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaOption {
    pub kind: OptionKind,
    pub strike: f64,
    pub expiry: f64,
    pub underlying: f64,
}

impl VanillaOption {
    pub fn new(kind: OptionKind, strike: f64, expiry: f64, underlying: f64) -> Result<Self> {
        if !strike.is_finite() {
            return Err(Error::InvalidParameter("strike must be finite".into()));
        }
        if !(expiry >= 0.0 && expiry < underlying) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= expiry={expiry} < underlying maturity={underlying}"
            )));
        }
        Ok(Self {
            kind,
            strike,
            expiry,
            underlying,
        })
    }
}

/// `σ(t, T, Tj) = sqrt(Σ_i ∫_t^T K_i(Tj, u)^2 du)`.
pub fn bachelier_vol(market: &MarketSpec, t: f64, big_t: f64, tj: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= big_t && big_t <= tj) {
        return Err(Error::domain(
            "bachelier_vol",
            format!("need 0 <= t={t} <= T={big_t} <= Tj={tj}"),
        ));
    }
    if tj > market.horizon() {
        return Err(Error::domain("bachelier_vol", "maturity beyond the market horizon"));
    }
    let mut var = 0.0;
    for k in market.factors() {
        var += k.l2_segment(t, big_t, tj)?;
    }
    Ok(var.max(0.0).sqrt())
}

/// Bachelier call `σ (d N(d) + n(d))`, `d = (F - K)/σ`; intrinsic value at
/// `σ = 0`.
pub fn bachelier_call(forward: f64, strike: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let d = (forward - strike) / sigma;
    sigma * (d * norm_cdf(d) + norm_pdf(d))
}

/// Equivalent form `(F - K) N(d) + σ n(d)`.
pub fn bachelier_call_alt(forward: f64, strike: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let d = (forward - strike) / sigma;
    (forward - strike) * norm_cdf(d) + sigma * norm_pdf(d)
}

/// Put by parity `P = C - (F - K)`.
pub fn bachelier_put(forward: f64, strike: f64, sigma: f64) -> f64 {
    bachelier_call(forward, strike, sigma) - (forward - strike)
}

/// Direct put `σ (-d N(-d) + n(d))`.
pub fn bachelier_put_direct(forward: f64, strike: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (strike - forward).max(0.0);
    }
    let d = (forward - strike) / sigma;
    sigma * (-d * norm_cdf(-d) + norm_pdf(d))
}

/// Units of the forward held by the call hedge, `N(d)`.
pub fn bachelier_call_delta(forward: f64, strike: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if forward > strike {
            1.0
        } else if forward < strike {
            0.0
        } else {
            0.5
        };
    }
    norm_cdf((forward - strike) / sigma)
}

/// Everything the pricing front end reports for one option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub price: f64,
    pub hedge_delta: f64,
    pub sigma: f64,
    pub d: f64,
    pub discount_factor: f64,
}

fn option_vol(market: &MarketSpec, option: &VanillaOption, t: f64) -> Result<f64> {
    bachelier_vol(market, t, option.expiry, option.underlying)
}

pub fn call_price(market: &MarketSpec, option: &VanillaOption, t: f64, forward: f64) -> Result<f64> {
    let sigma = option_vol(market, option, t)?;
    Ok(bachelier_call(forward, option.strike, sigma))
}

pub fn put_price(market: &MarketSpec, option: &VanillaOption, t: f64, forward: f64) -> Result<f64> {
    let sigma = option_vol(market, option, t)?;
    Ok(bachelier_put(forward, option.strike, sigma))
}

/// `N(d)` for calls, `N(d) - 1` for puts.
pub fn hedge_delta(market: &MarketSpec, option: &VanillaOption, t: f64, forward: f64) -> Result<f64> {
    let sigma = option_vol(market, option, t)?;
    let call = bachelier_call_delta(forward, option.strike, sigma);
    Ok(match option.kind {
        OptionKind::Call => call,
        OptionKind::Put => call - 1.0,
    })
}

/// Price, hedge and diagnostics, discounted with `curve`.
pub fn price_option(
    market: &MarketSpec,
    option: &VanillaOption,
    t: f64,
    forward: f64,
    curve: &DiscountCurve,
) -> Result<PriceReport> {
    let sigma = option_vol(market, option, t)?;
    let undiscounted = match option.kind {
        OptionKind::Call => bachelier_call(forward, option.strike, sigma),
        OptionKind::Put => bachelier_put(forward, option.strike, sigma),
    };
    let discount_factor = curve.factor(t, option.expiry)?;
    let call_delta = bachelier_call_delta(forward, option.strike, sigma);
    let d = if sigma > 0.0 {
        (forward - option.strike) / sigma
    } else {
        f64::NAN
    };
    Ok(PriceReport {
        price: discount_factor * undiscounted,
        hedge_delta: match option.kind {
            OptionKind::Call => call_delta,
            OptionKind::Put => call_delta - 1.0,
        },
        sigma,
        d,
        discount_factor,
    })
}

/// Piecewise-constant deterministic short rate: `rates[k]` on
/// `[times[k], times[k+1])`, the last rate thereafter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountCurve {
    times: Vec<f64>,
    rates: Vec<f64>,
}

impl DiscountCurve {
    pub fn zero() -> Self {
        Self {
            times: vec![0.0],
            rates: vec![0.0],
        }
    }

    pub fn flat(r: f64) -> Result<Self> {
        Self::piecewise(vec![0.0], vec![r])
    }

    pub fn piecewise(times: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != rates.len() || times[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "discount curve needs one rate per breakpoint, starting at 0".into(),
            ));
        }
        if !times.windows(2).all(|w| w[0] < w[1])
            || !times.iter().chain(&rates).all(|v| v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "discount curve breakpoints must increase and rates be finite".into(),
            ));
        }
        Ok(Self { times, rates })
    }

    /// `∫_t^T r(u) du`.
    pub fn integral(&self, t: f64, big_t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= big_t) {
            return Err(Error::domain("discount", format!("need 0 <= t={t} <= T={big_t}")));
        }
        let mut acc = 0.0;
        for k in 0..self.times.len() {
            let lo = self.times[k].max(t);
            let hi = self.times.get(k + 1).copied().unwrap_or(f64::INFINITY).min(big_t);
            if lo < hi {
                acc += self.rates[k] * (hi - lo);
            }
        }
        Ok(acc)
    }

    /// `exp(-∫_t^T r(u) du)`.
    pub fn factor(&self, t: f64, big_t: f64) -> Result<f64> {
        Ok((-self.integral(t, big_t)?).exp())
    }
}

pub fn discounted(value: f64, curve: &DiscountCurve, t: f64, big_t: f64) -> Result<f64> {
    Ok(value * curve.factor(t, big_t)?)
}

/// Payoff `∫_{T1}^{T2} (S_T - K)^+ dT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityOptionSpec {
    pub strike: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityOptionPrice {
    pub price: f64,
    pub window: (f64, f64),
    pub quadrature_panels: usize,
}

/// `∫_{T1}^{T2} σ(0,T,T) (d_T N(d_T) + n(d_T)) dT`, `d_T = (φ_Q(T) - K)/σ(0,T,T)`.
pub fn reliability_option_price(
    market: &MarketSpec,
    spec: &ReliabilityOptionSpec,
) -> Result<ReliabilityOptionPrice> {
    let (t1, t2) = spec.window;
    if !(t1 >= 0.0 && t1 < t2 && t2 <= market.horizon()) {
        return Err(Error::domain(
            "reliability_option_price",
            format!("window [{t1}, {t2}] must satisfy 0 <= T1 < T2 <= horizon"),
        ));
    }
    if !spec.strike.is_finite() {
        return Err(Error::InvalidParameter("strike must be finite".into()));
    }
    let cfg = QuadratureConfig {
        abs_tol: 1e-10,
        rel_tol: 1e-8,
        ..QuadratureConfig::default()
    };
    let r = try_integrate(
        |big_t| {
            let sigma = if big_t > 0.0 {
                bachelier_vol(market, 0.0, big_t, big_t)?
            } else {
                0.0
            };
            Ok(bachelier_call(
                market.risk_neutral_seasonality(big_t)?,
                spec.strike,
                sigma,
            ))
        },
        t1,
        t2,
        &cfg,
    )?;
    Ok(ReliabilityOptionPrice {
        price: r.value,
        window: spec.window,
        quadrature_panels: r.panels,
    })
}

/// `∫_0^t Σ_i |K_i(T̃, s) - K̄_i(s, Tj, Tk)|^2 ds`, the variance of the gap
/// between the forward at `T̃` and the flow forward on `[Tj, Tk]`.
pub fn tracking_error(
    market: &MarketSpec,
    t: f64,
    t_tilde: f64,
    tj: f64,
    tk: f64,
) -> Result<f64> {
    if !(t >= 0.0 && t <= tj && tj <= t_tilde && t_tilde <= tk && tj < tk) {
        return Err(Error::domain(
            "tracking_error",
            format!("need 0 <= t={t} <= Tj={tj} <= T~={t_tilde} <= Tk={tk}, Tj < Tk"),
        ));
    }
    if tk > market.horizon() {
        return Err(Error::domain("tracking_error", "delivery end beyond the horizon"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let cfg = QuadratureConfig::default();
    let inner = cfg.tightened();
    let mut total = 0.0;
    for k in market.factors() {
        let o = k.origin_exponent();
        let le = if o < 0.0 { 2.0 * o } else { 0.0 };
        let d = k.diagonal_exponent();
        let re = if t == t_tilde && d < 0.0 { 2.0 * d } else { 0.0 };
        let r = try_integrate_singular(
            |s| {
                let gap = k.eval_with(t_tilde, s, &inner)? - k.flow_kernel_with(s, tj, tk, &inner)?;
                Ok(gap * gap)
            },
            0.0,
            t,
            le,
            re,
            &cfg,
        )?;
        total += r.value;
    }
    Ok(total)
}
