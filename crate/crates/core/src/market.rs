//! The n-factor market: spot `S_t = φ(t) + Σ_i ∫_0^t K_i(t,s) dW^i_s`,
//! forwards `F(t, T)`, and the deterministic market price of risk θ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::completeness::left_inverse;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Deterministic seasonality `φ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeasonalityFn {
    Constant {
        level: f64,
    },
    /// `mean + amplitude * sin(2π t / period + phase)`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
    /// Linear interpolation between `(time, value)` knots, clamped outside.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl SeasonalityFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            SeasonalityFn::Constant { level } => {
                if !level.is_finite() {
                    return Err(Error::InvalidParameter("seasonality level must be finite".into()));
                }
            }
            SeasonalityFn::Sinusoidal {
                mean,
                amplitude,
                period,
                phase,
            } => {
                if ![mean, amplitude, phase].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "sinusoidal seasonality parameters must be finite".into(),
                    ));
                }
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(Error::InvalidParameter("seasonality period must be positive".into()));
                }
            }
            SeasonalityFn::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidParameter("seasonality needs at least one knot".into()));
                }
                if !knots.iter().all(|(t, v)| t.is_finite() && v.is_finite()) {
                    return Err(Error::InvalidParameter("seasonality knots must be finite".into()));
                }
                if !knots.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::InvalidParameter(
                        "seasonality knot times must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SeasonalityFn::Constant { level } => *level,
            SeasonalityFn::Sinusoidal {
                mean,
                amplitude,
                period,
                phase,
            } => mean + amplitude * (std::f64::consts::TAU * t / period + phase).sin(),
            SeasonalityFn::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(x, _)| x <= t);
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            }
        }
    }
}

/// Piecewise-constant market price of risk: `values[k]` applies on
/// `[times[k], times[k+1])`, the last value up to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThetaRaw", into = "ThetaRaw")]
pub struct Theta {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ThetaRaw {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<ThetaRaw> for Theta {
    type Error = Error;
    fn try_from(raw: ThetaRaw) -> Result<Self> {
        Theta::piecewise(raw.times, raw.values)
    }
}

impl From<Theta> for ThetaRaw {
    fn from(t: Theta) -> Self {
        ThetaRaw {
            times: t.times,
            values: t.values,
        }
    }
}

impl Theta {
    pub fn constant(value: Vec<f64>) -> Result<Self> {
        Self::piecewise(vec![0.0], vec![value])
    }

    pub fn zero(n: usize) -> Self {
        Self {
            times: vec![0.0],
            values: vec![vec![0.0; n]],
        }
    }

    pub fn piecewise(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter(
                "theta needs one value vector per breakpoint".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter("theta breakpoints must start at 0".into()));
        }
        if !times.iter().all(|t| t.is_finite()) || !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "theta breakpoints must be strictly increasing".into(),
            ));
        }
        let n = values[0].len();
        if n == 0 || values.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidParameter(
                "theta values must be non-empty and of equal length".into(),
            ));
        }
        if !values.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("theta values must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&x| x <= t);
        &self.values[k.saturating_sub(1)]
    }

    /// Constant pieces `(lo, hi, θ)` covering `[a, b]`.
    pub fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64, &[f64])> {
        let mut out = Vec::new();
        if !(a < b) {
            return out;
        }
        for k in 0..self.times.len() {
            let lo = self.times[k].max(a);
            let hi = self.times.get(k + 1).copied().unwrap_or(f64::INFINITY).min(b);
            if lo < hi {
                out.push((lo, hi, self.values[k].as_slice()));
            }
        }
        out
    }

    /// `∫_a^b |θ(s)|^2 ds`.
    pub fn sq_norm_integral(&self, a: f64, b: f64) -> f64 {
        self.segments(a, b)
            .into_iter()
            .map(|(lo, hi, v)| (hi - lo) * v.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// `∫_a^b θ(s) ds` componentwise.
    pub fn integral(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (lo, hi, v) in self.segments(a, b) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += (hi - lo) * x;
            }
        }
        out
    }
}

/// A forward price observed at time `t` for delivery at `maturity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardQuote {
    pub t: f64,
    pub maturity: f64,
    pub price: f64,
}

/// `K̄(t)` with entry `(j, i) = K_i(T_j, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    t: f64,
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn new(t: f64, entries: DMatrix<f64>) -> Self {
        Self { t, entries }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Drift and volatility of `dF(t, T) = μ dt + σ · dW_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVol {
    pub mu: f64,
    pub sigma: Vec<f64>,
}

/// θ recovered from observed drifts together with the fit residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub theta: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketSpecRaw", into = "MarketSpecRaw")]
pub struct MarketSpec {
    factors: Vec<KernelSpec>,
    maturities: Vec<f64>,
    seasonality: SeasonalityFn,
    theta: Theta,
    horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MarketSpecRaw {
    factors: Vec<KernelSpec>,
    maturities: Vec<f64>,
    seasonality: SeasonalityFn,
    theta: Theta,
    horizon: f64,
}

impl TryFrom<MarketSpecRaw> for MarketSpec {
    type Error = Error;
    fn try_from(r: MarketSpecRaw) -> Result<Self> {
        MarketSpec::new(r.factors, r.maturities, r.seasonality, r.theta, r.horizon)
    }
}

impl From<MarketSpec> for MarketSpecRaw {
    fn from(m: MarketSpec) -> Self {
        MarketSpecRaw {
            factors: m.factors,
            maturities: m.maturities,
            seasonality: m.seasonality,
            theta: m.theta,
            horizon: m.horizon,
        }
    }
}

impl MarketSpec {
    pub fn new(
        factors: Vec<KernelSpec>,
        maturities: Vec<f64>,
        seasonality: SeasonalityFn,
        theta: Theta,
        horizon: f64,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("market needs at least one factor".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if maturities.is_empty() {
            return Err(Error::InvalidParameter("market needs at least one maturity".into()));
        }
        if !(maturities[0] > 0.0)
            || !maturities.windows(2).all(|w| w[0] < w[1])
            || maturities[maturities.len() - 1] > horizon
        {
            return Err(Error::InvalidParameter(
                "maturities must satisfy 0 < T_1 < ... < T_m <= horizon".into(),
            ));
        }
        if theta.dim() != factors.len() {
            return Err(Error::InvalidParameter(format!(
                "theta has dimension {} but the market has {} factors",
                theta.dim(),
                factors.len()
            )));
        }
        seasonality.validate()?;
        if !theta.sq_norm_integral(0.0, horizon).is_finite() {
            return Err(Error::InvalidParameter("theta is not square integrable".into()));
        }
        for k in &factors {
            k.check_square_integrable(horizon)?;
        }
        Ok(Self {
            factors,
            maturities,
            seasonality,
            theta,
            horizon,
        })
    }

    pub fn factors(&self) -> &[KernelSpec] {
        &self.factors
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn seasonality(&self) -> &SeasonalityFn {
        &self.seasonality
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Same market with a different θ.
    pub fn with_theta(&self, theta: Theta) -> Result<Self> {
        if theta.dim() != self.factors.len() {
            return Err(Error::InvalidParameter("theta dimension mismatch".into()));
        }
        Ok(Self {
            theta,
            ..self.clone()
        })
    }

    fn check_time(&self, op: &'static str, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::domain(
                op,
                format!("time {t} outside [0, {}]", self.horizon),
            ));
        }
        Ok(())
    }

    /// `φ_Q(T) = φ(T) - ∫_0^T K(T, s) · θ(s) ds`.
    pub fn risk_neutral_seasonality(&self, big_t: f64) -> Result<f64> {
        self.check_time("risk_neutral_seasonality", big_t)?;
        let mut shift = 0.0;
        for (lo, hi, v) in self.theta.segments(0.0, big_t) {
            for (k, &th) in self.factors.iter().zip(v) {
                if th != 0.0 {
                    shift += th * k.integral(big_t, lo, hi)?;
                }
            }
        }
        Ok(self.seasonality.eval(big_t) - shift)
    }

    /// `σ = K(T, t)` and `μ = K(T, t) · θ(t)`.
    pub fn drift_vol(&self, t: f64, big_t: f64) -> Result<DriftVol> {
        self.check_time("drift_vol", big_t)?;
        if !(t >= 0.0 && t <= big_t) {
            return Err(Error::domain("drift_vol", format!("need 0 <= t={t} <= T={big_t}")));
        }
        let sigma = self
            .factors
            .iter()
            .map(|k| k.eval(big_t, t))
            .collect::<Result<Vec<_>>>()?;
        let mu = sigma.iter().zip(self.theta.at(t)).map(|(s, th)| s * th).sum();
        Ok(DriftVol { mu, sigma })
    }

    /// `K̄(t)` for `0 <= t < T_1`.
    pub fn kernel_matrix(&self, t: f64) -> Result<KernelMatrix> {
        let t1 = self.maturities[0];
        if !(t >= 0.0 && t < t1) {
            return Err(Error::domain("kernel_matrix", format!("need 0 <= t={t} < T_1={t1}")));
        }
        self.kernel_matrix_closed(t)
    }

    /// `K̄(t)` allowing `t = T_1`, where some kernels may still be finite.
    pub(crate) fn kernel_matrix_closed(&self, t: f64) -> Result<KernelMatrix> {
        let (m, n) = (self.maturities.len(), self.factors.len());
        let mut entries = DMatrix::zeros(m, n);
        for (j, &tj) in self.maturities.iter().enumerate() {
            for (i, k) in self.factors.iter().enumerate() {
                entries[(j, i)] = k.eval(tj, t)?;
            }
        }
        Ok(KernelMatrix { t, entries })
    }

    /// Drifts `μ(t, T_j)` of all traded forwards.
    pub fn drift_vector(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.kernel_matrix(t)?;
        let th = DVector::from_column_slice(self.theta.at(t));
        Ok((k.entries() * th).iter().copied().collect())
    }

    /// `F(0, T) = φ_Q(T)`.
    pub fn forward_initial(&self, big_t: f64) -> Result<ForwardQuote> {
        Ok(ForwardQuote {
            t: 0.0,
            maturity: big_t,
            price: self.risk_neutral_seasonality(big_t)?,
        })
    }

    /// Per-factor delivery-averaged kernels `K̄_i(t, Tj, Tk)`.
    pub fn flow_forward_vol(&self, t: f64, tj: f64, tk: f64) -> Result<Vec<f64>> {
        self.check_time("flow_forward_vol", tk)?;
        self.factors.iter().map(|k| k.flow_kernel(t, tj, tk)).collect()
    }
}

/// Relative residual threshold `1e-8 (1 + |μ̄|)`.
pub fn arbitrage_tolerance(mu_bar: &[f64]) -> f64 {
    1e-8 * (1.0 + mu_bar.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// `θ = K̄⁻¹_left μ̄` with the consistency check `|K̄θ - μ̄|` small.
pub fn solve_theta(mu_bar: &[f64], kmat: &KernelMatrix) -> Result<ThetaFit> {
    let k = kmat.entries();
    if mu_bar.len() != k.nrows() {
        return Err(Error::InvalidParameter(format!(
            "drift vector has length {} but the kernel matrix has {} rows",
            mu_bar.len(),
            k.nrows()
        )));
    }
    let inv = left_inverse(kmat)?;
    let mu = DVector::from_column_slice(mu_bar);
    let theta = &inv * &mu;
    let residual = (k * &theta - &mu).norm();
    let tolerance = arbitrage_tolerance(mu_bar);
    if !(residual <= tolerance) {
        return Err(Error::ArbitrageInconsistent {
            residual,
            tolerance,
        });
    }
    Ok(ThetaFit {
        theta: theta.iter().copied().collect(),
        residual,
    })
}
