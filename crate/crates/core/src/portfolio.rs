//! Optimal investment for CRRA utility `u(x) = x^γ / γ` (log for `γ = 0`)
//! in the complete market, by the martingale method.

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completeness::left_inverse;
use crate::error::{Error, Result};
use crate::market::{KernelMatrix, MarketSpec, Theta};
use crate::simulation::{
    forward_paths, girsanov_density, mc_estimate, MCEstimate, Measure, PathEnsemble,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CRRAPolicy {
    gamma: f64,
    x0: f64,
    horizon: f64,
    theta: Theta,
    beta: f64,
    c: f64,
    h0: f64,
    lambda_star: f64,
}

impl CRRAPolicy {
    pub fn new(gamma: f64, x0: f64, horizon: f64, theta: Theta) -> Result<Self> {
        if !(gamma < 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma={gamma} must be < 1")));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::InvalidParameter(format!("x0={x0} must be positive")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter("trading horizon must be positive".into()));
        }
        let beta = gamma / (1.0 - gamma);
        let c = -1.0 / (1.0 - gamma);
        let h0 = (0.5 * beta / (1.0 - gamma) * theta.sq_norm_integral(0.0, horizon)).exp();
        let lambda_star = (x0 / h0).powf(gamma - 1.0);
        Ok(Self {
            gamma,
            x0,
            horizon,
            theta,
            beta,
            c,
            h0,
            lambda_star,
        })
    }

    /// Policy trading the forwards of `market` up to `horizon <= T_1`.
    pub fn for_market(market: &MarketSpec, gamma: f64, x0: f64, horizon: f64) -> Result<Self> {
        let t1 = market.maturities()[0];
        if horizon > t1 {
            return Err(Error::InvalidParameter(format!(
                "trading horizon {horizon} beyond the first maturity {t1}"
            )));
        }
        Self::new(gamma, x0, horizon, market.theta().clone())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    pub fn is_log(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn utility(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.is_log() {
            x.ln()
        } else {
            x.powf(self.gamma) / self.gamma
        }
    }

    fn check_density(z: f64) -> Result<()> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::domain("crra", format!("density {z} must be positive")));
        }
        Ok(())
    }

    /// `X*_T = (x0 / H0) Z_T^{1/(γ-1)}`.
    pub fn terminal_wealth(&self, z_t: f64) -> Result<f64> {
        Self::check_density(z_t)?;
        Ok(self.x0 / self.h0 * z_t.powf(1.0 / (self.gamma - 1.0)))
    }

    /// `H_t = exp(½ β/(1-γ) ∫_t^T |θ|²)`.
    pub fn h_factor(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::domain(
                "h_factor",
                format!("t={t} outside [0, {}]", self.horizon),
            ));
        }
        Ok((0.5 * self.beta / (1.0 - self.gamma) * self.theta.sq_norm_integral(t, self.horizon)).exp())
    }

    /// `X*_t = x0 (H_t / H0) Z_t^{-1/(1-γ)}`.
    pub fn optimal_wealth(&self, t: f64, z_t: f64) -> Result<f64> {
        Self::check_density(z_t)?;
        Ok(self.x0 * self.h_factor(t)? / self.h0 * z_t.powf(-1.0 / (1.0 - self.gamma)))
    }

    /// `(x^γ/γ) H0^{1-γ}`, or `log x0 + ½ ∫_0^T |θ|²` for log utility.
    pub fn expected_utility(&self) -> f64 {
        if self.is_log() {
            self.x0.ln() + 0.5 * self.theta.sq_norm_integral(0.0, self.horizon)
        } else {
            self.x0.powf(self.gamma) / self.gamma * self.h0.powf(1.0 - self.gamma)
        }
    }

    /// Monte Carlo `E_P[u(X*_T)]` with `W` taken from the ensemble.
    pub fn expected_utility_mc(&self, ensemble: &PathEnsemble) -> Result<MCEstimate> {
        let z = self.terminal_density(ensemble)?;
        let u: Vec<f64> = z
            .iter()
            .map(|&z| self.terminal_wealth(z).map(|x| self.utility(x)))
            .collect::<Result<_>>()?;
        mc_estimate(&u)
    }

    /// `Z_T` per path; the ensemble grid must end at the trading horizon.
    pub fn terminal_density(&self, ensemble: &PathEnsemble) -> Result<Vec<f64>> {
        self.check_grid(ensemble)?;
        Ok(girsanov_density(&self.theta, ensemble)?.terminal())
    }

    fn check_grid(&self, ensemble: &PathEnsemble) -> Result<()> {
        let last = ensemble.grid().last();
        if (last - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "ensemble grid ends at {last}, trading horizon is {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// `Δ*_t = X*_t/(1-γ) θ_tᵀ K̄⁻¹_left(t)`, the holdings in the `m` forwards.
pub fn optimal_delta(
    policy: &CRRAPolicy,
    xstar_t: f64,
    kmat: &KernelMatrix,
    theta_t: &[f64],
) -> Result<Vec<f64>> {
    let inv = left_inverse(kmat)?;
    delta_from_inverse(policy, xstar_t, kmat.entries(), &inv, theta_t)
}

fn delta_from_inverse(
    policy: &CRRAPolicy,
    xstar_t: f64,
    k: &DMatrix<f64>,
    inv: &DMatrix<f64>,
    theta_t: &[f64],
) -> Result<Vec<f64>> {
    if theta_t.len() != k.ncols() {
        return Err(Error::InvalidParameter("theta dimension mismatch".into()));
    }
    let target = RowDVector::from_row_slice(theta_t) * (-policy.c() * xstar_t);
    let delta = &target * inv;
    let residual = (&delta * k - &target).amax();
    if !(residual <= 1e-10 * (1.0 + target.amax())) {
        return Err(Error::Numerical(format!(
            "hedge equation residual {residual} exceeds tolerance"
        )));
    }
    Ok(delta.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    /// `max_paths |X_T - X*_T| / X*_T`.
    pub max_rel_mismatch: f64,
    /// Grid times where `K̄` was degenerate and the previous inverse was reused.
    pub skipped_times: Vec<f64>,
}

/// Integrate `dX = Σ_j Δ*_j dF(·, T_j)` on the ensemble grid with holdings
/// rebalanced at each grid time, and compare with `X*_T` pathwise.
pub fn replicate(
    policy: &CRRAPolicy,
    market: &MarketSpec,
    ensemble: &PathEnsemble,
) -> Result<ReplicationReport> {
    policy.check_grid(ensemble)?;
    if policy.horizon() > market.maturities()[0] {
        return Err(Error::InvalidParameter("trading horizon beyond T_1".into()));
    }
    let grid = ensemble.grid();
    let p = grid.points();
    let steps = grid.steps();
    let mut inverses: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::with_capacity(steps);
    let mut skipped_times = Vec::new();
    let mut last_skipped = false;
    for (k, &t) in p[..steps].iter().enumerate() {
        let kmat = market.kernel_matrix(t).map_err(|e| e.at_index(k))?;
        match left_inverse(&kmat) {
            Ok(inv) => {
                inverses.push((kmat.entries().clone(), inv));
                last_skipped = false;
            }
            Err(Error::Incomplete { .. }) if !last_skipped && k > 0 => {
                let prev = inverses[k - 1].clone();
                inverses.push(prev);
                skipped_times.push(t);
                last_skipped = true;
            }
            Err(e) => return Err(e.at_index(k)),
        }
    }
    let forwards: Vec<Vec<Vec<f64>>> = market
        .maturities()
        .iter()
        .map(|&tj| forward_paths(market, tj, ensemble, Measure::P).map(|f| f.values))
        .collect::<Result<_>>()?;
    let density = girsanov_density(policy.theta(), ensemble)?;
    let h: Vec<f64> = p.iter().map(|&t| policy.h_factor(t)).collect::<Result<_>>()?;
    let mismatches: Vec<f64> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| {
            let z = &density.values[path];
            let mut x = policy.x0();
            for k in 0..steps {
                let xstar = policy.x0() * h[k] / policy.h0() * z[k].powf(-1.0 / (1.0 - policy.gamma()));
                let (kk, inv) = &inverses[k];
                let delta = delta_from_inverse(policy, xstar, kk, inv, policy.theta().at(p[k]))?;
                for (j, d) in delta.iter().enumerate() {
                    x += d * (forwards[j][path][k + 1] - forwards[j][path][k]);
                }
            }
            let target = policy.terminal_wealth(z[steps])?;
            Ok((x - target).abs() / target)
        })
        .collect::<Result<_>>()?;
    Ok(ReplicationReport {
        max_rel_mismatch: mismatches.into_iter().fold(0.0, f64::max),
        skipped_times,
    })
}

/// Simple admissible strategies for comparison with the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Strategy {
    /// Fixed units of each traded forward, bought at `t = 0`.
    BuyAndHold { units: Vec<f64> },
    /// Holdings rebalanced so that `dX / X = πᵀ (θ dt + dW)`.
    ConstantMix { exposure: Vec<f64> },
}

/// Terminal wealth of `strategy` per path, with `W` under P from the ensemble.
pub fn strategy_terminal_wealth(
    strategy: &Strategy,
    policy: &CRRAPolicy,
    market: &MarketSpec,
    ensemble: &PathEnsemble,
) -> Result<Vec<f64>> {
    policy.check_grid(ensemble)?;
    match strategy {
        Strategy::BuyAndHold { units } => {
            if units.len() != market.maturities().len() {
                return Err(Error::InvalidParameter("one unit per traded forward".into()));
            }
            let mut wealth = vec![policy.x0(); ensemble.n_paths()];
            for (&tj, &u) in market.maturities().iter().zip(units) {
                if u == 0.0 {
                    continue;
                }
                let f = forward_paths(market, tj, ensemble, Measure::P)?;
                let last = ensemble.grid().steps();
                for (w, path) in wealth.iter_mut().zip(&f.values) {
                    *w += u * (path[last] - path[0]);
                }
            }
            Ok(wealth)
        }
        Strategy::ConstantMix { exposure } => {
            if exposure.len() != market.n_factors() {
                return Err(Error::InvalidParameter("one exposure per factor".into()));
            }
            let grid = ensemble.grid();
            let p = grid.points();
            let pi = DVector::from_column_slice(exposure);
            let drift: f64 = (0..grid.steps())
                .map(|k| {
                    let th = DVector::from_column_slice(policy.theta().at(p[k]));
                    grid.dt(k) * (pi.dot(&th) - 0.5 * pi.norm_squared())
                })
                .sum();
            Ok((0..ensemble.n_paths())
                .into_par_iter()
                .map(|path| {
                    let inc = ensemble.increments(path);
                    let noise: f64 = (0..grid.steps())
                        .map(|k| exposure.iter().zip(inc.step(k)).map(|(a, b)| a * b).sum::<f64>())
                        .sum();
                    policy.x0() * (drift + noise).exp()
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn policy(gamma: f64, theta: f64) -> CRRAPolicy {
        CRRAPolicy::new(gamma, 100.0, 1.0, Theta::constant(vec![theta]).unwrap()).unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = policy(0.5, 0.2);
        assert_eq!(p.beta(), 1.0);
        assert_eq!(p.c(), -2.0);
        assert!((p.h0() - 0.04f64.exp()).abs() < 1e-15);
        assert!((p.h_factor(0.0).unwrap() - 1.0408).abs() < 1e-4);
        assert_eq!(p.h_factor(1.0).unwrap(), 1.0);
        assert!((p.lambda_star() - (100.0 / p.h0()).powf(-0.5)).abs() < 1e-15);
        assert!(CRRAPolicy::new(1.0, 1.0, 1.0, Theta::zero(1)).is_err());
        assert!(CRRAPolicy::new(0.5, 0.0, 1.0, Theta::zero(1)).is_err());
    }

    #[test]
    fn terminal_wealth_examples() {
        assert_eq!(policy(0.5, 0.0).terminal_wealth(1.0).unwrap(), 100.0);
        let log = policy(0.0, 0.3);
        assert_eq!(log.h0(), 1.0);
        assert!((log.terminal_wealth(2.0).unwrap() - 50.0).abs() < 1e-12);
        assert!(log.terminal_wealth(0.0).is_err());
    }

    #[test]
    fn optimal_wealth_examples() {
        let p = policy(0.5, 0.2);
        assert!((p.optimal_wealth(0.0, 1.0).unwrap() - 100.0).abs() < 1e-12);
        let flat = policy(-1.0, 0.0);
        assert_eq!(flat.optimal_wealth(0.4, 1.0).unwrap(), 100.0);
        assert!((p.optimal_wealth(1.0, 0.7).unwrap() - p.terminal_wealth(0.7).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn optimal_delta_examples() {
        let p = policy(0.5, 0.2);
        let d = optimal_delta(&p, 100.0, &KernelMatrix::new(0.0, dmatrix![1.0]), &[0.2]).unwrap();
        assert!((d[0] - 40.0).abs() < 1e-12);
        let d = optimal_delta(&p, 100.0, &KernelMatrix::new(0.0, dmatrix![1.0]), &[0.0]).unwrap();
        assert_eq!(d, vec![0.0]);
        let log = CRRAPolicy::new(0.0, 50.0, 1.0, Theta::zero(2)).unwrap();
        let d = optimal_delta(
            &log,
            50.0,
            &KernelMatrix::new(0.0, dmatrix![1.0, 0.0; 1.0, 1.0]),
            &[0.1, 0.3],
        )
        .unwrap();
        assert!((d[0] + 10.0).abs() < 1e-12 && (d[1] - 15.0).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn expected_utility_examples() {
        let p = CRRAPolicy::new(0.5, 1.0, 1.0, Theta::constant(vec![0.2]).unwrap()).unwrap();
        assert!((p.expected_utility() - 2.0 * 0.02f64.exp()).abs() < 1e-14);
        let flat = CRRAPolicy::new(0.5, 4.0, 1.0, Theta::zero(1)).unwrap();
        assert!((flat.expected_utility() - 4.0).abs() < 1e-14);
        let log = CRRAPolicy::new(0.0, 1.0, 2.0, Theta::constant(vec![0.3]).unwrap()).unwrap();
        assert!((log.expected_utility() - 0.09).abs() < 1e-14);
    }
}
