//! Left invertibility of the kernel matrix over a trading window.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::kernels::{ou_kernel_diff, KernelSpec};
use crate::market::{KernelMatrix, MarketSpec};

/// Condition number above which the normal equations are abandoned.
const NORMAL_EQUATIONS_MAX_COND: f64 = 1e8;
/// Relative singular-value floor for the rank test.
const RANK_TOL: f64 = 1e-12;
/// `|det| < DEGENERACY_TOL * Π column norms` flags a candidate zero.
const DEGENERACY_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 1024;
pub const DEFAULT_GRID_START: f64 = 1e-6;

/// Left inverse `(K̄ᵀK̄)⁻¹K̄ᵀ` of a full-column-rank kernel matrix.
pub fn left_inverse(kmat: &KernelMatrix) -> Result<DMatrix<f64>> {
    left_inverse_at(kmat.entries(), kmat.t())
}

/// Left inverse of an arbitrary `m x n` matrix; `t` only labels errors.
pub fn left_inverse_at(k: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let (m, n) = k.shape();
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("empty kernel matrix".into()));
    }
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite kernel matrix at t={t}")));
    }
    if m < n {
        return Err(Error::Incomplete {
            t,
            min_singular_value: 0.0,
        });
    }
    let sv = k.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::Incomplete {
            t,
            min_singular_value: smin,
        });
    }
    let cond = smax / smin;
    let identity = DMatrix::<f64>::identity(n, n);
    if cond <= NORMAL_EQUATIONS_MAX_COND {
        let candidate = if m == n {
            k.clone().lu().try_inverse()
        } else {
            let ktk = k.transpose() * k;
            ktk.cholesky().map(|c| c.inverse() * k.transpose())
        };
        if let Some(inv) = candidate {
            let err = (&inv * k - &identity).amax();
            if err <= 1e-11 {
                return Ok(inv);
            }
        }
    }
    // Householder QR: K = QR, left inverse R⁻¹Qᵀ.
    let qr = k.clone().qr();
    let r_inv = qr
        .r()
        .try_inverse()
        .ok_or(Error::Incomplete {
            t,
            min_singular_value: smin,
        })?;
    Ok(r_inv * qr.q().transpose())
}

/// Entries `x_j^{alpha_i}` of an unsigned exponential Vandermonde matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VandermondeCase {
    pub exponents: Vec<f64>,
    pub points: Vec<f64>,
}

impl VandermondeCase {
    pub fn validate(&self) -> Result<()> {
        let n = self.exponents.len();
        if n == 0 || self.points.len() != n {
            return Err(Error::domain(
                "vandermonde_det",
                "exponents and points must be non-empty and of equal length",
            ));
        }
        if !strictly_increasing(&self.exponents) || !strictly_increasing(&self.points) {
            return Err(Error::domain("vandermonde_det", "inputs must be strictly increasing"));
        }
        if !(self.points[0] > 0.0) {
            return Err(Error::domain("vandermonde_det", "points must be positive"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.exponents.len();
        DMatrix::from_fn(n, n, |i, j| self.points[j].powf(self.exponents[i]))
    }
}

/// Determinant by partially pivoted elimination carried out in double-double
/// arithmetic. Closely spaced exponents or points make the matrix nearly
/// singular, and plain f64 elimination then loses most of its digits.
pub fn vandermonde_det(case: &VandermondeCase) -> Result<f64> {
    case.validate()?;
    let m = case.matrix();
    let n = m.nrows();
    let mut a: Vec<Vec<TwoFloat>> = (0..n)
        .map(|i| (0..n).map(|j| TwoFloat::from(m[(i, j)])).collect())
        .collect();
    let mut det = TwoFloat::from(1.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(k);
        if a[p][k] == TwoFloat::from(0.0) {
            return Ok(0.0);
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k + 1..n {
                let sub = f * a[k][j];
                a[i][j] -= sub;
            }
        }
    }
    Ok(f64::from(det))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Complete,
    CompleteExceptNullSet,
    Incomplete,
}

impl Verdict {
    /// Whether the left inverse exists for almost every grid time.
    pub fn is_complete(&self) -> bool {
        !matches!(self, Verdict::Incomplete)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub grid: Vec<f64>,
    pub min_singular_value: Vec<f64>,
    /// Present only for square kernel matrices.
    pub determinant: Option<Vec<f64>>,
    pub zero_crossings: usize,
    pub degenerate_times: Vec<f64>,
    pub verdict: Verdict,
}

impl CompletenessReport {
    /// Determinant when square, smallest singular value otherwise.
    pub fn statistic(&self) -> &[f64] {
        self.determinant.as_deref().unwrap_or(&self.min_singular_value)
    }
}

/// `count` uniform points on `[start, end]`.
pub fn uniform_grid(start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(start < end) {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 points and start < end (got {count}, {start}, {end})"
        )));
    }
    let h = (end - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k + 1 == count { end } else { start + h * k as f64 })
        .collect())
}

/// Default scan grid on `[1e-6, T]`.
pub fn default_grid(horizon: f64) -> Result<Vec<f64>> {
    uniform_grid(DEFAULT_GRID_START, horizon, DEFAULT_GRID_POINTS)
}

struct PointStat {
    det: Option<f64>,
    min_sv: f64,
    flagged: bool,
}

fn point_stat(k: &DMatrix<f64>) -> PointStat {
    let (m, n) = k.shape();
    let sv = k.singular_values();
    let min_sv = if m < n { 0.0 } else { sv.min() };
    let smax = sv.max();
    if m == n {
        let det = k.clone().lu().determinant();
        let scale: f64 = k.column_iter().map(|c| c.norm()).product();
        PointStat {
            det: Some(det),
            min_sv,
            flagged: !(det.abs() >= DEGENERACY_TOL * scale) || scale == 0.0,
        }
    } else {
        PointStat {
            det: None,
            min_sv,
            flagged: m < n || !(min_sv >= DEGENERACY_TOL * smax) || smax == 0.0,
        }
    }
}

/// Evaluate invertibility of `K̄(t)` on `grid`.
pub fn scan(market: &MarketSpec, grid: &[f64]) -> Result<CompletenessReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    if !strictly_increasing(grid) {
        return Err(Error::InvalidParameter("scan grid must be strictly increasing".into()));
    }
    let t1 = market.maturities()[0];
    if grid[0] < 0.0 || *grid.last().unwrap() > t1 {
        return Err(Error::domain("scan", format!("grid must lie in [0, T_1={t1}]")));
    }
    let stats: Vec<PointStat> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &t)| {
            market
                .kernel_matrix_closed(t)
                .map(|k| point_stat(k.entries()))
                .map_err(|e| e.at_index(idx))
        })
        .collect::<Result<_>>()?;

    let (m, n) = (market.maturities().len(), market.factors().len());
    let min_singular_value: Vec<f64> = stats.iter().map(|s| s.min_sv).collect();
    let determinant: Option<Vec<f64>> = if m == n {
        Some(stats.iter().map(|s| s.det.unwrap_or(0.0)).collect())
    } else {
        None
    };

    let mut degenerate_times = Vec::new();
    let mut zero_crossings = 0;
    if let Some(dets) = &determinant {
        let mut last: Option<(usize, f64)> = None;
        for (k, &d) in dets.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            if let Some((j, prev)) = last {
                if prev.signum() != d.signum() {
                    zero_crossings += 1;
                    let root = bisect_det(market, grid[j], grid[k], prev)?;
                    degenerate_times.push(root);
                }
            }
            last = Some((k, d));
        }
    }
    let mut run = 0usize;
    let mut longest_run = 0usize;
    for (k, s) in stats.iter().enumerate() {
        if s.flagged {
            run += 1;
            longest_run = longest_run.max(run);
            let t = grid[k];
            let near_root = degenerate_times
                .iter()
                .any(|&r| (r - t).abs() <= grid_spacing(grid, k));
            if !near_root {
                degenerate_times.push(t);
            }
        } else {
            run = 0;
        }
    }
    degenerate_times.sort_by(f64::total_cmp);

    let verdict = if m < n || longest_run >= 2 {
        Verdict::Incomplete
    } else if degenerate_times.is_empty() {
        Verdict::Complete
    } else {
        Verdict::CompleteExceptNullSet
    };
    Ok(CompletenessReport {
        grid: grid.to_vec(),
        min_singular_value,
        determinant,
        zero_crossings,
        degenerate_times,
        verdict,
    })
}

fn grid_spacing(grid: &[f64], k: usize) -> f64 {
    let left = if k > 0 { grid[k] - grid[k - 1] } else { 0.0 };
    let right = if k + 1 < grid.len() { grid[k + 1] - grid[k] } else { 0.0 };
    left.max(right)
}

fn bisect_det(market: &MarketSpec, mut lo: f64, mut hi: f64, det_lo: f64) -> Result<f64> {
    let sign_lo = det_lo.signum();
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let d = market.kernel_matrix_closed(mid)?.entries().clone().lu().determinant();
        if d == 0.0 {
            return Ok(mid);
        }
        if d.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-factor model families with a known nonvanishing determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TwoFactorFamily {
    /// OU processes with common speed driven by RL processes, `1/2 < h1 < h2`.
    RlOu { alpha: f64, h1: f64, h2: f64 },
    /// OU processes with common speed driven by fBm, `1/2 < h1 < h2`.
    Fou { alpha: f64, h1: f64, h2: f64 },
    /// Standard OU with speed `alpha1` and fOU with speed `alpha2 >= alpha1`.
    Mixed { alpha1: f64, alpha2: f64, h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCheck {
    pub pass: bool,
    /// Smallest `|det|` over the sampled triples.
    pub worst_margin: f64,
    pub samples: usize,
}

impl TwoFactorFamily {
    fn check_hypotheses(&self) -> Result<()> {
        let smooth = |h: f64| h > 0.5 && h < 1.0;
        match *self {
            TwoFactorFamily::RlOu { alpha, h1, h2 } | TwoFactorFamily::Fou { alpha, h1, h2 } => {
                if !alpha.is_finite() || !(smooth(h1) && smooth(h2) && h1 < h2) {
                    return Err(Error::Precondition(format!(
                        "requires finite alpha and 1/2 < H1 < H2 < 1, got H1={h1}, H2={h2}"
                    )));
                }
            }
            TwoFactorFamily::Mixed { alpha1, alpha2, h } => {
                if !(alpha1.is_finite() && alpha2.is_finite() && alpha1 <= alpha2 && smooth(h)) {
                    return Err(Error::Precondition(format!(
                        "requires alpha1 <= alpha2 and 1/2 < H < 1, got alpha1={alpha1}, alpha2={alpha2}, H={h}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn kernel_pair(&self, t: f64, s: f64) -> Result<(f64, f64)> {
        match *self {
            TwoFactorFamily::RlOu { alpha, h1, h2 } => Ok((
                ou_kernel_diff(alpha, &KernelSpec::rl(h1)?, t, s)?,
                ou_kernel_diff(alpha, &KernelSpec::rl(h2)?, t, s)?,
            )),
            TwoFactorFamily::Fou { alpha, h1, h2 } => Ok((
                ou_kernel_diff(alpha, &KernelSpec::fbm(h1)?, t, s)?,
                ou_kernel_diff(alpha, &KernelSpec::fbm(h2)?, t, s)?,
            )),
            TwoFactorFamily::Mixed { alpha1, alpha2, h } => Ok((
                (alpha1 * (t - s)).exp(),
                ou_kernel_diff(alpha2, &KernelSpec::fbm(h)?, t, s)?,
            )),
        }
    }

    /// The two factor kernels as specs.
    pub fn kernels(&self) -> Result<[KernelSpec; 2]> {
        self.check_hypotheses()?;
        Ok(match *self {
            TwoFactorFamily::RlOu { alpha, h1, h2 } => [
                KernelSpec::volterra_ou(alpha, KernelSpec::rl(h1)?)?,
                KernelSpec::volterra_ou(alpha, KernelSpec::rl(h2)?)?,
            ],
            TwoFactorFamily::Fou { alpha, h1, h2 } => [
                KernelSpec::volterra_ou(alpha, KernelSpec::fbm(h1)?)?,
                KernelSpec::volterra_ou(alpha, KernelSpec::fbm(h2)?)?,
            ],
            TwoFactorFamily::Mixed { alpha1, alpha2, h } => [
                KernelSpec::std_ou(alpha1)?,
                KernelSpec::volterra_ou(alpha2, KernelSpec::fbm(h)?)?,
            ],
        })
    }
}

/// Confirm `det [[K1(T1,s), K2(T1,s)], [K1(T2,s), K2(T2,s)]] != 0` on each
/// `(s, T1, T2)` triple with `0 < s < T1 < T2`.
pub fn two_factor_analytic_check(
    family: TwoFactorFamily,
    triples: &[(f64, f64, f64)],
) -> Result<AnalyticCheck> {
    family.check_hypotheses()?;
    if triples.is_empty() {
        return Err(Error::InvalidParameter("no sample triples".into()));
    }
    let dets: Vec<(f64, f64)> = triples
        .par_iter()
        .enumerate()
        .map(|(idx, &(s, t1, t2))| {
            if !(s > 0.0 && s < t1 && t1 < t2) {
                return Err(Error::domain(
                    "two_factor_analytic_check",
                    format!("need 0 < s < T1 < T2, got ({s}, {t1}, {t2})"),
                )
                .at_index(idx));
            }
            let (a, b) = family.kernel_pair(t1, s).map_err(|e| e.at_index(idx))?;
            let (c, d) = family.kernel_pair(t2, s).map_err(|e| e.at_index(idx))?;
            let det = a * d - b * c;
            let scale = (a * a + c * c).sqrt() * (b * b + d * d).sqrt();
            Ok((det, scale))
        })
        .collect::<Result<_>>()?;
    let worst_margin = dets.iter().map(|(d, _)| d.abs()).fold(f64::INFINITY, f64::min);
    let sign = dets[0].0.signum();
    let pass = dets
        .iter()
        .all(|&(d, scale)| d.signum() == sign && d.abs() > DEGENERACY_TOL * scale);
    Ok(AnalyticCheck {
        pass,
        worst_margin,
        samples: dets.len(),
    })
}

/// `count` interior points `s` of `(0, T1)` paired with `(T1, T2)`.
pub fn sample_triples(t1: f64, t2: f64, count: usize) -> Vec<(f64, f64, f64)> {
    (1..=count)
        .map(|k| (t1 * k as f64 / (count + 1) as f64, t1, t2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn left_inverse_examples() {
        let inv = left_inverse_at(&dmatrix![2.0], 0.0).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        let inv = left_inverse_at(&dmatrix![1.0, 0.0; 1.0, 1.0], 0.0).unwrap();
        let expected = dmatrix![1.0, 0.0; -1.0, 1.0];
        assert!((inv - expected).amax() < 1e-14);
        let k = dmatrix![1.0; 1.0];
        let inv = left_inverse_at(&k, 0.0).unwrap();
        assert!((inv.clone() - dmatrix![0.5, 0.5]).amax() < 1e-15);
        assert!(((inv * k)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn left_inverse_rank_deficient() {
        let k = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert!(matches!(
            left_inverse_at(&k, 0.3),
            Err(Error::Incomplete { t, .. }) if t == 0.3
        ));
        let wide = dmatrix![1.0, 2.0];
        assert!(matches!(left_inverse_at(&wide, 0.0), Err(Error::Incomplete { .. })));
    }

    #[test]
    fn left_inverse_ill_conditioned_falls_back() {
        let k = dmatrix![1.0, 1.0; 1.0, 1.0 + 1e-9; 1.0, 1.0 - 1e-9];
        let inv = left_inverse_at(&k, 0.0).unwrap();
        let err = (inv * &k - DMatrix::identity(2, 2)).amax();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn vandermonde_examples() {
        let d = vandermonde_det(&VandermondeCase {
            exponents: vec![0.0, 1.0],
            points: vec![1.0, 2.0],
        })
        .unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        let d = vandermonde_det(&VandermondeCase {
            exponents: vec![0.5, 1.5],
            points: vec![1.0, 4.0],
        })
        .unwrap();
        assert!((d - 6.0).abs() < 1e-13);
        assert!(vandermonde_det(&VandermondeCase {
            exponents: vec![1.0, 0.5],
            points: vec![1.0, 4.0],
        })
        .is_err());
        assert!(vandermonde_det(&VandermondeCase {
            exponents: vec![0.5, 1.0],
            points: vec![0.0, 4.0],
        })
        .is_err());
    }

    #[test]
    fn analytic_check_preconditions() {
        let r = two_factor_analytic_check(
            TwoFactorFamily::RlOu {
                alpha: 0.3,
                h1: 0.7,
                h2: 0.7,
            },
            &sample_triples(1.0, 2.0, 5),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
        let r = two_factor_analytic_check(
            TwoFactorFamily::Mixed {
                alpha1: 0.6,
                alpha2: 0.5,
                h: 0.7,
            },
            &sample_triples(1.0, 2.0, 5),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(0.1, 1.0, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[9], 1.0);
        assert!(uniform_grid(1.0, 1.0, 10).is_err());
    }
}
