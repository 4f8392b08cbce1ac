//! Monte Carlo paths of spot, forwards and the Girsanov density.
//!
//! Brownian increments are regenerated on demand from a per-path ChaCha8
//! stream, so ensembles cost no memory and results do not depend on the
//! number of worker threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::market::{MarketSpec, Theta};

/// Probability measure a path is simulated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    P,
    Q,
}

/// Strictly increasing simulation times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("time grid needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidParameter("time grid must start at 0".into()));
        }
        if !points.iter().all(|t| t.is_finite()) || !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(
                "uniform grid needs a positive horizon and at least one step".into(),
            ));
        }
        let h = horizon / steps as f64;
        let points = (0..=steps)
            .map(|k| if k == steps { horizon } else { h * k as f64 })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.points[k + 1] - self.points[k]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the grid point equal to `t` (within 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| (p - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Every `stride`-th point.
    fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.steps() % stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen {} steps by {stride}",
                self.steps()
            )));
        }
        Self::new(self.points.iter().step_by(stride).copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent stream for `path`.
    pub fn path_rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path as u64);
        rng
    }
}

/// Brownian increments of one path, laid out step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    n_factors: usize,
    data: Vec<f64>,
}

impl Increments {
    pub fn get(&self, step: usize, factor: usize) -> f64 {
        self.data[step * self.n_factors + factor]
    }

    pub fn step(&self, step: usize) -> &[f64] {
        &self.data[step * self.n_factors..(step + 1) * self.n_factors]
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.n_factors
    }
}

/// A reproducible family of Brownian paths on a grid.
///
/// Draws live on a fine grid; [`PathEnsemble::aggregated`] views the same
/// paths on a coarser grid by summing increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    fine: TimeGrid,
    stride: usize,
    grid: TimeGrid,
    n_paths: usize,
    n_factors: usize,
    seed: SeedSpec,
}

impl PathEnsemble {
    pub fn sample_increments(
        grid: TimeGrid,
        n_paths: usize,
        n_factors: usize,
        seed: SeedSpec,
    ) -> Result<Self> {
        if n_paths == 0 || n_factors == 0 {
            return Err(Error::InvalidParameter(
                "ensemble needs at least one path and one factor".into(),
            ));
        }
        Ok(Self {
            fine: grid.clone(),
            stride: 1,
            grid,
            n_paths,
            n_factors,
            seed,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    /// The same Brownian paths on a grid `factor` times coarser.
    pub fn aggregated(&self, factor: usize) -> Result<Self> {
        let stride = self.stride * factor;
        Ok(Self {
            grid: self.fine.coarsen(stride)?,
            stride,
            ..self.clone()
        })
    }

    /// Increments `ΔW_k ~ N(0, Δt_k)` of `path` on the ensemble grid.
    pub fn increments(&self, path: usize) -> Increments {
        let mut rng = self.seed.path_rng(path);
        let nf = self.n_factors;
        let mut fine = Vec::with_capacity(self.fine.steps() * nf);
        for k in 0..self.fine.steps() {
            let sd = self.fine.dt(k).sqrt();
            for _ in 0..nf {
                let z: f64 = StandardNormal.sample(&mut rng);
                fine.push(z * sd);
            }
        }
        if self.stride == 1 {
            return Increments {
                n_factors: nf,
                data: fine,
            };
        }
        let coarse_steps = self.grid.steps();
        let mut data = vec![0.0; coarse_steps * nf];
        for k in 0..coarse_steps {
            for j in k * self.stride..(k + 1) * self.stride {
                for f in 0..nf {
                    data[k * nf + f] += fine[j * nf + f];
                }
            }
        }
        Increments { n_factors: nf, data }
    }
}

/// Discretization of `∫ K(t, s) dW_s` on grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WienerRule {
    /// `(1/Δt) ∫_cell K(t, s) ds`; finite for every square-integrable kernel.
    #[default]
    CellAverage,
    /// `K(t, s_k)` at the left endpoint; fails where the kernel is singular
    /// at `s = 0`.
    LeftPoint,
}

/// Weights of the first `cells` grid cells for `∫ K(big_t, s) dW_s`.
pub fn cell_weights(
    kernel: &KernelSpec,
    big_t: f64,
    grid: &TimeGrid,
    cells: usize,
    rule: WienerRule,
) -> Result<Vec<f64>> {
    let p = grid.points();
    if cells > grid.steps() || (cells > 0 && p[cells] > big_t * (1.0 + 1e-14)) {
        return Err(Error::domain(
            "cell_weights",
            format!("cells beyond T={big_t}"),
        ));
    }
    (0..cells)
        .map(|k| {
            let (a, b) = (p[k], p[k + 1].min(big_t));
            match rule {
                WienerRule::CellAverage => Ok(kernel.integral(big_t, a, b)? / (b - a)),
                WienerRule::LeftPoint => kernel.eval(big_t, a),
            }
            .map_err(|e| e.at_index(k))
        })
        .collect()
}

/// Per-path values at selected times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathValues {
    pub times: Vec<f64>,
    /// `values[path][time]`
    pub values: Vec<Vec<f64>>,
}

impl PathValues {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.column(self.times.len() - 1)
    }
}

/// Sample mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

/// Deterministic pairwise sum.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn mc_estimate(values: &[f64]) -> Result<MCEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter("Monte Carlo estimate needs n >= 2".into()));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite Monte Carlo sample".into()));
    }
    let mean = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    Ok(MCEstimate {
        mean,
        std_err: (var / n as f64).sqrt(),
        n,
    })
}

/// Spot paths at every grid time.
pub fn spot_paths(market: &MarketSpec, ensemble: &PathEnsemble, measure: Measure) -> Result<PathValues> {
    let all: Vec<usize> = (0..ensemble.grid().points().len()).collect();
    spot_paths_at(market, ensemble, measure, &all, WienerRule::default())
}

/// Spot `S_t = level(t) + Σ_i Σ_k w_ik(t) ΔW^i_k` at grid indices
/// `indices`, with `level = φ` under P and `φ_Q` under Q.
pub fn spot_paths_at(
    market: &MarketSpec,
    ensemble: &PathEnsemble,
    measure: Measure,
    indices: &[usize],
    rule: WienerRule,
) -> Result<PathValues> {
    check_ensemble(market, ensemble)?;
    let grid = ensemble.grid();
    let p = grid.points();
    if grid.last() > market.horizon() * (1.0 + 1e-14) {
        return Err(Error::domain("spot_paths", "grid extends past the market horizon"));
    }
    check_indices(indices, p.len())?;
    // weights[out][factor][cell]
    let weights: Vec<Vec<Vec<f64>>> = indices
        .par_iter()
        .map(|&j| {
            market
                .factors()
                .iter()
                .map(|k| cell_weights(k, p[j], grid, j, rule))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let levels: Vec<f64> = indices
        .iter()
        .map(|&j| match measure {
            Measure::P => Ok(market.seasonality().eval(p[j])),
            Measure::Q => market.risk_neutral_seasonality(p[j]),
        })
        .collect::<Result<_>>()?;
    let values = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| {
            let inc = ensemble.increments(path);
            weights
                .iter()
                .zip(&levels)
                .map(|(w, level)| {
                    let mut s = 0.0;
                    for (f, wf) in w.iter().enumerate() {
                        for (k, wk) in wf.iter().enumerate() {
                            s += wk * inc.get(k, f);
                        }
                    }
                    level + s
                })
                .collect()
        })
        .collect();
    Ok(PathValues {
        times: indices.iter().map(|&j| p[j]).collect(),
        values,
    })
}

/// Forward `F(t, T_j)` on `grid ∩ [0, T_j]`. The ensemble is `W^Q` under Q
/// and `W` under P, where the drift `K(T_j, t) · θ(t)` is added.
pub fn forward_paths(
    market: &MarketSpec,
    tj: f64,
    ensemble: &PathEnsemble,
    measure: Measure,
) -> Result<PathValues> {
    forward_paths_with(market, tj, ensemble, measure, WienerRule::default())
}

pub fn forward_paths_with(
    market: &MarketSpec,
    tj: f64,
    ensemble: &PathEnsemble,
    measure: Measure,
    rule: WienerRule,
) -> Result<PathValues> {
    check_ensemble(market, ensemble)?;
    if !market
        .maturities()
        .iter()
        .any(|&m| (m - tj).abs() <= 1e-12 * m.max(1.0))
    {
        return Err(Error::domain(
            "forward_paths",
            format!("{tj} is not a traded maturity"),
        ));
    }
    let grid = ensemble.grid();
    let p = grid.points();
    let n_out = p.partition_point(|&t| t <= tj * (1.0 + 1e-14));
    let cells = n_out - 1;
    let weights: Vec<Vec<f64>> = market
        .factors()
        .iter()
        .map(|k| cell_weights(k, tj, grid, cells, rule))
        .collect::<Result<_>>()?;
    let drift: Vec<f64> = match measure {
        Measure::Q => vec![0.0; cells],
        Measure::P => (0..cells)
            .map(|k| {
                let th = market.theta().at(p[k]);
                grid.dt(k) * weights.iter().zip(th).map(|(w, t)| w[k] * t).sum::<f64>()
            })
            .collect(),
    };
    let f0 = market.risk_neutral_seasonality(tj)?;
    let values = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| {
            let inc = ensemble.increments(path);
            let mut out = Vec::with_capacity(n_out);
            let mut f = f0;
            out.push(f);
            for k in 0..cells {
                let mut d = drift[k];
                for (fi, w) in weights.iter().enumerate() {
                    d += w[k] * inc.get(k, fi);
                }
                f += d;
                out.push(f);
            }
            out
        })
        .collect();
    Ok(PathValues {
        times: p[..n_out].to_vec(),
        values,
    })
}

/// `Z_t = exp(-Σ θ(t_k) · ΔW_k - ½ Σ |θ(t_k)|² Δt_k)` on the ensemble grid.
pub fn girsanov_density(theta: &Theta, ensemble: &PathEnsemble) -> Result<PathValues> {
    if theta.dim() != ensemble.n_factors() {
        return Err(Error::InvalidParameter(format!(
            "theta has dimension {} but the ensemble has {} factors",
            theta.dim(),
            ensemble.n_factors()
        )));
    }
    let grid = ensemble.grid();
    let p = grid.points();
    let steps = grid.steps();
    let compensator: Vec<f64> = (0..steps)
        .map(|k| 0.5 * grid.dt(k) * theta.at(p[k]).iter().map(|x| x * x).sum::<f64>())
        .collect();
    let values = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| {
            let inc = ensemble.increments(path);
            let mut log_z = 0.0;
            let mut out = Vec::with_capacity(steps + 1);
            out.push(1.0);
            for k in 0..steps {
                let th = theta.at(p[k]);
                let dot: f64 = th.iter().zip(inc.step(k)).map(|(a, b)| a * b).sum();
                log_z -= dot + compensator[k];
                out.push(log_z.exp());
            }
            out
        })
        .collect();
    Ok(PathValues {
        times: p.to_vec(),
        values,
    })
}

/// Exact fractional Brownian motion on `grid` by Cholesky factorization of
/// the covariance `½(s^{2H} + t^{2H} - |t - s|^{2H})`.
pub fn fbm_paths_exact(h: f64, grid: &TimeGrid, n_paths: usize, seed: SeedSpec) -> Result<PathValues> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!("Hurst exponent {h} outside (0, 1)")));
    }
    if grid.points().len() > 2049 {
        return Err(Error::InvalidParameter("exact fBm sampling limited to 2048 steps".into()));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let t = &grid.points()[1..];
    let n = t.len();
    let two_h = 2.0 * h;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (t[i].powf(two_h) + t[j].powf(two_h) - (t[i] - t[j]).abs().powf(two_h))
    });
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("fBm covariance is not positive definite".into()))?;
    let l = chol.l();
    let values = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = seed.path_rng(path);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            for i in 0..n {
                let row = l.row(i);
                out.push((0..=i).map(|k| row[k] * z[k]).sum());
            }
            out
        })
        .collect();
    Ok(PathValues {
        times: grid.points().to_vec(),
        values,
    })
}

/// Largest pathwise gap between the Volterra OU kernel route and the Euler
/// Langevin route `Y_{k+1} = Y_k + α Y_k Δt + ΔZ_k`, over all paths and
/// grid times. Uses factor 0 of the ensemble.
pub fn ou_path_equivalence(alpha: f64, base: &KernelSpec, ensemble: &PathEnsemble) -> Result<f64> {
    let grid = ensemble.grid();
    let p = grid.points();
    let n = p.len();
    let rule = WienerRule::CellAverage;
    let ou = if alpha == 0.0 {
        base.clone()
    } else {
        KernelSpec::volterra_ou(alpha, base.clone())?
    };
    let row_weights = |k: &KernelSpec| -> Result<Vec<Vec<f64>>> {
        (0..n)
            .into_par_iter()
            .map(|j| cell_weights(k, p[j], grid, j, rule))
            .collect()
    };
    let wy = row_weights(&ou)?;
    let wz = row_weights(base)?;
    let gaps: Vec<f64> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| {
            let inc = ensemble.increments(path);
            let dw: Vec<f64> = (0..grid.steps()).map(|k| inc.get(k, 0)).collect();
            let dot = |w: &[f64]| w.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
            let mut gap: f64 = 0.0;
            let mut y_euler = 0.0;
            let mut z_prev = 0.0;
            for j in 1..n {
                let z = dot(&wz[j]);
                y_euler += alpha * y_euler * grid.dt(j - 1) + (z - z_prev);
                z_prev = z;
                gap = gap.max((dot(&wy[j]) - y_euler).abs());
            }
            gap
        })
        .collect();
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

fn check_ensemble(market: &MarketSpec, ensemble: &PathEnsemble) -> Result<()> {
    if ensemble.n_factors() != market.n_factors() {
        return Err(Error::InvalidParameter(format!(
            "ensemble has {} factors but the market has {}",
            ensemble.n_factors(),
            market.n_factors()
        )));
    }
    Ok(())
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    if indices.iter().any(|&j| j >= len) {
        return Err(Error::InvalidParameter("output index beyond the grid".into()));
    }
    Ok(())
}
