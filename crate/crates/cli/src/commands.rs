//! Subcommand pipelines. Each returns the exit code and a one-line summary.

use clap::{Args, ValueEnum};
use gvm_core::completeness::{scan, uniform_grid, DEFAULT_GRID_POINTS, DEFAULT_GRID_START};
use gvm_core::kernels::KernelSpec;
use gvm_core::portfolio::{optimal_delta, replicate};
use gvm_core::pricing::{price_option, reliability_option_price, tracking_error, ReliabilityOptionSpec};
use gvm_core::quadrature::{try_integrate, QuadratureConfig};
use gvm_core::simulation::{forward_paths, girsanov_density, mc_estimate, MCEstimate};
use gvm_core::{CRRAPolicy, DiscountCurve, MarketSpec, Measure, OptionKind, PathEnsemble, SeedSpec, TimeGrid, VanillaOption};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Tag, EXIT_INCOMPLETE};
use crate::output::{show, Output};
use crate::plot::{line_chart, Series};

pub struct Ctx {
    pub cfg: Option<RunConfig>,
    pub out: Output,
    pub seed: Option<u64>,
}

pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { code: 0, summary }
    }
}

impl Ctx {
    fn cfg(&self, op: &'static str) -> Result<&RunConfig, CliError> {
        self.cfg
            .as_ref()
            .ok_or_else(|| CliError::usage("cli", op, "--config <path> is required"))
    }

    fn seed(&self, op: &'static str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::usage("cli", op, "stochastic command needs --seed or a config seed"))
    }
}

fn need<T>(v: Option<T>, op: &'static str, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::usage("cli", op, format!("missing --{name}")))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureArg {
    P,
    Q,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::P => Measure::P,
            MeasureArg::Q => Measure::Q,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Monte Carlo paths [default: 10000]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Uniform time steps [default: 256]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Simulation horizon [default: first maturity]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Measure the paths are drawn under [default: q]
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityPaths {
    pub maturity: f64,
    pub initial_forward: f64,
    pub times: Vec<f64>,
    pub mean: Vec<MCEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractForward {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub initial_flow_forward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub measure: Measure,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub forwards: Vec<MaturityPaths>,
    pub contracts: Vec<ContractForward>,
}

fn flow_forward_initial(m: &MarketSpec, tj: f64, tk: f64) -> Result<f64, CliError> {
    let cfg = QuadratureConfig::default();
    let r = try_integrate(|x| m.risk_neutral_seasonality(x), tj, tk, &cfg).tag("market", "flow_forward_initial")?;
    Ok(r.value / (tk - tj))
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Outcome, CliError> {
    const OP: &str = "simulate";
    let cfg = ctx.cfg(OP)?;
    let (m, b) = (&cfg.market, &cfg.simulate);
    let paths = a.paths.or(b.paths).unwrap_or(10_000);
    let steps = a.steps.or(b.steps).unwrap_or(256);
    let horizon = a.horizon.or(b.horizon).unwrap_or(m.maturities()[0]);
    let measure = match (a.measure, b.measure.as_deref()) {
        (Some(x), _) => x.into(),
        (None, None) => Measure::Q,
        (None, Some(s)) => match s.to_ascii_lowercase().as_str() {
            "p" => Measure::P,
            "q" => Measure::Q,
            _ => return Err(CliError::usage("config", OP, format!("unknown measure {s:?}"))),
        },
    };
    let seed = ctx.seed(OP)?;
    if !(horizon > 0.0 && horizon <= m.horizon()) {
        return Err(CliError::usage("cli", OP, format!("horizon {horizon} outside (0, {}]", m.horizon())));
    }
    let grid = TimeGrid::uniform(horizon, steps).tag("simulation", "TimeGrid::uniform")?;
    let ens = PathEnsemble::sample_increments(grid, paths, m.n_factors(), SeedSpec::new(seed))
        .tag("simulation", "sample_increments")?;

    let mut forwards = Vec::with_capacity(m.maturities().len());
    for &tj in m.maturities() {
        let f = forward_paths(m, tj, &ens, measure).tag("simulation", "forward_paths")?;
        let mean = (0..f.times.len())
            .map(|k| mc_estimate(&f.column(k)))
            .collect::<gvm_core::Result<Vec<_>>>()
            .tag("simulation", "mc_estimate")?;
        forwards.push(MaturityPaths {
            maturity: tj,
            initial_forward: m.forward_initial(tj).tag("market", "forward_initial")?.price,
            times: f.times,
            mean,
        });
    }
    let contracts = match &cfg.calendar {
        Some(cal) => cal
            .contracts
            .iter()
            .map(|c| {
                Ok(ContractForward {
                    name: c.name.clone(),
                    start: c.start,
                    end: c.end,
                    initial_flow_forward: flow_forward_initial(m, c.start, c.end)?,
                })
            })
            .collect::<Result<_, CliError>>()?,
        None => Vec::new(),
    };
    let report = SimulateReport {
        measure,
        seed,
        paths,
        steps,
        horizon,
        forwards,
        contracts,
    };
    let json = ctx.out.json("simulate.json", &report)?;

    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(report.forwards.iter().map(|f| format!("F(t;{})", f.maturity)))
        .collect();
    let times = &report.forwards.iter().max_by_key(|f| f.times.len()).unwrap().times;
    let rows: Vec<Vec<Option<f64>>> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            std::iter::once(Some(t))
                .chain(report.forwards.iter().map(|f| f.mean.get(k).map(|e| e.mean)))
                .collect()
        })
        .collect();
    ctx.out.csv("forwards.csv", &header, &rows)?;

    if ctx.out.plots {
        let series: Vec<Series> = report
            .forwards
            .iter()
            .map(|f| Series {
                label: format!("T = {:.4}", f.maturity),
                points: f.times.iter().zip(&f.mean).map(|(&t, e)| (t, e.mean)).collect(),
            })
            .collect();
        line_chart(&ctx.out.path("forwards.svg"), "Mean simulated forward prices", "t", "F(t, T)", &series)?;
        let n = 200;
        let curve = (0..=n)
            .map(|k| {
                let big_t = m.horizon() * k as f64 / n as f64;
                m.risk_neutral_seasonality(big_t).map(|v| (big_t, v))
            })
            .collect::<gvm_core::Result<Vec<_>>>()
            .tag("market", "risk_neutral_seasonality")?;
        line_chart(
            &ctx.out.path("forward_curve.svg"),
            "Initial forward curve",
            "T",
            "F(0, T)",
            &[Series {
                label: "F(0, T)".into(),
                points: curve,
            }],
        )?;
    }
    Ok(Outcome::ok(format!(
        "simulate: {paths} paths x {steps} steps under {measure:?}, {} maturities -> {}",
        report.forwards.len(),
        show(&json)
    )))
}

#[derive(Debug, Args)]
pub struct CompletenessArgs {
    /// Scan grid size [default: 1024]
    #[arg(long)]
    pub points: Option<usize>,
    /// First scan time [default: 1e-6]
    #[arg(long)]
    pub start: Option<f64>,
    /// Last scan time [default: 0.999 T1]
    #[arg(long)]
    pub end: Option<f64>,
}

pub fn completeness(ctx: &Ctx, a: &CompletenessArgs) -> Result<Outcome, CliError> {
    const OP: &str = "completeness";
    let cfg = ctx.cfg(OP)?;
    let (m, b) = (&cfg.market, &cfg.completeness);
    let points = a.points.or(b.grid_points).unwrap_or(DEFAULT_GRID_POINTS);
    let start = a.start.or(b.grid_start).unwrap_or(DEFAULT_GRID_START);
    let end = a.end.or(b.grid_end).unwrap_or(0.999 * m.maturities()[0]);
    let grid = uniform_grid(start, end, points).tag("completeness", "uniform_grid")?;
    let report = scan(m, &grid).tag("completeness", "scan")?;
    let json = ctx.out.json("completeness.json", &report)?;
    let stat_name = if report.determinant.is_some() { "det" } else { "min_sv" };
    let rows: Vec<Vec<Option<f64>>> = report
        .grid
        .iter()
        .zip(report.statistic())
        .map(|(&t, &v)| vec![Some(t), Some(v)])
        .collect();
    ctx.out.csv("completeness.csv", &["t".into(), stat_name.into()], &rows)?;
    if ctx.out.plots {
        line_chart(
            &ctx.out.path("completeness.svg"),
            "Kernel matrix scan",
            "t",
            stat_name,
            &[Series {
                label: stat_name.into(),
                points: report.grid.iter().copied().zip(report.statistic().iter().copied()).collect(),
            }],
        )?;
    }
    let worst = report.statistic().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let summary = format!(
        "completeness: {:?} on {} points, min |{stat_name}| = {worst:e}, {} degenerate times -> {}",
        report.verdict,
        report.grid.len(),
        report.degenerate_times.len(),
        show(&json)
    );
    Ok(Outcome {
        code: if report.verdict.is_complete() { 0 } else { EXIT_INCOMPLETE },
        summary,
    })
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Price a call (the default)
    #[arg(long, conflicts_with = "put")]
    pub call: bool,
    /// Price a put
    #[arg(long)]
    pub put: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: Option<f64>,
    /// Option expiry
    #[arg(long = "T")]
    pub expiry: Option<f64>,
    /// Delivery time of the underlying forward
    #[arg(long = "Tj")]
    pub underlying: Option<f64>,
    /// Valuation time [default: 0]
    #[arg(long)]
    pub t: Option<f64>,
    /// Current forward price [default: F(0, Tj) when t = 0]
    #[arg(long, allow_negative_numbers = true)]
    pub forward: Option<f64>,
    /// Flat short rate [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub rate: Option<f64>,
}

pub fn price(ctx: &Ctx, a: &PriceArgs) -> Result<Outcome, CliError> {
    const OP: &str = "price";
    let cfg = ctx.cfg(OP)?;
    let (m, b) = (&cfg.market, &cfg.price);
    let kind = if a.put {
        OptionKind::Put
    } else if a.call {
        OptionKind::Call
    } else {
        match b.kind.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("call") => OptionKind::Call,
            Some("put") => OptionKind::Put,
            Some(k) => return Err(CliError::usage("config", OP, format!("unknown option kind {k:?}"))),
        }
    };
    let strike = need(a.strike.or(b.strike), OP, "strike")?;
    let expiry = need(a.expiry.or(b.expiry), OP, "T")?;
    let underlying = need(a.underlying.or(b.underlying), OP, "Tj")?;
    let t = a.t.or(b.t).unwrap_or(0.0);
    let forward = match a.forward.or(b.forward) {
        Some(f) => f,
        None if t == 0.0 => m.forward_initial(underlying).tag("market", "forward_initial")?.price,
        None => return Err(CliError::usage("cli", OP, "--forward is required when t > 0")),
    };
    let curve = DiscountCurve::flat(a.rate.or(b.rate).unwrap_or(0.0)).tag("pricing", "DiscountCurve::flat")?;
    let option = VanillaOption::new(kind, strike, expiry, underlying).tag("pricing", "VanillaOption::new")?;
    let report = price_option(m, &option, t, forward, &curve).tag("pricing", "price_option")?;
    let json = ctx.out.json("price.json", &report)?;
    Ok(Outcome::ok(format!(
        "price: {kind:?} K={strike} T={expiry} Tj={underlying} F={forward} price={} delta={} sigma={} -> {}",
        report.price,
        report.hedge_delta,
        report.sigma,
        show(&json)
    )))
}

#[derive(Debug, Args)]
pub struct PriceRoArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub strike: Option<f64>,
    /// Start of the reliability window
    #[arg(long = "T1")]
    pub t1: Option<f64>,
    /// End of the reliability window
    #[arg(long = "T2")]
    pub t2: Option<f64>,
}

pub fn price_ro(ctx: &Ctx, a: &PriceRoArgs) -> Result<Outcome, CliError> {
    const OP: &str = "price-ro";
    let cfg = ctx.cfg(OP)?;
    let b = &cfg.reliability_option;
    let strike = need(a.strike.or(b.strike), OP, "strike")?;
    let t1 = need(a.t1.or(b.window.map(|w| w.0)), OP, "T1")?;
    let t2 = need(a.t2.or(b.window.map(|w| w.1)), OP, "T2")?;
    let r = reliability_option_price(&cfg.market, &ReliabilityOptionSpec { strike, window: (t1, t2) })
        .tag("pricing", "reliability_option_price")?;
    let json = ctx.out.json("reliability_option.json", &r)?;
    Ok(Outcome::ok(format!(
        "price-ro: K={strike} window=[{t1}, {t2}] price={} ({} panels) -> {}",
        r.price,
        r.quadrature_panels,
        show(&json)
    )))
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    /// Relative risk aversion parameter, gamma < 1 (0 is log utility) [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Initial wealth [default: 1]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Trading horizon [default: first maturity]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Time steps [default: 128]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Monte Carlo paths [default: 10000]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Also run the discrete hedge and report the replication error
    #[arg(long)]
    pub replicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub gamma: f64,
    pub x0: f64,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub lambda_star: f64,
    #[serde(rename = "H0")]
    pub h0: f64,
    pub expected_utility_closed_form: f64,
    pub expected_utility_mc: MCEstimate,
    pub budget_mc: MCEstimate,
    pub replication_error: Option<f64>,
    pub replication_skipped_times: Option<Vec<f64>>,
}

pub fn portfolio(ctx: &Ctx, a: &PortfolioArgs) -> Result<Outcome, CliError> {
    const OP: &str = "portfolio";
    let cfg = ctx.cfg(OP)?;
    let (m, b) = (&cfg.market, &cfg.portfolio);
    let gamma = a.gamma.or(b.gamma).unwrap_or(0.5);
    let x0 = a.x0.or(b.x0).unwrap_or(1.0);
    let horizon = a.horizon.or(b.horizon).unwrap_or(m.maturities()[0]);
    let steps = a.steps.or(b.steps).unwrap_or(128);
    let paths = a.paths.or(b.paths).unwrap_or(10_000);
    let seed = ctx.seed(OP)?;
    let policy = CRRAPolicy::for_market(m, gamma, x0, horizon).tag("portfolio", "CRRAPolicy::for_market")?;
    let grid = TimeGrid::uniform(horizon, steps).tag("simulation", "TimeGrid::uniform")?;
    let ens = PathEnsemble::sample_increments(grid.clone(), paths, m.n_factors(), SeedSpec::new(seed))
        .tag("simulation", "sample_increments")?;
    let z = girsanov_density(m.theta(), &ens).tag("simulation", "girsanov_density")?;
    let eu_mc = policy.expected_utility_mc(&ens).tag("portfolio", "expected_utility_mc")?;

    let wealth_at = |k: usize| -> Result<Vec<f64>, CliError> {
        let t = grid.points()[k];
        z.values
            .iter()
            .map(|zp| policy.optimal_wealth(t, zp[k]))
            .collect::<gvm_core::Result<_>>()
            .tag("portfolio", "optimal_wealth")
    };
    let terminal = wealth_at(steps)?;
    let weighted: Vec<f64> = terminal.iter().zip(z.terminal()).map(|(x, zz)| x * zz).collect();
    let budget = mc_estimate(&weighted).tag("simulation", "mc_estimate")?;

    let rep = if a.replicate || b.replicate {
        Some(replicate(&policy, m, &ens).tag("portfolio", "replicate")?)
    } else {
        None
    };

    let nm = m.maturities().len();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut mean_path = Vec::with_capacity(steps + 1);
    for (k, &t) in grid.points().iter().enumerate() {
        let mean = mc_estimate(&wealth_at(k)?).tag("simulation", "mc_estimate")?.mean;
        mean_path.push((t, mean));
        // Δ* is linear in X*, so E[Δ*_t] is the hedge of E[X*_t].
        let delta = m
            .kernel_matrix(t)
            .and_then(|kmat| optimal_delta(&policy, mean, &kmat, m.theta().at(t)))
            .ok();
        let mut row = vec![Some(t), Some(mean)];
        row.extend((0..nm).map(|j| delta.as_ref().map(|d| d[j])));
        rows.push(row);
    }
    let header: Vec<String> = ["t".to_string(), "mean_wealth".into()]
        .into_iter()
        .chain((1..=nm).map(|j| format!("mean_delta_{j}")))
        .collect();
    ctx.out.csv("portfolio.csv", &header, &rows)?;

    let report = PortfolioReport {
        gamma,
        x0,
        horizon,
        steps,
        paths,
        seed,
        lambda_star: policy.lambda_star(),
        h0: policy.h0(),
        expected_utility_closed_form: policy.expected_utility(),
        expected_utility_mc: eu_mc,
        budget_mc: budget,
        replication_error: rep.as_ref().map(|r| r.max_rel_mismatch),
        replication_skipped_times: rep.map(|r| r.skipped_times),
    };
    let json = ctx.out.json("portfolio.json", &report)?;
    if ctx.out.plots {
        line_chart(
            &ctx.out.path("portfolio.svg"),
            "Mean optimal wealth",
            "t",
            "E[X*_t]",
            &[Series {
                label: "E[X*_t]".into(),
                points: mean_path,
            }],
        )?;
    }
    Ok(Outcome::ok(format!(
        "portfolio: gamma={gamma} EU closed form {} vs MC {} +- {}, budget {} -> {}",
        report.expected_utility_closed_form,
        eu_mc.mean,
        eu_mc.std_err,
        budget.mean,
        show(&json)
    )))
}

#[derive(Debug, Args)]
pub struct TrackingArgs {
    /// Observation time [default: Tj]
    #[arg(long)]
    pub t: Option<f64>,
    /// Maturity of the tracking forward [default: Tj]
    #[arg(long)]
    pub t_tilde: Option<f64>,
    /// Delivery start; without it every calendar contract is evaluated
    #[arg(long = "Tj")]
    pub tj: Option<f64>,
    /// Delivery end
    #[arg(long = "Tk")]
    pub tk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingEntry {
    pub name: Option<String>,
    pub t: f64,
    pub t_tilde: f64,
    pub tj: f64,
    pub tk: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub entries: Vec<TrackingEntry>,
}

pub fn tracking(ctx: &Ctx, a: &TrackingArgs) -> Result<Outcome, CliError> {
    const OP: &str = "tracking-error";
    let cfg = ctx.cfg(OP)?;
    let (m, b) = (&cfg.market, &cfg.tracking_error);
    let mut cases: Vec<(Option<String>, f64, f64, f64, f64)> = Vec::new();
    match (a.tj.or(b.tj), a.tk.or(b.tk)) {
        (Some(tj), Some(tk)) => {
            let t_tilde = a.t_tilde.or(b.t_tilde).unwrap_or(tj);
            cases.push((None, a.t.or(b.t).unwrap_or(tj), t_tilde, tj, tk));
        }
        (None, None) => {
            let cal = cfg
                .calendar
                .as_ref()
                .ok_or_else(|| CliError::usage("cli", OP, "give --Tj and --Tk or a config calendar"))?;
            for c in &cal.contracts {
                let t = a.t.or(b.t).unwrap_or(c.start).min(c.start);
                cases.push((Some(c.name.clone()), t, c.start, c.start, c.end));
            }
        }
        _ => return Err(CliError::usage("cli", OP, "--Tj and --Tk go together")),
    }
    let entries = cases
        .into_iter()
        .map(|(name, t, t_tilde, tj, tk)| {
            let variance = tracking_error(m, t, t_tilde, tj, tk).tag("pricing", "tracking_error")?;
            Ok(TrackingEntry {
                name,
                t,
                t_tilde,
                tj,
                tk,
                variance,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let worst = entries.iter().map(|e| e.variance).fold(0.0, f64::max);
    let report = TrackingReport { entries };
    let json = ctx.out.json("tracking_error.json", &report)?;
    Ok(Outcome::ok(format!(
        "tracking-error: {} contracts, largest variance {worst:e} -> {}",
        report.entries.len(),
        show(&json)
    )))
}

#[derive(Debug, Args)]
pub struct KernelEvalArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub s: f64,
    /// Delivery start for the flow kernel
    #[arg(long = "Tj")]
    pub tj: Option<f64>,
    /// Delivery end for the flow kernel
    #[arg(long = "Tk")]
    pub tk: Option<f64>,
    /// Kernel as JSON; overrides the market factors
    #[arg(long)]
    pub kernel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub kernel: KernelSpec,
    pub value: f64,
    pub flow: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEvalReport {
    pub t: f64,
    pub s: f64,
    pub tj: Option<f64>,
    pub tk: Option<f64>,
    pub factors: Vec<KernelValue>,
}

pub fn kernel_eval(ctx: &Ctx, a: &KernelEvalArgs) -> Result<Outcome, CliError> {
    const OP: &str = "kernel-eval";
    let kernels: Vec<KernelSpec> = match &a.kernel {
        Some(text) => vec![serde_json::from_str(text).map_err(|e| CliError::usage("kernels", "parse", e.to_string()))?],
        None => ctx.cfg(OP)?.market.factors().to_vec(),
    };
    let window = match (a.tj, a.tk) {
        (Some(tj), Some(tk)) => Some((tj, tk)),
        (None, None) => None,
        _ => return Err(CliError::usage("cli", OP, "--Tj and --Tk go together")),
    };
    let factors = kernels
        .into_iter()
        .map(|k| {
            let value = k.eval(a.t, a.s).tag("kernels", "eval")?;
            let flow = window
                .map(|(tj, tk)| k.flow_kernel(a.s, tj, tk))
                .transpose()
                .tag("kernels", "flow_kernel")?;
            Ok(KernelValue { kernel: k, value, flow })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = KernelEvalReport {
        t: a.t,
        s: a.s,
        tj: a.tj,
        tk: a.tk,
        factors,
    };
    let json = ctx.out.json("kernel_eval.json", &report)?;
    let values: Vec<String> = report.factors.iter().map(|f| format!("{}", f.value)).collect();
    Ok(Outcome::ok(format!(
        "kernel-eval: K(t={}, s={}) = [{}] -> {}",
        a.t,
        a.s,
        values.join(", "),
        show(&json)
    )))
}
