//! Run configuration: the market plus optional per-command defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use gvm_core::MarketSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    market: serde_json::Value,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    emit_plots: bool,
    #[serde(default)]
    calendar: Option<RawCalendar>,
    #[serde(default)]
    simulate: SimulateBlock,
    #[serde(default)]
    completeness: CompletenessBlock,
    #[serde(default)]
    price: PriceBlock,
    #[serde(default)]
    reliability_option: ReliabilityBlock,
    #[serde(default)]
    portfolio: PortfolioBlock,
    #[serde(default)]
    tracking_error: TrackingBlock,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub market: MarketSpec,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub emit_plots: bool,
    pub calendar: Option<Calendar>,
    pub simulate: SimulateBlock,
    pub completeness: CompletenessBlock,
    pub price: PriceBlock,
    pub reliability_option: ReliabilityBlock,
    pub portfolio: PortfolioBlock,
    pub tracking_error: TrackingBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub measure: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletenessBlock {
    pub grid_points: Option<usize>,
    pub grid_start: Option<f64>,
    pub grid_end: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceBlock {
    pub kind: Option<String>,
    pub strike: Option<f64>,
    pub expiry: Option<f64>,
    pub underlying: Option<f64>,
    pub t: Option<f64>,
    pub forward: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityBlock {
    pub strike: Option<f64>,
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioBlock {
    pub gamma: Option<f64>,
    pub x0: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    #[serde(default)]
    pub replicate: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingBlock {
    pub t: Option<f64>,
    pub t_tilde: Option<f64>,
    pub tj: Option<f64>,
    pub tk: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalendar {
    origin: String,
    #[serde(default = "default_day_count")]
    day_count: String,
    contracts: Vec<RawContract>,
}

fn default_day_count() -> String {
    "ACT/365".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContract {
    name: String,
    start: String,
    end: String,
}

/// A traded delivery-period contract with year-fraction bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contract {
    pub name: String,
    pub start_date: String,
    pub end_date: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calendar {
    pub origin: String,
    pub day_count: String,
    pub contracts: Vec<Contract>,
}

fn parse_date(s: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| CliError::usage("config", "calendar", format!("bad date {s:?}: {e}")))
}

impl RawCalendar {
    fn resolve(self, market: &MarketSpec) -> Result<Calendar, CliError> {
        if self.day_count.to_ascii_uppercase() != "ACT/365" {
            return Err(CliError::usage(
                "config",
                "calendar",
                format!("unsupported day count {:?}; only ACT/365", self.day_count),
            ));
        }
        let origin = parse_date(&self.origin)?;
        let frac = |d: NaiveDate| (d - origin).num_days() as f64 / 365.0;
        let on_curve = |x: f64| market.maturities().iter().any(|&m| (m - x).abs() <= 1e-9);
        let mut contracts = Vec::with_capacity(self.contracts.len());
        for c in self.contracts {
            let (s, e) = (parse_date(&c.start)?, parse_date(&c.end)?);
            let (start, end) = (frac(s), frac(e));
            if !(start < end) || start < 0.0 {
                return Err(CliError::usage(
                    "config",
                    "calendar",
                    format!("contract {} has an empty or past delivery period", c.name),
                ));
            }
            if !on_curve(start) || !on_curve(end) {
                return Err(CliError::usage(
                    "config",
                    "calendar",
                    format!("contract {} bounds {start}, {end} are not market maturities", c.name),
                ));
            }
            contracts.push(Contract {
                name: c.name,
                start_date: c.start,
                end_date: c.end,
                start,
                end,
            });
        }
        Ok(Calendar {
            origin: self.origin,
            day_count: "ACT/365".into(),
            contracts,
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage("config", "load", format!("{}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage("config", "parse", format!("{}: {e}", path.display())))?;
        let market_value = match raw.market {
            serde_json::Value::String(p) => {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                let mp = base.join(p);
                let t = fs::read_to_string(&mp)
                    .map_err(|e| CliError::usage("config", "load", format!("{}: {e}", mp.display())))?;
                serde_json::from_str(&t)
                    .map_err(|e| CliError::usage("config", "parse", format!("{}: {e}", mp.display())))?
            }
            v => v,
        };
        let market: MarketSpec = serde_json::from_value(market_value)
            .map_err(|e| CliError::usage("market", "parse", e.to_string()))?;
        let calendar = raw.calendar.map(|c| c.resolve(&market)).transpose()?;
        Ok(Self {
            market,
            seed: raw.seed,
            output_dir: raw.output_dir,
            emit_plots: raw.emit_plots,
            calendar,
            simulate: raw.simulate,
            completeness: raw.completeness,
            price: raw.price,
            reliability_option: raw.reliability_option,
            portfolio: raw.portfolio,
            tracking_error: raw.tracking_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gvm_core::{KernelSpec, SeasonalityFn, Theta};

    fn market(maturities: Vec<f64>) -> MarketSpec {
        let h = *maturities.last().unwrap();
        MarketSpec::new(
            vec![KernelSpec::std_ou(-1.0).unwrap()],
            maturities,
            SeasonalityFn::Constant { level: 1.0 },
            Theta::zero(1),
            h,
        )
        .unwrap()
    }

    fn raw(day_count: &str, start: &str, end: &str) -> RawCalendar {
        RawCalendar {
            origin: "2024-05-01".into(),
            day_count: day_count.into(),
            contracts: vec![RawContract {
                name: "c".into(),
                start: start.into(),
                end: end.into(),
            }],
        }
    }

    #[test]
    fn act365_year_fractions() {
        let m = market(vec![31.0 / 365.0, 610.0 / 365.0]);
        let cal = raw("act/365", "2024-06-01", "2026-01-01").resolve(&m).unwrap();
        assert_eq!(cal.contracts[0].start, 31.0 / 365.0);
        assert_eq!(cal.contracts[0].end, 610.0 / 365.0);
    }

    #[test]
    fn calendar_rejections() {
        let m = market(vec![31.0 / 365.0, 61.0 / 365.0]);
        assert!(raw("ACT/360", "2024-06-01", "2024-07-01").resolve(&m).is_err());
        assert!(raw("ACT/365", "2024-07-01", "2024-06-01").resolve(&m).is_err());
        assert!(raw("ACT/365", "2024-06-02", "2024-07-01").resolve(&m).is_err());
        assert!(raw("ACT/365", "2024-13-01", "2024-07-01").resolve(&m).is_err());
    }
}
