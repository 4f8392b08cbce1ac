//! Volterra-driven forward market models: kernels, market specification,
//! completeness checks, simulation, CRRA portfolios and option pricing.

pub mod completeness;
pub mod error;
pub mod kernels;
pub mod market;
pub mod portfolio;
pub mod pricing;
pub mod quadrature;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
pub use completeness::{CompletenessReport, Verdict};
pub use kernels::{HurstExponent, HurstRegime, KernelSpec};
pub use market::{KernelMatrix, MarketSpec, SeasonalityFn, Theta};
pub use portfolio::CRRAPolicy;
pub use pricing::{DiscountCurve, OptionKind, VanillaOption};
pub use simulation::{Measure, PathEnsemble, SeedSpec, TimeGrid};
pub use quadrature::QuadratureConfig;
