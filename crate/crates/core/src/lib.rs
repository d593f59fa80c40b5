//! Probabilistic scenario generation for power time series with a target
//! mean absolute percentage error.
//!
//! The pipeline fits conditional beta laws of the forecast error given the
//! input level ([`fit`]), turns a target MARE into per-level mean absolute
//! error targets and relocates each law to hit them ([`target`]), drives the
//! error draws with an iid or ARMA base process ([`arma`], [`scenario`]),
//! optionally smooths the output with a mixed-integer quadratic program
//! ([`curvature`]) and scores the result ([`eval`]).

pub mod arma;
pub mod curvature;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod fit;
pub mod fixture;
pub mod rng;
pub mod scenario;
pub mod special;
pub mod target;

pub use arma::{ArmaFit, ArmaModel, BaseProcessSeries};
pub use curvature::{CurvatureSolution, CurvatureSpec};
pub use dataio::{PairedSeries, SidSelection};
pub use error::{Error, Result};
pub use eval::ScoreReport;
pub use fit::{BetaParams, FittedModel};
pub use scenario::{Mode, ScenarioSet, ScenarioTable, SimulationRequest};
pub use target::{AdjustedParams, TargetFunction, WeightFunction};
