//! Replicator dynamics with payoff matrices driven by external inputs.
//!
//! A population splits its usage between competing technologies. Each
//! period the companies behind them set inputs (investment, price, ...),
//! which shape the payoff matrix linearly through an influence matrix `α`;
//! the normalized payoff matrix then drives the replicator equation for one
//! step. `α` is learned from observed market data by exhaustive integer
//! grid search.
//!
//! * [`dynamics`]: replicator rates, equilibria and their stability.
//! * [`influence`]: `α`, its constraints, payoff synthesis and
//!   normalization.
//! * [`simulate`]: trajectories and counterfactual scenarios.
//! * [`learn`]: grid search, error metric and train/validation protocol.
//! * [`dataset`]: market time series ingestion and input scaling.
//! * [`chart`]: SVG output.

pub mod chart;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod influence;
pub mod learn;
pub mod par;
pub mod reference;
pub mod simulate;

pub use dataset::{MarketDataset, NormalizationRecord};
pub use dynamics::{EquilibriumSet, PayoffMatrix, SharesState, Stability};
pub use error::{Error, Result};
pub use influence::{ConstraintMode, ConstraintSpec, InfluenceMatrix, InputVector};
pub use learn::{FitOptions, FitReport, GridSpec};
pub use par::Execution;
pub use simulate::{ScenarioSpec, Trajectory};
