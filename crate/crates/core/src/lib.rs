//! Decision-focused learning for linear optimization objectives.
//!
//! The pieces, bottom to top: oracles that solve 0-1 knapsacks and
//! energy-cost scheduling problems (exactly, greedily, or relaxed), a dense
//! bounded-variable simplex with branch and bound on top, a linear model
//! trained either on coefficient error or directly on decision regret via
//! the surrogate subgradient, and an experiment harness that ties data
//! ingestion, training regimes, and evaluation together.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod knapsack;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod scheduling;
pub mod simplex;
pub mod training;

pub use data::{prepare, Dataset, Prepared, SplitSpec};
pub use error::{Error, Result};
pub use evaluation::{LearningCurve, RegretEvaluator};
pub use experiment::{load_config, run_experiment, ExperimentConfig, ExperimentReport};
pub use model::{LinearModel, OptimizerState, Standardizer};
pub use oracle::{regret, OracleHandle, OracleSpec, SolveHints, WarmstartPolicy};
pub use problem::{canonicalize, dot, OptInstance, Sense, SolutionVector};
pub use training::{train_mse, train_mse_r, train_spo, Regime, TrainConfig, TrainOutcome};
