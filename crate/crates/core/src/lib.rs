//! Action Shapley valuation of world-model training data.
//!
//! The crate is organized bottom-up:
//!
//! - [`subset`]: bitset subsets and their canonical enumeration order
//! - [`shapley`]: exhaustive and truncated Action Shapley, cut-off
//!   cardinalities and the effort ratio
//! - [`env`]: synthetic control environments and training-series generation
//! - [`world_model`]: RBF-network transition/reward model
//! - [`agent`]: PID action updates, episode scoring and gain tuning
//! - [`valuation`]: valuation functions (synthetic and end-to-end) and the
//!   persistent valuation cache
//! - [`selection`]: training-set selection and agent validation

pub mod agent;
pub mod env;
pub mod error;
pub mod seed;
pub mod selection;
pub mod shapley;
pub mod subset;
pub mod valuation;
pub mod world_model;

pub use error::{Error, Result};
pub use shapley::{
    action_shapley_report, assemble_report, exact_shapley, p_comp, truncated_action_shapley,
    AlgoParams, PointResult, ShapleyReport, Valuation, ValuationOutcome,
};
pub use subset::{binomial, enumerate_subsets, SubsetMask};
