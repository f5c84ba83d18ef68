//! Capacity-expansion and production-cost modeling engine for electric power
//! systems.
//!
//! Composable modules assemble a single linear or mixed-integer program
//! spanning multi-decade investment periods and chronological operational
//! timepoints, solve it with the built-in simplex / branch-and-bound backend
//! (or an external solver), and report investments, dispatch, and costs.

pub mod balancing;
pub mod compose;
pub mod data;
pub mod energy_sources;
pub mod error;
pub mod expr;
pub mod financials;
pub mod generators;
pub mod model;
pub mod policies;
pub mod reporting;
pub mod scenario;
pub mod solver;
pub mod storage;
pub mod timescales;
pub mod transmission;

pub use error::{Error, Result};
