//! Equilibrium computation and contract protocol for a two-dealer
//! intermediated repo market.

pub mod audit;
pub mod bayesian;
pub mod contract;
pub mod digest;
pub mod equilibrium;
pub mod error;
pub mod fixed;
pub mod numeric;
pub mod schedules;
pub mod strategy_lab;

pub use error::{EngineError, Result};
