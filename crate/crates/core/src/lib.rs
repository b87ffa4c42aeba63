//! Zombie-firm classification, zombie-credit shares, production-function
//! estimation and panel regressions on firm-year data.
pub mod aggregator;
pub mod classifier;
pub mod econometrics;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod panel_store;
pub mod pipeline;
pub mod specs;
pub mod synth;
pub mod tfp;

pub use error::{Error, Result};
