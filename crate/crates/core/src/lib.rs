//! Multi-task combination of multi-zone 15-minute load forecasts.
//!
//! Base forecasts from several experts (a provider's forecast and a daily
//! random walk, typically) are combined across all zones at once by
//! generalized least squares on the stacked regression `ŷ = K y + ε`, and the
//! result is made coherent with the zone hierarchy. The crate also carries
//! the local and sequential baselines, scoring (MAE, RMAE, GA-RMAE,
//! Diebold–Mariano) and a rolling-origin experiment harness.

pub mod combine;
pub mod covariance;
pub mod error;
pub mod eval;
pub mod io;
pub mod naive;
pub mod series;

pub use error::{Error, Result};
