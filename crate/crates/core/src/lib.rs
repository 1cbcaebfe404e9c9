//! Adaptive transmitter/receiver selection for direction-of-arrival
//! estimation with linear SIMO and TDM-MIMO arrays.
//!
//! Each step of the closed loop fits the particle posterior, evaluates for
//! every candidate channel subset the tightest conditional Bayesian bound
//! (Weiss-Weinstein, Bobrovsky-Zakaï surrogate or expected Cramér-Rao), picks
//! the minimiser, measures with it and updates the particle filter.

pub mod anneal;
pub mod array;
pub mod bounds;
pub mod config;
pub mod controller;
pub mod error;
pub mod particle;
pub mod report;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
