//! Minimum-consumption discrimination of two qubit states.
//!
//! Copies of an unknown state, `ρ0` with prior `q` or `ρ1` otherwise, are
//! measured one (or two) at a time until the posterior error falls to `ε`.
//! [`solver`] finds the adaptive strategy with the fewest expected copies by
//! dynamic programming over the prior, using the exact optimal-measurement
//! search in [`povm`]. [`baselines`] holds the repeated fixed-measurement
//! strategies and asymptotic ratios, [`analytic`] the closed forms for pure
//! states, and [`simulator`] replays saved policies against sampled outcomes.
//! [`config`], [`io`] and [`export`] cover configuration files, binary policy
//! artifacts and CSV tables.

pub mod analytic;
pub mod baselines;
pub mod config;
pub mod error;
pub mod export;
pub mod grid;
pub mod io;
pub mod markov;
pub mod policy;
pub mod povm;
pub mod problem;
pub mod quantum;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
