//! Simulation and optimisation toolkit for solar-powered small cells whose
//! energy deficits are relieved by dispatching a fleet of UAV-mounted base
//! stations.
//!
//! Modules, bottom-up:
//! - [`scenario`]: configuration, stations, drones, solar and demand data
//! - [`radio`]: SINR, load, throughput and coverage
//! - [`cost`]: density functions, energy terms and the cost stack
//! - [`forecaster`]: an LSTM predicting each station's next-hour expenditure
//! - [`evolution`]: the genetic search over forecaster genomes and allocations
//! - [`sim`]: the hour-stepped world and the experiment sweeps

pub mod cost;
pub mod error;
pub mod evolution;
pub mod forecaster;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
