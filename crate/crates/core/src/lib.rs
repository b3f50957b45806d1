//! Quantum data center network simulator and orchestrator.
//!
//! Builds switch- and server-centric QDC topologies, models ebit generation
//! protocols, compiles circuits onto QPUs and racks, schedules remote gates
//! into switching rounds and times them by Monte Carlo.

pub mod circuit;
pub mod compiler;
pub mod error;
pub mod protocols;
pub mod rng;
pub mod scheduler;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
