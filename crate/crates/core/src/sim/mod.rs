//! Benchmark worlds, simulated sensing, receding-horizon execution and
//! metrics.

pub mod bench;
pub mod env;
pub mod mpc;
pub mod p2p;

pub use env::{Body, Environment};
pub use p2p::{PlanConfig, PlanOutcome, Planner};
