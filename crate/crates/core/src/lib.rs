//! Singular stochastic control of diffusions constrained to polyhedral cones.
//!
//! The crate covers cone geometry and the standing assumptions, the
//! reflection map along a fixed interior direction, cost functionals, Monte
//! Carlo simulation of controlled paths, a monotone finite-difference solver
//! for the constrained HJB variational inequality, and the reduction of a
//! Brownian control problem to its workload formulation.

pub mod cone;
pub mod cost;
pub mod error;
pub mod hjb;
pub mod linalg;
pub mod path;
pub mod problem;
pub mod simulator;
pub mod skorohod;
pub mod workload;

pub use cone::{ConeSpec, ConeVectors};
pub use cost::{ControlPath, PushCost, RunningCost};
pub use error::{Error, Result};
pub use path::PathRCLL;
pub use problem::{ProblemSpec, ValidationReport};
