//! Adam with decaying conditioner and step-size schedules, a suite of
//! certified test problems, and a harness that computes the auxiliary
//! sequences of the convergence analysis and checks its inequalities.

pub mod cli;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod instrumentation;
pub mod optimizer;
pub mod params;
pub mod problems;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use optimizer::{adam_init, adam_step, run_trajectory, sgd_step, AdamState, RunSpec, SgdState};
pub use params::{HyperParams, ScheduleRegion};
pub use problems::{Problem, ProblemCertificate, ProblemSpec};
