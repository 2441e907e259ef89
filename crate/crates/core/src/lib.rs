//! Scheduling toolkit for periodic task graphs on heterogeneous platforms
//! (CPU cores, a GPU, and DLA-style accelerators), plus a deterministic
//! discrete-event simulator for the policies that matter on such devices:
//! plain time-sharing, static real-time priorities, and just-in-time
//! priority adjustment.
//!
//! The crates layer roughly bottom-up:
//! dag/doc (task graphs and their on-disk form), heft (list scheduling),
//! sim (execution + reports), partition (layer-graph accelerator
//! placement), workload (driving-style app generator + calibration
//! profiles), instantiate (assignment enumeration + measured rescheduling),
//! experiment (staged pipelines and reports).

pub mod dag;
pub mod doc;
pub mod error;
pub mod experiment;
pub mod heft;
pub mod instantiate;
pub mod partition;
pub mod sim;
pub mod workload;

pub use dag::{Category, Dag, Edge, Platform, ProcKind, Processor, TaskNode};
pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
