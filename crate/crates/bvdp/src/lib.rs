//! Configuration, persistence, sweeps and command-line front end for the
//! `bvdp-core` numerics.

pub mod config;
pub mod error;
pub mod ledger;
pub mod mesh_io;
pub mod runner;

pub use config::{Overrides, RunConfig};
pub use error::{Result, RunError};
pub use ledger::Status;
pub use runner::{check, run_single, run_sweep};
