//! Numerics for rate-independent damage coupled with perfect plasticity.
//!
//! The crate solves the ε-viscous evolution by staggered incremental
//! minimization, reparameterizes the resulting trajectories by
//! energy-dissipation arclength and evaluates the balanced-viscosity
//! diagnostics (contact potentials, two-point variations, partitions).
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration and
//! threading live in the `bvdp` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bv_diagnostics;
pub mod energetics;
pub mod error;
pub mod linalg;
pub mod material_laws;
pub mod reparam;
pub mod special;
pub mod tensor_mesh;
pub mod viscous_solver;

pub use error::{Error, Result};
