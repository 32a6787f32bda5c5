//! Curve-driven volumetric muscle modelling on tetrahedral meshes.
//!
//! Muscle curves drawn between bones become soft constraints on smooth
//! per-tissue fields; the pointwise maximum of those fields segments the
//! volume, and a tetrahedralized maximization diagram turns the
//! segmentation into manifold per-tissue meshes. Per-muscle fiber fields and
//! a reference ray caster round out the engine.
//!
//! The crate is `no_std` with `alloc`; file formats, the CLI and the
//! session service live in the `myovox` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod anisotropy;
pub mod cholesky;
pub mod curves;
pub mod envelope;
pub mod error;
pub mod fibers;
pub mod geometry;
pub mod math;
pub mod render;
pub mod scenes;
pub mod solver;
pub mod sparse;
pub mod tetmesh;

pub use error::{Error, ErrorKind, Result};
pub use math::{Mat3, Vec3};
