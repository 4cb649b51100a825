//! Certified attractor approximation for affine iterated function systems.
//!
//! The crate is split along the lines of the computation:
//!
//! - [`geometry`]: point clouds, Hausdorff distances and deterministic decimation.
//! - [`ifs`]: affine contractions, the Hutchinson set map and certified attractors.
//! - [`connectivity`]: sound tri-state connectivity verdicts and algebraic witnesses.
//! - [`operators`]: dense operator toolkit (Jacobi eigensolver, spectral projections,
//!   polar factors) and the two norm-certified contraction constructions.
//! - [`sw_family`]: the two-map family `(Sx, Tx + w)`, its witnesses, exceptional
//!   subspaces and parameter sweeps.
//! - [`io`]: CSV readers and writers shared by the command-line front end.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connectivity;
pub mod error;
pub mod geometry;
pub mod ifs;
pub mod io;
pub mod operators;
pub mod sw_family;

mod kdtree;

pub use error::{Error, Result};
