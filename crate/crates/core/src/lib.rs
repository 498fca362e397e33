//! Rigorous numerics for cone conditions, invariant manifolds and a
//! computer-assisted homoclinic proof in the planar circular restricted
//! three-body problem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cones;
pub mod error;
pub mod flow;
pub mod interval;
pub mod linalg;
pub mod manifold;
pub mod prover;
pub mod rtbp;

pub use error::{Error, Result};
pub use interval::{IBox, IMatrix, IVector, Interval};
