//! Registration-based space-time model reduction for parameterized 1D
//! hyperbolic conservation laws.
//!
//! The pipeline: a space-time DG solver produces snapshots, registration finds
//! parametric maps of the space-time rectangle that align their shocks, POD
//! compresses the mapped snapshots, RBF regression predicts map coefficients,
//! and a hyper-reduced minimum-residual ROM predicts the solution coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

pub mod baseline;
pub mod config;
pub mod dg;
pub mod error;
pub mod hf;
pub mod io;
pub mod linalg;
pub mod maps;
pub mod mesh;
pub mod models;
pub mod offline;
pub mod quadrature;
pub mod reference;
pub mod registration;
pub mod regression;
pub mod rom;
pub mod study;

pub use error::{Result, StrobeError};
