#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Adjoint-based shape optimization on dense kernels: shape
//! parameterizations, mesh deformation, fixed-point state and adjoint
//! solvers, Sobolev gradient smoothing, reduced Hessians, reduced SQP and
//! One Shot piggyback iterations.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod deform;
pub mod error;
pub mod geometry;
pub mod hessian;
pub mod linalg;
pub mod math;
pub mod model;
pub mod oneshot;
pub mod optim;
pub mod param;
pub mod qp;
pub mod sobolev;

pub use error::{Error, Result};
