//! Homogenization of convex periodic Hamilton–Jacobi equations under sparse
//! bump perturbations: effective Hamiltonians, cell problems, weak KAM
//! diagnostics and random sparse environments.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cellpde;
pub mod error;
pub mod expcli;
pub mod hamiltonian;
pub mod homog1d;
pub mod interp;
pub mod quadrature;
pub mod randomfield;
pub mod rootfind;
pub mod weakkam;

pub use error::{Error, Result};
