//! Finite-dimensional laboratory for Chernoff-type product formulas whose
//! factors are iterated by a contraction on the operator algebra.
// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod product_formula;
pub mod semigroup;
pub mod superop;

pub use error::{Error, Result};
