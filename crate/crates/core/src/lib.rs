//! Gaussian-transform distributional regression.
//!
//! A conditional distribution of `Y` given `X` is represented through
//! `e = b′T(X, Y)` with `T = W(X) ⊗ S(Y)`, chosen so that `e | X ~ N(0, 1)`.
//! The CDF, PDF and quantile functions all follow from `b`.

// `!(a > b)` comparisons are kept where they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod cli;
pub mod dictionary;
pub mod drf;
pub mod duality;
pub mod error;
pub mod inference;
mod linalg;
pub mod normal;
pub mod objective;
pub mod simulate;
pub mod solver;
