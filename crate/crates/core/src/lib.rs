//! Numerical toolkit for entropy-type functionals, convex conjugates on
//! grids, finite weighted composition operators and the conjugacy between
//! the composite functionals `λ̂` and `τ̂`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynsys;
pub mod entropy;
pub mod fenchel;
pub mod numeric;
pub mod series;
pub mod theorem;

pub use numeric::ExtReal;
