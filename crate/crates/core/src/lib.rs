// `!(x < y)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod examples;
pub mod factorization;
pub mod laurent;
pub mod linalg;
pub mod modelspace;
pub mod operators;
pub mod params;
pub mod verify;
