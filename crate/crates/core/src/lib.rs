//! Banded step-size schedules for SGD, their convergence bounds, and a reproducible
//! multi-seed experiment harness for strongly convex problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod problems;
pub mod schedules;

pub use error::{Error, Result};
