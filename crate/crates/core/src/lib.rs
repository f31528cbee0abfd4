//! Desk-scale verification of the constructive steps behind derivative
//! growth bounds for nilpotent and abelian actions on the interval: weighted
//! lattice walks, box sequences and good-segment chains, exact interval
//! realizations of unipotent groups, and 1-D derivative growth checks.

// Index loops mirror the formulas; `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod boxes;
pub mod concat;
pub mod error;
pub mod lattice;
pub mod nilpotent;
pub mod num;
pub mod smooth;
pub mod walks;

pub use error::{CoreError, Result};
