//! Second-order sensitivities of optimal investment on finite event trees.

// `!(a > b)` rejects NaN on purpose; index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod atlas;
pub mod battery;
pub mod error;
pub mod market;
pub mod numerics;
pub mod primal_dual;
pub mod report;
pub mod scalar;
pub mod sensitivity;
pub mod utility;

pub use error::{Error, Result};
