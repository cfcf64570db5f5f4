// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod coeffs;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linsolve;
pub mod model;
pub mod modified;
pub mod sav;

pub use error::{Error, Result};
