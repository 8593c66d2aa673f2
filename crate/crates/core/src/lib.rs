#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bse;
pub mod error;
pub mod linalg;
pub mod model;
pub mod output;
pub mod pipeline;
pub mod screen;
pub mod tei;

pub use error::{Error, Result};
