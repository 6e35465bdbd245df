// Parameter validation is written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod detector;
pub mod energy;
pub mod error;
pub mod evalbench;
pub mod filterbank;
pub mod imagecore;
pub mod matcher;
pub mod synthgen;

pub use error::{FilerError, Result};
