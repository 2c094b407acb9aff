// NaN-rejecting `!(a < b)` checks and index loops over parallel arrays are
// deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod cli;
pub mod driver;
pub mod error;
pub mod error_est;
pub mod jumpfun;
pub mod mesh;
pub mod nlp;
pub mod problems;
pub mod refine;
pub mod transcription;

pub use error::{Error, Result};
