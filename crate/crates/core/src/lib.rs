//! Invasion speeds of two-species, strongly competitive travelling waves.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod frontsim;
pub mod halfline;
pub mod limit;
pub mod numerics;
pub mod sweep;
pub mod wave;

pub use error::{Error, Result};
