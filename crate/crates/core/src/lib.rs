#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod harness;
pub mod io;
pub mod torus;

pub use error::{Error, Result};
