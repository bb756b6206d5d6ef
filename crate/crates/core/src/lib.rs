#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod orbibundle;
pub mod pdegrid;
pub mod solver;
pub mod target;

pub use error::{Error, Result};
pub use target::{StabilizerOrder, TorusTarget, ValidationReport};
