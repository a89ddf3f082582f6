//! Decentralized consensus optimization over undirected graphs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod denselin;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod netgraph;
pub mod objective;
pub mod solvers;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
