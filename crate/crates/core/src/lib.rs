#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod cache;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod ground_state;
pub mod kernel;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use params::ModelParams;
