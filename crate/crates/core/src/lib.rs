//! Composable diffusion sampling.

pub mod bench;
pub mod cli;
pub mod compose;
pub mod error;
pub mod models;
pub mod oracles;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod trajectory;

pub use error::{Error, Result};
