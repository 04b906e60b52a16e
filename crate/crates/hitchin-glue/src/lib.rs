pub mod algebra;
pub mod cli;
pub mod corrector;
pub mod error;
pub mod fixtures;
pub mod gauge;
pub mod geometry;
pub mod linearized;
pub mod model;
pub mod pair;
pub mod poisson;
pub mod report;
pub mod rng;
pub mod studies;

pub use error::{Error, Result};
