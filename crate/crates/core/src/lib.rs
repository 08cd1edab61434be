pub mod adversary;
pub mod curiosity;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod planning;
pub mod rng;

pub use error::{Error, Result};
