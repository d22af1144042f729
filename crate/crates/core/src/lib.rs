pub mod algorithms;
pub mod equilibria;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod units;

pub use error::{Error, Result};
