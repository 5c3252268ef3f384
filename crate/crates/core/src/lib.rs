//! Qudit statevector simulation with classical and variational quantum
//! classifiers for next-day stock direction.

pub mod bench;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod gates;
pub mod market;
pub mod metrics;
pub mod mlp;
pub mod state;
pub mod train;
pub mod vqc;

pub use error::{Error, Result};
pub use state::QuditRegister;
