//! Joint sampling-error reduction for independent multi-agent policy gradient.

pub mod behavior;
pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod policy;
pub mod ppo;

pub use error::{Error, Result};
