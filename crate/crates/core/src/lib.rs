//! Capacity regions of state-dependent semideterministic broadcast channels
//! with noncausal state information at the transmitter.

pub mod binary;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod outer;
pub mod prob;
pub mod region;
pub mod search;
pub mod sim;
pub mod specfile;
pub mod support;

pub use error::{Error, Result};
