//! Multi-vector DDoS detection for a reactive SDN switch.

pub mod cli;
pub mod error;
pub mod features;
pub mod formats;
pub mod labels;
pub mod metrics;
pub mod pipeline;
pub mod sae;
pub mod scenarios;
pub mod switch;
pub mod tcfi;
pub mod traffic;
pub mod trafficgen;

pub use error::{Error, Result};
