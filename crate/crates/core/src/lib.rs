//! RPL simulation with sink-side detection of rank attacks.

pub mod detector;
pub mod mac;
pub mod model;
pub mod rpl;
pub mod wire;
pub mod adversary;
pub mod metrics;
pub mod overhead;
pub mod sim;
pub mod sweep;
