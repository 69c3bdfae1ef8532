//! Deterministic simulator of auction-based packet forwarding in a mobile
//! ad-hoc network of access points and handheld relays.

pub mod auction;
pub mod cli;
pub mod engine;
pub mod strategy;
pub mod topology;

/// Every random stream in the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;
