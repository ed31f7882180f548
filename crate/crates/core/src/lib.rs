//! Semi-Markov phase-change environment, value-based agents and exact oracles.

pub mod env;
pub mod neural;
pub mod oracle;
pub mod agents;
pub mod harness;
pub mod config;
