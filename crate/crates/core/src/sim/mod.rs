//! Simulation of the achievability protocol and auditing of the converse.

pub mod audit;
pub mod code;
pub mod engine;
pub mod protocol;
