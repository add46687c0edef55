//! Ordinal subgame-perfect analysis of the simultaneous-report mechanism and
//! a deterministic mempool simulator for Solomonic settlement clauses.

pub mod agents;
pub mod chain_sim;
pub mod clause;
pub mod cli;
pub mod game_core;
pub mod rng;
pub mod scenario;
pub mod solomon;
pub mod sweep;
pub mod types;
