//! Command-line driver, output formats and parallel runners for
//! [`election_core`].

pub mod cache;
pub mod cli;
pub mod crossval;
pub mod executor;
pub mod grid;
pub mod table;
pub mod trace;
