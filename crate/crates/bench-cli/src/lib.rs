//! Experiment driver for the neighbor-discovery simulator: a deterministic
//! Monte Carlo engine, the experiment suite behind the `ndsim` command-line
//! tool, and the CSV/JSON output formats.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod table;
