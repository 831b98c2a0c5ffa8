//! Experiment drivers behind the `sie` binary.
//!
//! Each command module exposes a pure `compute` step and a `run` step that
//! writes the run directory, so tests can call either.

pub mod args;
pub mod benchmark;
pub mod config;
pub mod estimate;
pub mod optimize;
pub mod output;
pub mod simulate;
