//! Simulation, evaluation harness and command-line plumbing on top of
//! `fieldmap-core`.

pub mod cli;
pub mod config;
pub mod harness;
pub mod io;
pub mod report;
