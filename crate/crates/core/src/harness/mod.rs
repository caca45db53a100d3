//! ε-sweep orchestration, rate fitting, reports and the command line.

pub mod cli;
pub mod config;
pub mod fit;
pub mod report;
pub mod study;
pub mod sweep;
