//! Command-line front end: loads `.lss` system descriptions or built-in
//! scenarios, runs analyses, simulations and symmetry checks, and writes
//! deterministic JSON reports.

pub mod commands;
pub mod report;
pub mod scenarios;
pub mod spec;

pub use commands::{CliError, CliResult, Options, Outcome};
pub use spec::{Spec, SpecError};
