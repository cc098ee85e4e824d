//! File formats, experiment manifests, the results store and the command
//! line runner around `profit-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod features;
pub mod plot;
pub mod reference;
pub mod report;
pub mod runner;
pub mod store;
pub mod tsv;

pub use error::{Error, Result};
