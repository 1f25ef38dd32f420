//! File formats, run manifests, the parallel experiment runner and the
//! `synthanom` command line, on top of [`synthanom_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod manifest;
pub mod runner;

pub use error::{AppError, AppResult};
