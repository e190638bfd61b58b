//! Host-side companion to [`urtu_core`]: file formats, parallel ensembles,
//! the comparison and sweep harness, and the `urtu` command-line tool.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod io;

pub use error::{Error, Result};
