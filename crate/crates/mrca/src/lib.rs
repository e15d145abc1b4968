//! File formats, checkpoints and the `mrca` command line around
//! [`mrca_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod plot;

pub use error::{CliError, Result};
