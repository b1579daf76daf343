//! File formats, configuration and the evaluation pipeline behind the
//! `edtweetlab` command-line tool.

pub mod archive;
pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod report;
pub mod run;
pub mod stages;
pub mod tables;

pub use error::{AppError, Result};
