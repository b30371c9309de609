//! Front end for `repump-core`: the `repump` command line, configuration
//! files, CSV/JSON export and a multi-threaded trajectory driver.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod parallel;
pub mod report;
pub mod sweep;
pub mod validate;

pub use error::{LabError, Result};
