//! File formats, trainer processes, experiment runs and result rendering on
//! top of `mtlforge-core`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest_file;
pub mod runlog;
pub mod trainer;
pub mod wire;

pub use config::{Config, Hyperparameters};
pub use error::{Error, Result};
pub mod run;
pub mod plot;
pub mod table;
