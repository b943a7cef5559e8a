//! Std companion of `locbal-core`: configuration, file formats, the
//! experiment runner and record-linkage IO behind the `locbal` binary.

pub mod cli;
pub mod clock;
pub mod config;
pub mod error;
pub mod generate;
pub mod io;
pub mod rl;
pub mod simulate;
pub mod targets;
pub mod verify;

pub use clock::MonotonicClock;
pub use config::{Config, ConfigSource};
pub use error::{CliError, CliResult};
