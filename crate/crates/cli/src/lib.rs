//! Configuration, I/O and command implementations behind the `chsim` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

pub use config::RunConfig;
pub use error::CliError;
