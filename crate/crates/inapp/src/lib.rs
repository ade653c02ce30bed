//! File formats, IO and the command-line pipeline around `inapp-core`.
//!
//! * [`framelog`]: JSON-lines frame logs.
//! * [`featcsv`]: feature matrix CSV.
//! * [`artifact`]: model artifact JSON.
//! * [`config`]: TOML model configs and activity profiles.
//! * [`reports`]: CSV and text reports.
//! * [`cli`]: the `inapp` subcommands.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod error;
pub mod featcsv;
pub mod framelog;
pub mod fsio;
pub mod manifest;
pub mod reports;

pub use error::{Error, Result};
