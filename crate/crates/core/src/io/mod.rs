//! Configuration, snapshots and time series.

pub mod config;
pub mod series;
pub mod snapshot;

pub use config::{load_config, parse_config, RunConfig};
pub use snapshot::Snapshot;
