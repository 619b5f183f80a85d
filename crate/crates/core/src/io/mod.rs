//! Run configurations, field snapshots and report files.

pub mod config;
pub mod report;
pub mod snapshot;

pub use config::{parse_config, ConfigErrors, ConfigIssue, RunConfig};
pub use report::{write_csv, write_json, Assertion, Manifest};
pub use snapshot::{export_snapshot, import_snapshot};
