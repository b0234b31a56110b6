//! Mobility metrics and Social Distancing Index (SDI) pipeline.
//!
//! Raw device pings flow through [`ingest`] (parsing and cleaning), [`mobility`]
//! (stays, home/work anchors, trips, stay-at-home days) and [`metrics`]
//! (population-weighted daily metrics per geography) before [`sdi`] scores each
//! geography-day against a pre-outbreak benchmark. [`cases`] joins the scores to
//! confirmed case counts for ranking reports, and [`synth`] generates synthetic
//! ping streams with exact ground truth for end-to-end verification.

pub mod cases;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod geodata;
pub mod ingest;
pub mod metrics;
pub mod mobility;
pub mod pipeline;
pub mod report;
pub mod sdi;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
pub use geodata::{GeoPoint, GeographyHierarchy, Level, Zone};
