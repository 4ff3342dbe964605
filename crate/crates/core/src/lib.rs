//! Screening of building energy prediction residuals.
//!
//! Hourly predictions from a set of submissions are pooled into one daily
//! RMSLE per building meter, min-max scaled per meter kind, and every scored
//! building-day is classified by error magnitude, reach across its site and
//! temporal behaviour. The labels roll up into frequency and contribution
//! breakdowns and per-site heat maps.
//!
//! Runnable walkthroughs of each stage live in the crate's `examples/`
//! directory; the `residual-screen` binary drives the whole pipeline.

pub mod aggregate;
pub mod artifact;
pub mod classify;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use model::{
    AnalysisConfig, BuildingId, BuildingRef, DayIndex, DayRange, MeterKind, ReachFraction, SiteId,
};
