use std::path::PathBuf;

use crate::model::{BuildingId, DayIndex, MeterKind, SiteId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid day range: {start} is after {end}")]
    InvalidRange { start: DayIndex, end: DayIndex },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: malformed header: expected columns `{expected}`, found `{found}`", path.display())]
    MalformedHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{}: line {line}: unknown meter code `{code}`", path.display())]
    UnknownMeter {
        path: PathBuf,
        line: u64,
        code: String,
    },

    #[error("{}: line {line}: row_id {row_id} is not in the row-id map", path.display())]
    UnresolvedRowId {
        path: PathBuf,
        line: u64,
        row_id: u64,
    },

    #[error("{}: duplicate building_id {building}", path.display())]
    DuplicateBuilding { path: PathBuf, building: BuildingId },

    #[error("{}: line {line}: duplicate row-id map entry ({message})", path.display())]
    DuplicateRowId {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("alignment requires at least one submission")]
    NoSubmissions,

    #[error("RMSLE is undefined for an empty set of pairs")]
    UndefinedMetric,

    #[error("invalid value {value} in {what}: inputs must be finite and non-negative")]
    InvalidValue { what: &'static str, value: f64 },

    #[error("{what}: need at least {needed} values, found {found}")]
    InsufficientData {
        what: String,
        needed: usize,
        found: usize,
    },

    #[error("scaler fitted for {expected} cannot be applied to a {found} record")]
    KindMismatch {
        expected: MeterKind,
        found: MeterKind,
    },

    #[error("record for building {building} ({kind}, {day}) has no scaled RMSLE")]
    Unscaled {
        building: BuildingId,
        kind: MeterKind,
        day: DayIndex,
    },

    #[error("building {0} is missing from the building metadata")]
    MissingMetadata(BuildingId),

    #[error("duplicate record for building {building} ({kind}, {day})")]
    DuplicateRecord {
        building: BuildingId,
        kind: MeterKind,
        day: DayIndex,
    },

    #[error("site population must be at least 1")]
    ZeroPopulation,

    #[error("record for building {building} on {day} is outside the analysis period")]
    OutsidePeriod { building: BuildingId, day: DayIndex },

    #[error("no {kind} buildings at site {site}")]
    UnknownHeatmapTarget { site: SiteId, kind: MeterKind },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{}: artifact schema mismatch: expected `{expected}`, found `{found}`", path.display())]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status for this error: 2 for usage or configuration
    /// problems, 1 for everything found in the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidRange { .. } => 2,
            _ => 1,
        }
    }
}
