//! Loading of actuals, building metadata, row-id maps and submissions, and
//! alignment of predictions against actual readings.
//!
//! Cleaning rules: negative readings and negative predictions are removed
//! (not clamped), cells that do not parse drop their row and are counted,
//! and hours without an actual reading carry no residual pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::Serialize;

use crate::artifact::{self, line_of};
use crate::error::{Error, Result};
use crate::model::{BuildingId, BuildingRef, DayRange, MeterKind, SiteId};

/// An hourly timestamp (always on the hour).
pub type Hour = NaiveDateTime;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub const ACTUALS_HEADER: [&str; 4] = ["building_id", "meter", "timestamp", "meter_reading"];
pub const SUBMISSION_HEADER: [&str; 2] = ["row_id", "meter_reading"];
pub const ROW_MAP_HEADER: [&str; 4] = ["row_id", "building_id", "meter", "timestamp"];
pub const METADATA_COLUMNS: [&str; 3] = ["site_id", "building_id", "primary_use"];

/// Primary use recorded for buildings whose metadata leaves it blank.
pub const UNKNOWN_PRIMARY_USE: &str = "Unknown";

pub fn parse_hour(s: &str) -> Option<Hour> {
    let t = NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()?;
    (t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0).then_some(t)
}

pub fn format_hour(h: Hour) -> String {
    h.format(TIMESTAMP_FORMAT).to_string()
}

/// Row accounting for one input file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FileReport {
    pub rows: u64,
    pub retained: u64,
    /// Rows whose value cell was empty.
    pub missing: u64,
    pub unparseable: u64,
    pub negative_removed: u64,
    pub duplicates: u64,
    pub excluded: u64,
}

impl FileReport {
    /// Rows discarded by cleaning rules.
    pub fn removed(&self) -> u64 {
        self.unparseable + self.negative_removed + self.duplicates
    }
}

/// Per-file row counts for a whole ingest run, keyed by file label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub files: BTreeMap<String, FileReport>,
}

impl IngestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Building metadata keyed by building id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Buildings(BTreeMap<BuildingId, BuildingRef>);

impl Buildings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a building, returning the previous entry for the same id.
    pub fn insert(&mut self, building: BuildingRef) -> Option<BuildingRef> {
        self.0.insert(building.building_id, building)
    }

    pub fn get(&self, id: BuildingId) -> Option<&BuildingRef> {
        self.0.get(&id)
    }

    pub fn require(&self, id: BuildingId) -> Result<&BuildingRef> {
        self.get(id).ok_or(Error::MissingMetadata(id))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BuildingRef> {
        self.0.values()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&BuildingRef) -> bool) {
        self.0.retain(|_, b| keep(b));
    }
}

impl FromIterator<BuildingRef> for Buildings {
    fn from_iter<T: IntoIterator<Item = BuildingRef>>(iter: T) -> Self {
        let mut out = Buildings::new();
        for b in iter {
            out.insert(b);
        }
        out
    }
}

/// Hourly actual readings for one building meter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterSeries {
    pub building_id: BuildingId,
    pub kind: MeterKind,
    pub readings: BTreeMap<Hour, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Actuals {
    pub series: Vec<MeterSeries>,
    pub report: FileReport,
}

/// Building meters (and optionally whole sites) dropped from the analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    pairs: BTreeSet<(BuildingId, MeterKind)>,
    sites: BTreeSet<SiteId>,
    site_buildings: BTreeSet<BuildingId>,
}

impl ExclusionList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn exclude(&mut self, building: BuildingId, kind: MeterKind) {
        self.pairs.insert((building, kind));
    }

    /// Marks a site for exclusion. Takes effect for actuals once
    /// [`ExclusionList::resolve_sites`] has seen the metadata.
    pub fn exclude_site(&mut self, site: SiteId) {
        self.sites.insert(site);
    }

    pub fn resolve_sites(&mut self, buildings: &Buildings) {
        for b in buildings.iter() {
            if self.sites.contains(&b.site_id) {
                self.site_buildings.insert(b.building_id);
            }
        }
    }

    pub fn excludes(&self, building: BuildingId, kind: MeterKind) -> bool {
        self.site_buildings.contains(&building) || self.pairs.contains(&(building, kind))
    }

    pub fn excludes_site(&self, site: SiteId) -> bool {
        self.sites.contains(&site)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (BuildingId, MeterKind)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.sites.is_empty()
    }

    /// Reads `building_id,meter` pairs, one per line. Blank lines and lines
    /// starting with `#` are skipped, as is an optional header line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = ExclusionList::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i as u64 + 1;
            let (b, m) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(path, lineno, "expected `building_id,meter`"))?;
            if b.trim() == "building_id" {
                continue;
            }
            let building = b
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad building_id `{b}`")))?;
            let kind = m.trim().parse().map_err(|_| Error::UnknownMeter {
                path: path.to_path_buf(),
                line: lineno,
                code: m.trim().to_string(),
            })?;
            out.exclude(BuildingId(building), kind);
        }
        Ok(out)
    }
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != *b) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_meter(path: &Path, line: u64, field: &str) -> Result<MeterKind> {
    field
        .parse::<u8>()
        .ok()
        .and_then(MeterKind::from_code)
        .ok_or_else(|| Error::UnknownMeter {
            path: path.to_path_buf(),
            line,
            code: field.to_string(),
        })
}

fn parse_value(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads an actuals CSV (`building_id,meter,timestamp,meter_reading`).
pub fn load_actuals(path: &Path, exclusions: &ExclusionList) -> Result<Actuals> {
    let mut reader = artifact::open_input(path)?;
    let header = reader
        .headers()
        .map_err(|e| artifact::csv_error(path, e))?
        .clone();
    check_header(path, &header, &ACTUALS_HEADER)?;

    let mut report = FileReport::default();
    let mut series: BTreeMap<(MeterKind, BuildingId), BTreeMap<Hour, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        report.rows += 1;
        if record.len() != ACTUALS_HEADER.len() {
            report.unparseable += 1;
            continue;
        }
        let line = line_of(&record);
        let kind = parse_meter(path, line, &record[1])?;
        let (Ok(building), Some(hour)) = (record[0].parse::<u32>(), parse_hour(&record[2])) else {
            report.unparseable += 1;
            continue;
        };
        let building = BuildingId(building);
        if exclusions.excludes(building, kind) {
            report.excluded += 1;
            continue;
        }
        if record[3].is_empty() {
            report.missing += 1;
            continue;
        }
        let Some(value) = parse_value(&record[3]) else {
            report.unparseable += 1;
            continue;
        };
        if value < 0.0 {
            report.negative_removed += 1;
            continue;
        }
        match series.entry((kind, building)).or_default().entry(hour) {
            // the first reading for an hour wins
            std::collections::btree_map::Entry::Occupied(_) => report.duplicates += 1,
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(value);
                report.retained += 1;
            }
        }
    }

    let series = series
        .into_iter()
        .map(|((kind, building_id), readings)| MeterSeries {
            building_id,
            kind,
            readings,
        })
        .collect();
    Ok(Actuals { series, report })
}

/// Loads building metadata. Requires `site_id`, `building_id` and
/// `primary_use` columns in any order; other columns are ignored.
pub fn load_metadata(path: &Path) -> Result<Buildings> {
    let mut reader = artifact::open_input(path)?;
    let header = reader
        .headers()
        .map_err(|e| artifact::csv_error(path, e))?
        .clone();
    let column = |name: &str| header.iter().position(|h| h == name);
    let (Some(site_col), Some(building_col), Some(use_col)) = (
        column("site_id"),
        column("building_id"),
        column("primary_use"),
    ) else {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            expected: METADATA_COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    };

    let mut out = Buildings::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        let field = |i: usize| record.get(i).unwrap_or("");
        let site: u32 = field(site_col)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad site_id `{}`", field(site_col))))?;
        let building: u32 = field(building_col).parse().map_err(|_| {
            Error::parse(
                path,
                line,
                format!("bad building_id `{}`", field(building_col)),
            )
        })?;
        let primary_use = match field(use_col) {
            "" => UNKNOWN_PRIMARY_USE.to_string(),
            other => other.to_string(),
        };
        let building = BuildingRef::new(building, site, primary_use);
        let id = building.building_id;
        if out.insert(building).is_some() {
            return Err(Error::DuplicateBuilding {
                path: path.to_path_buf(),
                building: id,
            });
        }
    }
    Ok(out)
}

/// Identifies one predicted hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RowKey {
    pub building_id: BuildingId,
    pub kind: MeterKind,
    pub hour: Hour,
}

/// Resolves submission `row_id`s to building meter hours.
#[derive(Debug, Clone, Default)]
pub struct RowIdMap {
    rows: HashMap<u64, RowKey>,
}

impl RowIdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mapping. Fails if either the row id or the key is already
    /// mapped, which would break the one-to-one correspondence.
    pub fn insert(&mut self, row_id: u64, key: RowKey) -> std::result::Result<(), String> {
        if let Some(prev) = self.rows.get(&row_id) {
            return Err(format!("row_id {row_id} already maps to {prev:?}"));
        }
        self.rows.insert(row_id, key);
        Ok(())
    }

    pub fn get(&self, row_id: u64) -> Option<&RowKey> {
        self.rows.get(&row_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Loads a `row_id,building_id,meter,timestamp` file. Every row must
    /// parse: the map is an index, not data.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = artifact::open_input(path)?;
        let header = reader
            .headers()
            .map_err(|e| artifact::csv_error(path, e))?
            .clone();
        check_header(path, &header, &ROW_MAP_HEADER)?;
        let mut map = RowIdMap::new();
        let mut keys = BTreeSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| artifact::csv_error(path, e))?;
            let line = line_of(&record);
            if record.len() != ROW_MAP_HEADER.len() {
                return Err(Error::parse(path, line, "expected 4 fields"));
            }
            let row_id: u64 = record[0]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad row_id `{}`", &record[0])))?;
            let building: u32 = record[1].parse().map_err(|_| {
                Error::parse(path, line, format!("bad building_id `{}`", &record[1]))
            })?;
            let kind = parse_meter(path, line, &record[2])?;
            let hour = parse_hour(&record[3]).ok_or_else(|| {
                Error::parse(path, line, format!("bad timestamp `{}`", &record[3]))
            })?;
            let key = RowKey {
                building_id: BuildingId(building),
                kind,
                hour,
            };
            if !keys.insert(key) {
                return Err(Error::DuplicateRowId {
                    path: path.to_path_buf(),
                    line,
                    message: format!("{key:?} mapped twice"),
                });
            }
            map.insert(row_id, key)
                .map_err(|message| Error::DuplicateRowId {
                    path: path.to_path_buf(),
                    line,
                    message,
                })?;
        }
        Ok(map)
    }
}

/// One contestant's cleaned hourly predictions.
#[derive(Debug, Clone)]
pub struct SubmissionSet {
    pub submission_id: String,
    pub predictions: HashMap<RowKey, f64>,
    pub report: FileReport,
}

impl SubmissionSet {
    pub fn new(submission_id: impl Into<String>) -> Self {
        Self {
            submission_id: submission_id.into(),
            predictions: HashMap::new(),
            report: FileReport::default(),
        }
    }
}

/// Loads a `row_id,meter_reading` submission. The submission id is the file
/// stem.
pub fn load_submission(path: &Path, row_map: &RowIdMap) -> Result<SubmissionSet> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut set = SubmissionSet::new(id);
    let mut reader = artifact::open_input(path)?;
    let header = reader
        .headers()
        .map_err(|e| artifact::csv_error(path, e))?
        .clone();
    check_header(path, &header, &SUBMISSION_HEADER)?;

    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        set.report.rows += 1;
        let row_id: u64 = record.get(0).and_then(|f| f.parse().ok()).ok_or_else(|| {
            Error::parse(
                path,
                line,
                format!("bad row_id `{}`", record.get(0).unwrap_or("")),
            )
        })?;
        let key = *row_map.get(row_id).ok_or_else(|| Error::UnresolvedRowId {
            path: path.to_path_buf(),
            line,
            row_id,
        })?;
        let Some(value) = record
            .get(1)
            .filter(|_| record.len() == 2)
            .and_then(parse_value)
        else {
            set.report.unparseable += 1;
            continue;
        };
        if value < 0.0 {
            set.report.negative_removed += 1;
            continue;
        }
        if set.predictions.contains_key(&key) {
            set.report.duplicates += 1;
            continue;
        }
        set.predictions.insert(key, value);
        set.report.retained += 1;
    }
    Ok(set)
}

/// One hour of one building meter: the actual reading and the retained
/// prediction from each submission (in submission order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelCell {
    pub hour: Hour,
    pub actual: Option<f64>,
    pub predictions: Vec<Option<f64>>,
}

impl PanelCell {
    pub fn prediction_count(&self) -> usize {
        self.predictions.iter().flatten().count()
    }

    /// `(prediction, actual)` pairs; empty when the actual is missing.
    pub fn residual_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let actual = self.actual;
        self.predictions
            .iter()
            .filter_map(move |p| Some(((*p)?, actual?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedSeries {
    pub building_id: BuildingId,
    pub kind: MeterKind,
    /// One cell per hour of the period, in time order.
    pub cells: Vec<PanelCell>,
}

/// Actuals and predictions aligned hour by hour over an analysis period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedPanel {
    pub period: DayRange,
    pub submission_ids: Vec<String>,
    /// Sorted by meter kind, then building.
    pub series: Vec<AlignedSeries>,
}

impl AlignedPanel {
    pub fn cell_count(&self) -> usize {
        self.series.iter().map(|s| s.cells.len()).sum()
    }
}

pub fn period_hours(period: &DayRange) -> Vec<Hour> {
    period
        .days()
        .flat_map(|d| {
            (0..24).map(move |h| d.date().and_time(NaiveTime::from_hms_opt(h, 0, 0).unwrap()))
        })
        .collect()
}

/// Aligns every actual series with all submissions over `period`.
pub fn align(
    actuals: &[MeterSeries],
    submissions: &[SubmissionSet],
    period: DayRange,
) -> Result<AlignedPanel> {
    if submissions.is_empty() {
        return Err(Error::NoSubmissions);
    }
    let hours = period_hours(&period);
    let mut series: Vec<AlignedSeries> = actuals
        .iter()
        .map(|s| {
            let cells = hours
                .iter()
                .map(|&hour| {
                    let key = RowKey {
                        building_id: s.building_id,
                        kind: s.kind,
                        hour,
                    };
                    PanelCell {
                        hour,
                        actual: s.readings.get(&hour).copied(),
                        predictions: submissions
                            .iter()
                            .map(|sub| sub.predictions.get(&key).copied())
                            .collect(),
                    }
                })
                .collect();
            AlignedSeries {
                building_id: s.building_id,
                kind: s.kind,
                cells,
            }
        })
        .collect();
    series.sort_by_key(|s| (s.kind, s.building_id));
    Ok(AlignedPanel {
        period,
        submission_ids: submissions
            .iter()
            .map(|s| s.submission_id.clone())
            .collect(),
        series,
    })
}
