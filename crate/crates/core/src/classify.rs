//! Error taxonomy for scored building-days.
//!
//! Each day gets a magnitude band from its scaled RMSLE. Error days are then
//! labelled on two independent axes:
//!
//! * magnitude and reach (`A`..`D`): in-range or out-of-range, on a single
//!   building or on at least `reach_fraction` of the site's buildings that
//!   day;
//! * temporal behaviour (`T1`..`T4`): the length of the run of consecutive
//!   same-band error days containing the day, with short runs inside a
//!   fluctuating window relabelled as modulating (`T4`).
//!
//! The joint code (`A1` .. `D4`, plus `GF` for good fit) is a [`Category`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, fmt_f64, line_of};
use crate::error::{Error, Result};
use crate::ingest::Buildings;
use crate::metrics::DailyErrorRecord;
use crate::model::{
    AnalysisConfig, BuildingId, BuildingRef, DayIndex, DayRange, MeterKind, SiteId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MagnitudeBand {
    GoodFit,
    InRange,
    OutOfRange,
}

impl MagnitudeBand {
    /// Bands are `(-inf, good_fit_max]`, `(good_fit_max, out_of_range_min]`
    /// and `(out_of_range_min, inf)`.
    pub fn of(scaled: f64, cfg: &AnalysisConfig) -> Self {
        if scaled <= cfg.good_fit_max {
            MagnitudeBand::GoodFit
        } else if scaled <= cfg.out_of_range_min {
            MagnitudeBand::InRange
        } else {
            MagnitudeBand::OutOfRange
        }
    }

    pub fn is_error(self) -> bool {
        self != MagnitudeBand::GoodFit
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MagnitudeBand::GoodFit => "GoodFit",
            MagnitudeBand::InRange => "InRange",
            MagnitudeBand::OutOfRange => "OutOfRange",
        }
    }
}

impl FromStr for MagnitudeBand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            MagnitudeBand::GoodFit,
            MagnitudeBand::InRange,
            MagnitudeBand::OutOfRange,
        ]
        .into_iter()
        .find(|b| b.as_str() == s)
        .ok_or_else(|| format!("unknown band `{s}`"))
    }
}

pub fn band_of(record: &DailyErrorRecord, cfg: &AnalysisConfig) -> Result<MagnitudeBand> {
    Ok(MagnitudeBand::of(record.scaled()?, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reach {
    Single,
    Multiple,
}

/// Whether `affected` of a site's `population` buildings is enough for a
/// multi-building error: at least two buildings, and at least
/// `reach_fraction` of the site.
pub fn reach(affected: usize, population: usize, cfg: &AnalysisConfig) -> Result<Reach> {
    if population == 0 {
        return Err(Error::ZeroPopulation);
    }
    Ok(
        if affected >= 2
            && cfg
                .reach_fraction
                .is_met(affected as u64, population as u64)
        {
            Reach::Multiple
        } else {
            Reach::Single
        },
    )
}

/// Magnitude-and-reach label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MrLabel {
    GoodFit,
    /// In range, single building.
    A,
    /// In range, multiple buildings.
    B,
    /// Out of range, single building.
    C,
    /// Out of range, multiple buildings.
    D,
}

impl MrLabel {
    pub const ALL: [MrLabel; 5] = [
        MrLabel::GoodFit,
        MrLabel::A,
        MrLabel::B,
        MrLabel::C,
        MrLabel::D,
    ];
    pub const ERRORS: [MrLabel; 4] = [MrLabel::A, MrLabel::B, MrLabel::C, MrLabel::D];

    pub fn new(band: MagnitudeBand, reach: Reach) -> Self {
        match (band, reach) {
            (MagnitudeBand::GoodFit, _) => MrLabel::GoodFit,
            (MagnitudeBand::InRange, Reach::Single) => MrLabel::A,
            (MagnitudeBand::InRange, Reach::Multiple) => MrLabel::B,
            (MagnitudeBand::OutOfRange, Reach::Single) => MrLabel::C,
            (MagnitudeBand::OutOfRange, Reach::Multiple) => MrLabel::D,
        }
    }

    pub fn band(self) -> MagnitudeBand {
        match self {
            MrLabel::GoodFit => MagnitudeBand::GoodFit,
            MrLabel::A | MrLabel::B => MagnitudeBand::InRange,
            MrLabel::C | MrLabel::D => MagnitudeBand::OutOfRange,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            MrLabel::GoodFit => "GF",
            MrLabel::A => "A",
            MrLabel::B => "B",
            MrLabel::C => "C",
            MrLabel::D => "D",
        }
    }
}

impl FromStr for MrLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        MrLabel::ALL
            .into_iter()
            .find(|m| m.code() == s)
            .ok_or_else(|| format!("unknown MR label `{s}`"))
    }
}

/// Temporal-behaviour label of an error day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TbLabel {
    /// Long-term run.
    T1,
    /// Medium-term run.
    T2,
    /// Single-day error.
    T3,
    /// Short error inside a fluctuating window.
    T4,
}

impl TbLabel {
    pub const ALL: [TbLabel; 4] = [TbLabel::T1, TbLabel::T2, TbLabel::T3, TbLabel::T4];

    pub fn digit(self) -> u8 {
        match self {
            TbLabel::T1 => 1,
            TbLabel::T2 => 2,
            TbLabel::T3 => 3,
            TbLabel::T4 => 4,
        }
    }

    pub fn code(self) -> &'static str {
        ["T1", "T2", "T3", "T4"][self.digit() as usize - 1]
    }
}

impl FromStr for TbLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TbLabel::ALL
            .into_iter()
            .find(|t| t.code() == s)
            .ok_or_else(|| format!("unknown TB label `{s}`"))
    }
}

/// One of the 17 joint categories: good fit, or an MR error type combined
/// with a TB type (`A1` .. `D4`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Category(u8);

impl Category {
    pub const COUNT: usize = 17;
    pub const GOOD_FIT: Category = Category(0);

    pub fn all() -> impl Iterator<Item = Category> {
        (0..Self::COUNT as u8).map(Category)
    }

    /// `None` for inconsistent combinations (an error type without a TB
    /// label, or good fit with one).
    pub fn new(mr: MrLabel, tb: Option<TbLabel>) -> Option<Self> {
        let mr_index = MrLabel::ERRORS.iter().position(|&m| m == mr);
        match (mr_index, tb) {
            (None, None) => Some(Category::GOOD_FIT),
            (Some(i), Some(t)) => Some(Category(1 + 4 * i as u8 + (t.digit() - 1))),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn mr(self) -> MrLabel {
        if self.0 == 0 {
            MrLabel::GoodFit
        } else {
            MrLabel::ERRORS[(self.0 as usize - 1) / 4]
        }
    }

    pub fn tb(self) -> Option<TbLabel> {
        (self.0 > 0).then(|| TbLabel::ALL[(self.0 as usize - 1) % 4])
    }

    pub fn code(self) -> String {
        match self.tb() {
            None => "GF".to_string(),
            Some(t) => format!("{}{}", self.mr().code(), t.digit()),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Category::all()
            .find(|c| c.code() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// The full classification of one scored building-day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorLabel {
    pub building: BuildingRef,
    pub kind: MeterKind,
    pub day: DayIndex,
    pub rmsle_scaled: f64,
    pub band: MagnitudeBand,
    pub mr: MrLabel,
    pub tb: Option<TbLabel>,
    /// Length of the same-band error run containing the day; 0 on good-fit
    /// days.
    pub run_length_days: u32,
}

impl ErrorLabel {
    pub fn category(&self) -> Category {
        Category::new(self.mr, self.tb).expect("labels are consistent by construction")
    }

    fn sort_key(&self) -> (MeterKind, SiteId, BuildingId, DayIndex) {
        (
            self.kind,
            self.building.site_id,
            self.building.building_id,
            self.day,
        )
    }
}

type DayKey = (MeterKind, BuildingId, DayIndex);

/// Assigns magnitude-and-reach labels.
///
/// The site population for a meter kind is the number of distinct buildings
/// at the site with at least one record of that kind; reach is evaluated per
/// day and per band.
pub fn mr_labels(
    records: &[DailyErrorRecord],
    buildings: &Buildings,
    cfg: &AnalysisConfig,
) -> Result<BTreeMap<DayKey, MrLabel>> {
    let mut population: BTreeMap<(SiteId, MeterKind), BTreeSet<BuildingId>> = BTreeMap::new();
    let mut affected: BTreeMap<(SiteId, MeterKind, DayIndex, MagnitudeBand), usize> =
        BTreeMap::new();
    let mut banded = Vec::with_capacity(records.len());
    for r in records {
        let site = buildings.require(r.building.building_id)?.site_id;
        let band = band_of(r, cfg)?;
        population
            .entry((site, r.kind))
            .or_default()
            .insert(r.building.building_id);
        if band.is_error() {
            *affected.entry((site, r.kind, r.day, band)).or_default() += 1;
        }
        banded.push((r, site, band));
    }

    let mut out = BTreeMap::new();
    for (r, site, band) in banded {
        let label = if band.is_error() {
            let n = affected[&(site, r.kind, r.day, band)];
            MrLabel::new(band, reach(n, population[&(site, r.kind)].len(), cfg)?)
        } else {
            MrLabel::GoodFit
        };
        out.insert((r.kind, r.building.building_id, r.day), label);
    }
    Ok(out)
}

/// A maximal run of consecutive error days sharing one band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub band: MagnitudeBand,
    pub start: DayIndex,
    pub length: u32,
}

/// Splits a day-by-day band sequence starting at `first_day` into error
/// runs. `None` (no data) and good-fit days separate runs, as does a change
/// of band.
pub fn runs(first_day: DayIndex, bands: &[Option<MagnitudeBand>]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    let mut open = false;
    for (i, band) in bands.iter().enumerate() {
        match band {
            Some(b) if b.is_error() => match out.last_mut() {
                Some(run) if open && run.band == *b => run.length += 1,
                _ => {
                    out.push(Run {
                        band: *b,
                        start: first_day.add_days(i as i64),
                        length: 1,
                    });
                    open = true;
                }
            },
            _ => open = false,
        }
    }
    out
}

/// TB label implied by run length alone.
pub fn tb_from_run(length: u32, cfg: &AnalysisConfig) -> TbLabel {
    if length >= cfg.long_run_min_days {
        TbLabel::T1
    } else if length >= 2 {
        TbLabel::T2
    } else {
        TbLabel::T3
    }
}

/// Initial TB assignment of one error day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunDay {
    pub run_length: u32,
    pub tb: TbLabel,
}

/// Relabels short errors in fluctuating windows as modulating.
///
/// `days` covers the analysis period day by day and holds the error days of
/// one building meter and one band. For every window of `window_days`
/// consecutive days (the whole period if it is shorter), with `E` the error
/// days in the window and `S` those from single-day runs: if `|E| >= 2` and
/// `|S| / |E| >= short_term_fraction`, every day of `E` whose run is at most
/// `medium_run_max_days` long becomes `T4`.
pub fn modulation_pass(days: &mut [Option<RunDay>], cfg: &AnalysisConfig) {
    let n = days.len();
    if n == 0 {
        return;
    }
    let width = (cfg.window_days as usize).min(n);
    let mut errors = vec![0usize; n + 1];
    let mut singles = vec![0usize; n + 1];
    for (i, d) in days.iter().enumerate() {
        errors[i + 1] = errors[i] + d.is_some() as usize;
        singles[i + 1] = singles[i] + d.is_some_and(|d| d.run_length == 1) as usize;
    }

    // coverage[i] > 0 once day i lies in at least one fluctuating window
    let mut coverage = vec![0i64; n + 1];
    for start in 0..=(n - width) {
        let end = start + width;
        let e = errors[end] - errors[start];
        let s = singles[end] - singles[start];
        if e >= 2 && s as f64 / e as f64 >= cfg.short_term_fraction {
            coverage[start] += 1;
            coverage[end] -= 1;
        }
    }
    let mut depth = 0;
    for (i, slot) in days.iter_mut().enumerate() {
        depth += coverage[i];
        if let Some(d) = slot {
            if depth > 0 && d.run_length <= cfg.medium_run_max_days {
                d.tb = TbLabel::T4;
            }
        }
    }
}

/// Temporal labels for one building meter over the period, indexed by day
/// offset.
fn temporal_labels(
    bands: &[Option<MagnitudeBand>],
    period: &DayRange,
    cfg: &AnalysisConfig,
) -> Vec<Option<RunDay>> {
    let mut labels: Vec<Option<RunDay>> = vec![None; bands.len()];
    for run in runs(period.start(), bands) {
        let first = period.offset(run.start).expect("run inside period");
        let tb = tb_from_run(run.length, cfg);
        for slot in &mut labels[first..first + run.length as usize] {
            *slot = Some(RunDay {
                run_length: run.length,
                tb,
            });
        }
    }
    for band in [MagnitudeBand::InRange, MagnitudeBand::OutOfRange] {
        let mut of_band: Vec<Option<RunDay>> = labels
            .iter()
            .zip(bands)
            .map(|(l, b)| l.filter(|_| *b == Some(band)))
            .collect();
        modulation_pass(&mut of_band, cfg);
        for (slot, relabelled) in labels.iter_mut().zip(of_band) {
            if relabelled.is_some() {
                *slot = relabelled;
            }
        }
    }
    labels
}

/// Labels every record. Runs and modulation windows are laid out over
/// `period`; days without a record count as non-error days.
///
/// Output is sorted by (meter kind, site, building, day) and does not
/// depend on the input order.
pub fn classify_all(
    records: &[DailyErrorRecord],
    buildings: &Buildings,
    cfg: &AnalysisConfig,
    period: &DayRange,
) -> Result<Vec<ErrorLabel>> {
    cfg.validate()?;
    let n_days = period.len();
    let mut grids: BTreeMap<(MeterKind, BuildingId), Vec<Option<&DailyErrorRecord>>> =
        BTreeMap::new();
    for r in records {
        let id = r.building.building_id;
        buildings.require(id)?;
        let offset = period.offset(r.day).ok_or(Error::OutsidePeriod {
            building: id,
            day: r.day,
        })?;
        r.scaled()?;
        let grid = grids
            .entry((r.kind, id))
            .or_insert_with(|| vec![None; n_days]);
        if grid[offset].replace(r).is_some() {
            return Err(Error::DuplicateRecord {
                building: id,
                kind: r.kind,
                day: r.day,
            });
        }
    }

    let mr = mr_labels(records, buildings, cfg)?;

    let grids: Vec<_> = grids.into_iter().collect();
    let mut labels: Vec<ErrorLabel> = grids
        .par_iter()
        .flat_map_iter(|((kind, id), grid)| {
            let bands: Vec<Option<MagnitudeBand>> = grid
                .iter()
                .map(|r| r.map(|r| MagnitudeBand::of(r.rmsle_scaled.unwrap(), cfg)))
                .collect();
            let temporal = temporal_labels(&bands, period, cfg);
            let building = buildings.get(*id).expect("checked above");
            let mr = &mr;
            grid.iter()
                .zip(bands)
                .zip(temporal)
                .filter_map(move |((r, band), t)| {
                    let r = (*r)?;
                    let band = band?;
                    Some(ErrorLabel {
                        building: building.clone(),
                        kind: *kind,
                        day: r.day,
                        rmsle_scaled: r.rmsle_scaled.unwrap(),
                        band,
                        mr: mr[&(*kind, *id, r.day)],
                        tb: t.map(|t| t.tb),
                        run_length_days: t.map_or(0, |t| t.run_length),
                    })
                })
        })
        .collect();
    labels.sort_by_key(|l| l.sort_key());
    Ok(labels)
}

pub const LABELS_SCHEMA: &str = "labels/v1";
pub const LABELS_HEADER: [&str; 9] = [
    "building_id",
    "site_id",
    "meter",
    "date",
    "rmsle_scaled",
    "band",
    "mr",
    "tb",
    "run_length",
];

/// Serializes labels sorted by (meter, site, building, date).
pub fn labels_csv(labels: &[ErrorLabel]) -> String {
    let mut sorted: Vec<&ErrorLabel> = labels.iter().collect();
    sorted.sort_by_key(|l| l.sort_key());
    artifact::csv_string(
        LABELS_SCHEMA,
        &LABELS_HEADER,
        sorted.into_iter().map(|l| {
            [
                l.building.building_id.to_string(),
                l.building.site_id.to_string(),
                l.kind.code().to_string(),
                l.day.to_string(),
                fmt_f64(l.rmsle_scaled),
                l.band.as_str().to_string(),
                l.mr.code().to_string(),
                l.tb.map_or("None", TbLabel::code).to_string(),
                l.run_length_days.to_string(),
            ]
        }),
    )
}

pub fn read_labels(path: &Path, buildings: &Buildings) -> Result<Vec<ErrorLabel>> {
    let mut reader = artifact::open_csv(path, LABELS_SCHEMA, &LABELS_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        let bad = |what: &str| Error::parse(path, line, format!("bad {what}"));
        let id = BuildingId(record[0].parse().map_err(|_| bad("building_id"))?);
        let site = SiteId(record[1].parse().map_err(|_| bad("site_id"))?);
        let building = buildings.require(id)?.clone();
        if building.site_id != site {
            return Err(bad("site_id"));
        }
        let kind = record[2]
            .parse::<u8>()
            .ok()
            .and_then(MeterKind::from_code)
            .ok_or_else(|| bad("meter"))?;
        let tb = match &record[7] {
            "None" => None,
            s => Some(s.parse().map_err(|_| bad("tb"))?),
        };
        let label = ErrorLabel {
            building,
            kind,
            day: record[3].parse().map_err(|_| bad("date"))?,
            rmsle_scaled: record[4].parse().map_err(|_| bad("rmsle_scaled"))?,
            band: record[5].parse().map_err(|_| bad("band"))?,
            mr: record[6].parse().map_err(|_| bad("mr"))?,
            tb,
            run_length_days: record[8].parse().map_err(|_| bad("run_length"))?,
        };
        if Category::new(label.mr, label.tb).is_none() || label.mr.band() != label.band {
            return Err(bad("label combination"));
        }
        out.push(label);
    }
    Ok(out)
}
