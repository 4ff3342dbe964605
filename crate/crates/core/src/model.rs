//! Shared domain types: identifiers, meter kinds, calendar days and the
//! analysis thresholds.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The four metered utilities, with the numeric codes used by the
/// competition files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeterKind {
    Electricity,
    ChilledWater,
    Steam,
    HotWater,
}

impl MeterKind {
    pub const ALL: [MeterKind; 4] = [
        MeterKind::Electricity,
        MeterKind::ChilledWater,
        MeterKind::Steam,
        MeterKind::HotWater,
    ];

    pub fn code(self) -> u8 {
        match self {
            MeterKind::Electricity => 0,
            MeterKind::ChilledWater => 1,
            MeterKind::Steam => 2,
            MeterKind::HotWater => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Lower-case identifier used in file names and flags.
    pub fn slug(self) -> &'static str {
        match self {
            MeterKind::Electricity => "electricity",
            MeterKind::ChilledWater => "chilledwater",
            MeterKind::Steam => "steam",
            MeterKind::HotWater => "hotwater",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            MeterKind::Electricity => "Electricity",
            MeterKind::ChilledWater => "Chilled Water",
            MeterKind::Steam => "Steam",
            MeterKind::HotWater => "Hot Water",
        }
    }
}

impl fmt::Display for MeterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown meter kind `{0}`")]
pub struct UnknownMeterKind(pub String);

impl FromStr for MeterKind {
    type Err = UnknownMeterKind;

    /// Accepts the numeric codes `0`..`3` or the slugs.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        let kind = match t {
            "0" => Some(MeterKind::Electricity),
            "1" => Some(MeterKind::ChilledWater),
            "2" => Some(MeterKind::Steam),
            "3" => Some(MeterKind::HotWater),
            _ => MeterKind::ALL
                .into_iter()
                .find(|k| k.slug().eq_ignore_ascii_case(t)),
        };
        kind.ok_or_else(|| UnknownMeterKind(s.to_string()))
    }
}

impl Serialize for MeterKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.slug())
    }
}

impl<'de> Deserialize<'de> for MeterKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BuildingId(pub u32);

impl fmt::Display for BuildingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Building metadata carried through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BuildingRef {
    pub building_id: BuildingId,
    pub site_id: SiteId,
    pub primary_use: String,
}

impl BuildingRef {
    pub fn new(building_id: u32, site_id: u32, primary_use: impl Into<String>) -> Self {
        Self {
            building_id: BuildingId(building_id),
            site_id: SiteId(site_id),
            primary_use: primary_use.into(),
        }
    }
}

/// A calendar day. Timestamps are taken at face value; no time zone is
/// attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DayIndex(NaiveDate);

impl DayIndex {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(DayIndex)
    }

    pub fn date(self) -> NaiveDate {
        self.0
    }

    pub fn succ(self) -> Self {
        DayIndex(self.0.succ_opt().expect("date overflow"))
    }

    pub fn pred(self) -> Self {
        DayIndex(self.0.pred_opt().expect("date underflow"))
    }

    /// Whole days from `earlier` to `self` (negative if `self` is earlier).
    pub fn days_since(self, earlier: DayIndex) -> i64 {
        i64::from(self.0.num_days_from_ce()) - i64::from(earlier.0.num_days_from_ce())
    }

    pub fn add_days(self, days: i64) -> Self {
        let ce = i64::from(self.0.num_days_from_ce()) + days;
        let ce = i32::try_from(ce).expect("date overflow");
        DayIndex(NaiveDate::from_num_days_from_ce_opt(ce).expect("date overflow"))
    }
}

impl From<NaiveDate> for DayIndex {
    fn from(d: NaiveDate) -> Self {
        DayIndex(d)
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for DayIndex {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map(DayIndex)
    }
}

impl Serialize for DayIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DayIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An inclusive, non-empty range of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayRange {
    start: DayIndex,
    end: DayIndex,
}

impl DayRange {
    pub fn new(start: DayIndex, end: DayIndex) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> DayIndex {
        self.start
    }

    pub fn end(&self) -> DayIndex {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end.days_since(self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, day: DayIndex) -> bool {
        self.start <= day && day <= self.end
    }

    /// Zero-based position of `day` within the range.
    pub fn offset(&self, day: DayIndex) -> Option<usize> {
        self.contains(day)
            .then(|| day.days_since(self.start) as usize)
    }

    pub fn days(&self) -> impl Iterator<Item = DayIndex> + '_ {
        let start = self.start;
        (0..self.len() as i64).map(move |i| start.add_days(i))
    }
}

/// Every day from `start` to `end`, inclusive.
pub fn day_span(start: DayIndex, end: DayIndex) -> Result<Vec<DayIndex>> {
    Ok(DayRange::new(start, end)?.days().collect())
}

/// Share of a site's buildings that must be affected on the same day for an
/// error to count as multi-building. Held as an exact fraction so that the
/// comparison `affected / population >= fraction` never depends on float
/// rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReachFraction {
    numerator: u64,
    denominator: u64,
}

impl ReachFraction {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerator == 0 || numerator > denominator {
            return Err(Error::InvalidConfig(format!(
                "reach fraction must lie in (0, 1], got {numerator}/{denominator}"
            )));
        }
        let g = gcd(numerator, denominator);
        Ok(Self {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    /// `affected / population >= self`, in integer arithmetic.
    pub fn is_met(&self, affected: u64, population: u64) -> bool {
        u128::from(affected) * u128::from(self.denominator)
            >= u128::from(self.numerator) * u128::from(population)
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl Default for ReachFraction {
    fn default() -> Self {
        Self {
            numerator: 1,
            denominator: 3,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for ReachFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for ReachFraction {
    type Err = Error;

    /// Parses `n/d` or a plain decimal such as `0.33`; decimals are converted
    /// exactly (`0.33` becomes 33/100, not 1/3).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse reach fraction `{s}`"));
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return ReachFraction::new(n, d);
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let denominator = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let numerator = int
            .checked_mul(denominator)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        ReachFraction::new(numerator, denominator)
    }
}

impl Serialize for ReachFraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReachFraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(v) => v.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Thresholds for magnitude bands, reach and temporal behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Largest scaled RMSLE still counted as a good fit.
    pub good_fit_max: f64,
    /// Scaled RMSLE above which an error is out of range.
    pub out_of_range_min: f64,
    pub reach_fraction: ReachFraction,
    /// Sliding window length, in days, for the modulation test.
    pub window_days: u32,
    /// Minimum share of single-day errors in a window for it to modulate.
    pub short_term_fraction: f64,
    pub long_run_min_days: u32,
    pub medium_run_max_days: u32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            good_fit_max: 0.1,
            out_of_range_min: 0.3,
            reach_fraction: ReachFraction::default(),
            window_days: 30,
            short_term_fraction: 0.1,
            long_run_min_days: 4,
            medium_run_max_days: 3,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.good_fit_max > 0.0 && self.good_fit_max < self.out_of_range_min) {
            return fail(format!(
                "need 0 < good_fit_max < out_of_range_min, got {} and {}",
                self.good_fit_max, self.out_of_range_min
            ));
        }
        if !self.out_of_range_min.is_finite() {
            return fail("out_of_range_min must be finite".into());
        }
        if self.window_days < 1 {
            return fail("window_days must be at least 1".into());
        }
        if !(self.short_term_fraction > 0.0 && self.short_term_fraction <= 1.0) {
            return fail(format!(
                "short_term_fraction must lie in (0, 1], got {}",
                self.short_term_fraction
            ));
        }
        if self.medium_run_max_days < 1 {
            return fail("medium_run_max_days must be at least 1".into());
        }
        if self.long_run_min_days != self.medium_run_max_days + 1 {
            return fail(format!(
                "long_run_min_days ({}) must equal medium_run_max_days + 1 ({})",
                self.long_run_min_days,
                self.medium_run_max_days + 1
            ));
        }
        Ok(())
    }
}
