//! Frequency and contribution breakdowns of labelled building-days.
//!
//! Frequency share is the fraction of scored building-days carrying a label;
//! contribution share is the fraction of the summed scaled RMSLE they carry.
//! Good-fit days count in both denominators.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::artifact::{self, fmt_f64};
use crate::classify::{Category, ErrorLabel, MagnitudeBand, MrLabel, TbLabel};
use crate::error::Result;
use crate::ingest::Buildings;
use crate::model::{BuildingId, MeterKind, SiteId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    SiteKind,
    Meter,
    PrimaryUse,
    Overall,
    /// TB types among in-range (A/B) days.
    OverallInRange,
    /// TB types among out-of-range (C/D) days.
    OverallOutOfRange,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::SiteKind => "site_kind",
            Grouping::Meter => "meter",
            Grouping::PrimaryUse => "primary_use",
            Grouping::Overall => "overall",
            Grouping::OverallInRange => "overall_in_range",
            Grouping::OverallOutOfRange => "overall_out_of_range",
        }
    }
}

/// Which labels a table's rows are keyed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelAxis {
    /// `GF`, `A`..`D`
    Mr,
    /// `T1`..`T4`, error days only
    Tb,
    /// `GF`, `A1`..`D4`
    Joint,
}

impl LabelAxis {
    pub fn labels(self) -> Vec<String> {
        match self {
            LabelAxis::Mr => MrLabel::ALL.iter().map(|m| m.code().to_string()).collect(),
            LabelAxis::Tb => TbLabel::ALL.iter().map(|t| t.code().to_string()).collect(),
            LabelAxis::Joint => Category::all().map(|c| c.code()).collect(),
        }
    }

    fn slot(self, label: &ErrorLabel) -> Option<usize> {
        match self {
            LabelAxis::Mr => MrLabel::ALL.iter().position(|&m| m == label.mr),
            LabelAxis::Tb => label.tb.map(|t| t.digit() as usize - 1),
            LabelAxis::Joint => Some(label.category().index()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub label: String,
    pub frequency_share: f64,
    pub contribution_share: f64,
    pub n_days: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownTable {
    pub grouping: Grouping,
    pub key: String,
    pub axis: LabelAxis,
    /// Every label of the axis, zero rows included.
    pub rows: Vec<BreakdownRow>,
    pub n_days: u64,
    pub n_buildings: u64,
    pub total_scaled: f64,
}

impl BreakdownTable {
    pub fn row(&self, label: &str) -> Option<&BreakdownRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn frequency(&self, label: &str) -> f64 {
        self.row(label).map_or(0.0, |r| r.frequency_share)
    }

    pub fn contribution(&self, label: &str) -> f64 {
        self.row(label).map_or(0.0, |r| r.contribution_share)
    }
}

/// Tabulates `labels` along `axis`. Days without a label on the axis (good
/// fit on the TB axis) are left out of that table's denominators. When the
/// summed scaled error is zero, contribution shares fall back to frequency
/// shares.
pub fn tabulate<'a>(
    grouping: Grouping,
    key: impl Into<String>,
    axis: LabelAxis,
    labels: impl IntoIterator<Item = &'a ErrorLabel>,
) -> BreakdownTable {
    let names = axis.labels();
    let mut counts = vec![0u64; names.len()];
    let mut sums = vec![0f64; names.len()];
    let mut buildings = BTreeSet::new();
    for l in labels {
        if let Some(i) = axis.slot(l) {
            counts[i] += 1;
            sums[i] += l.rmsle_scaled;
            buildings.insert(l.building.building_id);
        }
    }
    let n_days: u64 = counts.iter().sum();
    let total: f64 = sums.iter().sum();
    let rows = names
        .into_iter()
        .zip(counts.iter().zip(&sums))
        .map(|(label, (&n, &sum))| {
            let frequency_share = if n_days > 0 {
                n as f64 / n_days as f64
            } else {
                0.0
            };
            let contribution_share = if total > 0.0 {
                sum / total
            } else {
                frequency_share
            };
            BreakdownRow {
                label,
                frequency_share,
                contribution_share,
                n_days: n,
            }
        })
        .collect();
    BreakdownTable {
        grouping,
        key: key.into(),
        axis,
        rows,
        n_days,
        n_buildings: buildings.len() as u64,
        total_scaled: total,
    }
}

pub fn site_kind_key(site: SiteId, kind: MeterKind) -> String {
    format!("site{site}:{kind}")
}

/// Joint MR x TB shares for every (site, meter kind) with scored days,
/// ordered by site then kind.
pub fn breakdown_mr_tb(labels: &[ErrorLabel]) -> Vec<BreakdownTable> {
    let mut groups: BTreeMap<(SiteId, MeterKind), Vec<&ErrorLabel>> = BTreeMap::new();
    for l in labels {
        groups
            .entry((l.building.site_id, l.kind))
            .or_default()
            .push(l);
    }
    groups
        .into_iter()
        .map(|((site, kind), ls)| {
            tabulate(
                Grouping::SiteKind,
                site_kind_key(site, kind),
                LabelAxis::Joint,
                ls,
            )
        })
        .collect()
}

/// One table per meter kind (all four, empty kinds included) along `axis`.
pub fn breakdown_by_kind(labels: &[ErrorLabel], axis: LabelAxis) -> Vec<BreakdownTable> {
    MeterKind::ALL
        .iter()
        .map(|&kind| {
            tabulate(
                Grouping::Meter,
                kind.slug(),
                axis,
                labels.iter().filter(|l| l.kind == kind),
            )
        })
        .collect()
}

/// MR frequency and contribution shares per meter kind.
pub fn breakdown_meter(labels: &[ErrorLabel]) -> Vec<BreakdownTable> {
    breakdown_by_kind(labels, LabelAxis::Mr)
}

/// MR shares per building primary use, across all meter kinds. Primary use
/// is looked up in `buildings`.
pub fn breakdown_primary_use(
    labels: &[ErrorLabel],
    buildings: &Buildings,
) -> Result<Vec<BreakdownTable>> {
    let mut groups: BTreeMap<&str, Vec<&ErrorLabel>> = BTreeMap::new();
    for l in labels {
        let b = buildings.require(l.building.building_id)?;
        groups.entry(b.primary_use.as_str()).or_default().push(l);
    }
    Ok(groups
        .into_iter()
        .map(|(use_type, ls)| tabulate(Grouping::PrimaryUse, use_type, LabelAxis::Mr, ls))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverallBreakdown {
    pub mr: BreakdownTable,
    pub in_range_tb: BreakdownTable,
    pub out_of_range_tb: BreakdownTable,
}

impl OverallBreakdown {
    pub fn in_range_share(&self) -> f64 {
        self.mr.frequency("A") + self.mr.frequency("B")
    }

    pub fn out_of_range_share(&self) -> f64 {
        self.mr.frequency("C") + self.mr.frequency("D")
    }
}

pub fn breakdown_overall(labels: &[ErrorLabel]) -> OverallBreakdown {
    let of_band = |band| labels.iter().filter(move |l| l.band == band);
    OverallBreakdown {
        mr: tabulate(Grouping::Overall, "all", LabelAxis::Mr, labels),
        in_range_tb: tabulate(
            Grouping::OverallInRange,
            "all",
            LabelAxis::Tb,
            of_band(MagnitudeBand::InRange),
        ),
        out_of_range_tb: tabulate(
            Grouping::OverallOutOfRange,
            "all",
            LabelAxis::Tb,
            of_band(MagnitudeBand::OutOfRange),
        ),
    }
}

/// Every roll-up of one labelling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdowns {
    pub site_kind: Vec<BreakdownTable>,
    pub meter: Vec<BreakdownTable>,
    pub meter_joint: Vec<BreakdownTable>,
    pub primary_use: Vec<BreakdownTable>,
    pub overall: OverallBreakdown,
}

impl Breakdowns {
    pub fn compute(labels: &[ErrorLabel], buildings: &Buildings) -> Result<Self> {
        Ok(Self {
            site_kind: breakdown_mr_tb(labels),
            meter: breakdown_meter(labels),
            meter_joint: breakdown_by_kind(labels, LabelAxis::Joint),
            primary_use: breakdown_primary_use(labels, buildings)?,
            overall: breakdown_overall(labels),
        })
    }

    pub fn tables(&self) -> impl Iterator<Item = &BreakdownTable> {
        self.site_kind
            .iter()
            .chain(&self.meter)
            .chain(&self.primary_use)
            .chain([
                &self.overall.mr,
                &self.overall.in_range_tb,
                &self.overall.out_of_range_tb,
            ])
    }
}

pub const BREAKDOWNS_SCHEMA: &str = "breakdowns/v1";
pub const BREAKDOWN_HEADER: [&str; 7] = [
    "grouping",
    "key",
    "label",
    "frequency_share",
    "contribution_share",
    "n_days",
    "n_buildings",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatRow<'a> {
    pub grouping: &'static str,
    pub key: &'a str,
    pub label: &'a str,
    pub frequency_share: f64,
    pub contribution_share: f64,
    pub n_days: u64,
    pub n_buildings: u64,
}

pub fn flat_rows<'a>(tables: impl IntoIterator<Item = &'a BreakdownTable>) -> Vec<FlatRow<'a>> {
    tables
        .into_iter()
        .flat_map(|t| {
            t.rows.iter().map(move |r| FlatRow {
                grouping: t.grouping.as_str(),
                key: &t.key,
                label: &r.label,
                frequency_share: r.frequency_share,
                contribution_share: r.contribution_share,
                n_days: r.n_days,
                n_buildings: t.n_buildings,
            })
        })
        .collect()
}

pub fn breakdowns_csv<'a>(tables: impl IntoIterator<Item = &'a BreakdownTable>) -> String {
    artifact::csv_string(
        BREAKDOWNS_SCHEMA,
        &BREAKDOWN_HEADER,
        flat_rows(tables).into_iter().map(|r| {
            [
                r.grouping.to_string(),
                r.key.to_string(),
                r.label.to_string(),
                fmt_f64(r.frequency_share),
                fmt_f64(r.contribution_share),
                r.n_days.to_string(),
                r.n_buildings.to_string(),
            ]
        }),
    )
}

pub fn breakdowns_json<'a>(tables: impl IntoIterator<Item = &'a BreakdownTable>) -> String {
    serde_json::to_string_pretty(&flat_rows(tables)).expect("rows serialize") + "\n"
}

/// Distinct buildings per primary use among `labels`.
pub fn buildings_per_use(labels: &[ErrorLabel]) -> BTreeMap<String, usize> {
    let mut sets: BTreeMap<String, BTreeSet<BuildingId>> = BTreeMap::new();
    for l in labels {
        sets.entry(l.building.primary_use.clone())
            .or_default()
            .insert(l.building.building_id);
    }
    sets.into_iter().map(|(k, v)| (k, v.len())).collect()
}
