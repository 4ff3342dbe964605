//! Daily RMSLE scoring, per-meter-kind min-max scaling and quartile
//! statistics of the scaled errors.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, fmt_f64, line_of};
use crate::error::{Error, Result};
use crate::ingest::{AlignedPanel, AlignedSeries, Buildings};
use crate::model::{BuildingId, BuildingRef, DayIndex, MeterKind, SiteId};

/// Root mean squared logarithmic error with the natural log:
/// `sqrt(mean((ln(1 + p) - ln(1 + a))^2))` over `(prediction, actual)` pairs.
pub fn rmsle(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut acc = LogErrorSum::default();
    for &(p, a) in pairs {
        check_input("prediction", p)?;
        check_input("actual", a)?;
        acc.push(p, a);
    }
    acc.rmsle().ok_or(Error::UndefinedMetric)
}

fn check_input(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidValue { what, value })
    }
}

/// Running sum of squared log residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogErrorSum {
    sum_sq: f64,
    count: u64,
}

impl LogErrorSum {
    #[inline]
    pub fn push(&mut self, prediction: f64, actual: f64) {
        self.push_logs(prediction.ln_1p(), actual.ln_1p());
    }

    /// Adds a pair already transformed by `ln(1 + x)`.
    #[inline]
    pub fn push_logs(&mut self, log_prediction: f64, log_actual: f64) {
        let d = log_prediction - log_actual;
        self.sum_sq += d * d;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &LogErrorSum) {
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn rmsle(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq / self.count as f64).sqrt())
    }
}

/// How the residuals of several submissions are combined into one daily
/// value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    /// All pairs of all submissions and hours enter a single RMSLE.
    #[default]
    Pooled,
    /// Mean of the per-submission daily RMSLEs.
    MeanOfSubmissions,
}

/// Daily error of one building meter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyErrorRecord {
    pub building: BuildingRef,
    pub kind: MeterKind,
    pub day: DayIndex,
    pub rmsle: f64,
    pub rmsle_scaled: Option<f64>,
    /// Number of `(prediction, actual)` pairs behind `rmsle`.
    pub pair_count: u64,
}

impl DailyErrorRecord {
    pub fn scaled(&self) -> Result<f64> {
        self.rmsle_scaled.ok_or(Error::Unscaled {
            building: self.building.building_id,
            kind: self.kind,
            day: self.day,
        })
    }

    fn sort_key(&self) -> (MeterKind, BuildingId, DayIndex) {
        (self.kind, self.building.building_id, self.day)
    }
}

/// Scores one aligned series. Days without a single residual pair produce
/// no record.
pub fn score_series(
    series: &AlignedSeries,
    building: &BuildingRef,
    mode: PoolingMode,
) -> Vec<DailyErrorRecord> {
    let mut out = Vec::new();
    let n_submissions = series.cells.first().map_or(0, |c| c.predictions.len());
    let mut per_submission = vec![LogErrorSum::default(); n_submissions];

    let mut start = 0;
    while start < series.cells.len() {
        let date = series.cells[start].hour.date();
        let end = series.cells[start..]
            .iter()
            .position(|c| c.hour.date() != date)
            .map_or(series.cells.len(), |i| start + i);

        let mut pooled = LogErrorSum::default();
        per_submission
            .iter_mut()
            .for_each(|s| *s = LogErrorSum::default());
        for cell in &series.cells[start..end] {
            let Some(actual) = cell.actual else { continue };
            let log_actual = actual.ln_1p();
            for (j, p) in cell.predictions.iter().enumerate() {
                if let Some(p) = *p {
                    let lp = p.ln_1p();
                    pooled.push_logs(lp, log_actual);
                    if mode == PoolingMode::MeanOfSubmissions {
                        per_submission[j].push_logs(lp, log_actual);
                    }
                }
            }
        }

        let value = match mode {
            PoolingMode::Pooled => pooled.rmsle(),
            PoolingMode::MeanOfSubmissions => {
                let scores: Vec<f64> = per_submission.iter().filter_map(|s| s.rmsle()).collect();
                (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
            }
        };
        if let Some(rmsle) = value {
            out.push(DailyErrorRecord {
                building: building.clone(),
                kind: series.kind,
                day: DayIndex::from(date),
                rmsle,
                rmsle_scaled: None,
                pair_count: pooled.count(),
            });
        }
        start = end;
    }
    out
}

/// Scores a whole panel, one record per building meter and day with at
/// least one residual pair. Series are scored in parallel; the output order
/// (meter kind, building, day) does not depend on scheduling.
pub fn daily_errors(
    panel: &AlignedPanel,
    buildings: &Buildings,
    mode: PoolingMode,
) -> Result<Vec<DailyErrorRecord>> {
    if panel.series.is_empty() {
        return Err(Error::InsufficientData {
            what: "aligned panel series".into(),
            needed: 1,
            found: 0,
        });
    }
    let refs = panel
        .series
        .iter()
        .map(|s| buildings.require(s.building_id))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<DailyErrorRecord> = panel
        .series
        .par_iter()
        .zip(refs.par_iter())
        .flat_map_iter(|(s, b)| score_series(s, b, mode))
        .collect();
    records.sort_by_key(|r| r.sort_key());
    Ok(records)
}

/// Min-max range of raw RMSLE for one meter kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: MeterKind,
    pub min_value: f64,
    pub max_value: f64,
}

impl ScalerParams {
    /// A scaler whose fit set held a single distinct value; it maps
    /// everything to 0.
    pub fn is_degenerate(&self) -> bool {
        self.max_value <= self.min_value
    }

    pub fn scale(&self, rmsle: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        ((rmsle - self.min_value) / (self.max_value - self.min_value)).clamp(0.0, 1.0)
    }
}

pub fn fit_scaler(records: &[DailyErrorRecord], kind: MeterKind) -> Result<ScalerParams> {
    let mut values = records.iter().filter(|r| r.kind == kind).map(|r| r.rmsle);
    let first = values.next();
    let (mut min, mut max, mut n) = (
        first.unwrap_or(0.0),
        first.unwrap_or(0.0),
        first.is_some() as usize,
    );
    for v in values {
        min = min.min(v);
        max = max.max(v);
        n += 1;
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            what: format!("{kind} scaler fit"),
            needed: 2,
            found: n,
        });
    }
    let params = ScalerParams {
        kind,
        min_value: min,
        max_value: max,
    };
    if params.is_degenerate() {
        log::warn!("all {n} {kind} daily RMSLE values equal {min}; scaled values set to 0");
    }
    Ok(params)
}

pub fn apply_scaler(record: &DailyErrorRecord, params: &ScalerParams) -> Result<DailyErrorRecord> {
    if record.kind != params.kind {
        return Err(Error::KindMismatch {
            expected: params.kind,
            found: record.kind,
        });
    }
    Ok(DailyErrorRecord {
        rmsle_scaled: Some(params.scale(record.rmsle)),
        ..record.clone()
    })
}

/// Fits one scaler per meter kind present and scales every record in place.
/// Returned parameters are ordered by meter kind.
pub fn scale_records(records: &mut [DailyErrorRecord]) -> Result<Vec<ScalerParams>> {
    let mut kinds: Vec<MeterKind> = records.iter().map(|r| r.kind).collect();
    kinds.sort();
    kinds.dedup();
    let params = kinds
        .into_iter()
        .map(|k| fit_scaler(records, k))
        .collect::<Result<Vec<_>>>()?;
    for r in records.iter_mut() {
        let p = params
            .iter()
            .find(|p| p.kind == r.kind)
            .expect("fitted above");
        r.rmsle_scaled = Some(p.scale(r.rmsle));
    }
    Ok(params)
}

/// Sample quantile definitions. All interpolate linearly between order
/// statistics; they differ in where quantile `q` sits among the `n` sorted
/// values (zero-based position `h`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// `h = (n - 1) q`
    #[default]
    Linear,
    /// `h = n q - 1/2`
    Hazen,
    /// `h = (n + 1) q - 1`
    Weibull,
}

impl QuantileRule {
    /// Quantile of already sorted, non-empty data.
    pub fn quantile(self, sorted: &[f64], q: f64) -> f64 {
        let n = sorted.len();
        assert!(n > 0, "quantile of empty data");
        let nf = n as f64;
        let h = match self {
            QuantileRule::Linear => (nf - 1.0) * q,
            QuantileRule::Hazen => nf * q - 0.5,
            QuantileRule::Weibull => (nf + 1.0) * q - 1.0,
        }
        .clamp(0.0, nf - 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub kind: MeterKind,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iqr: f64,
    /// `q3 + 1.5 * iqr`
    pub upper_fence: f64,
}

/// Quartiles of the scaled daily errors of one meter kind.
pub fn quartiles(
    records: &[DailyErrorRecord],
    kind: MeterKind,
    rule: QuantileRule,
) -> Result<QuartileSummary> {
    let mut values = records
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| r.scaled())
        .collect::<Result<Vec<f64>>>()?;
    if values.len() < 4 {
        return Err(Error::InsufficientData {
            what: format!("{kind} quartiles"),
            needed: 4,
            found: values.len(),
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(summary_of_sorted(kind, &values, rule))
}

fn summary_of_sorted(kind: MeterKind, sorted: &[f64], rule: QuantileRule) -> QuartileSummary {
    let q1 = rule.quantile(sorted, 0.25);
    let q2 = rule.quantile(sorted, 0.5);
    let q3 = rule.quantile(sorted, 0.75);
    let iqr = q3 - q1;
    QuartileSummary {
        kind,
        q1,
        q2,
        q3,
        iqr,
        upper_fence: q3 + 1.5 * iqr,
    }
}

pub const DAILY_ERRORS_SCHEMA: &str = "daily_errors/v1";
pub const DAILY_ERRORS_HEADER: [&str; 7] = [
    "building_id",
    "site_id",
    "meter",
    "date",
    "rmsle",
    "rmsle_scaled",
    "pair_count",
];

/// Serializes records sorted by (meter, building, date).
pub fn daily_errors_csv(records: &[DailyErrorRecord]) -> String {
    let mut sorted: Vec<&DailyErrorRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    artifact::csv_string(
        DAILY_ERRORS_SCHEMA,
        &DAILY_ERRORS_HEADER,
        sorted.into_iter().map(|r| {
            [
                r.building.building_id.to_string(),
                r.building.site_id.to_string(),
                r.kind.code().to_string(),
                r.day.to_string(),
                fmt_f64(r.rmsle),
                r.rmsle_scaled.map(fmt_f64).unwrap_or_default(),
                r.pair_count.to_string(),
            ]
        }),
    )
}

/// Reads a daily-error store. Primary use comes from `buildings`.
pub fn read_daily_errors(path: &Path, buildings: &Buildings) -> Result<Vec<DailyErrorRecord>> {
    let mut reader = artifact::open_csv(path, DAILY_ERRORS_SCHEMA, &DAILY_ERRORS_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        let bad = |what: &str| Error::parse(path, line, format!("bad {what}"));
        let building = BuildingId(record[0].parse().map_err(|_| bad("building_id"))?);
        let site = SiteId(record[1].parse().map_err(|_| bad("site_id"))?);
        let kind = record[2]
            .parse::<u8>()
            .ok()
            .and_then(MeterKind::from_code)
            .ok_or_else(|| bad("meter"))?;
        let day = record[3].parse().map_err(|_| bad("date"))?;
        let rmsle = record[4].parse().map_err(|_| bad("rmsle"))?;
        let rmsle_scaled = match &record[5] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("rmsle_scaled"))?),
        };
        let pair_count = record[6].parse().map_err(|_| bad("pair_count"))?;
        let building = buildings.require(building)?.clone();
        if building.site_id != site {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "building {} is at site {}, not {site}",
                    building.building_id, building.site_id
                ),
            ));
        }
        out.push(DailyErrorRecord {
            building,
            kind,
            day,
            rmsle,
            rmsle_scaled,
            pair_count,
        });
    }
    Ok(out)
}

/// Scaler fits and quartiles, keyed by meter kind, as recorded in the run
/// manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub scalers: BTreeMap<MeterKind, ScalerParams>,
    pub quartiles: BTreeMap<MeterKind, QuartileSummary>,
}
