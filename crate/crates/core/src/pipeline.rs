//! End-to-end runs and the per-stage artifact contract.
//!
//! Stages communicate only through files in the output directory:
//!
//! | stage       | reads                                   | writes |
//! |-------------|-----------------------------------------|--------|
//! | `ingest`    | raw inputs                              | `panel.csv`, `buildings.csv`, `ingest_report.json` |
//! | `score`     | `panel.csv`, `buildings.csv`            | `daily_errors.csv`, `scores.json` |
//! | `classify`  | `daily_errors.csv`, `buildings.csv`     | `labels.csv` |
//! | `aggregate` | `labels.csv`, `buildings.csv`           | `breakdowns.csv`, `breakdowns.json` |
//! | `render`    | `labels.csv`, `buildings.csv`, `scores.json` | `heatmaps/`, `summary.txt`, `summary.csv` |
//!
//! Every stage also updates `manifest.json` with the digests of what it read
//! and wrote. Paths never enter the manifest, so identical inputs give an
//! identical bundle wherever it is written.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{breakdowns_csv, breakdowns_json, Breakdowns};
use crate::artifact::{self, fmt_f64, line_of};
use crate::classify::{classify_all, labels_csv, read_labels};
use crate::error::{Error, Result};
use crate::ingest::{
    align, format_hour, load_actuals, load_metadata, load_submission, parse_hour, AlignedPanel,
    AlignedSeries, Buildings, ExclusionList, IngestReport, PanelCell, RowIdMap,
};
use crate::metrics::{
    daily_errors, daily_errors_csv, quartiles, read_daily_errors, scale_records, PoolingMode,
    QuantileRule, ScoreSummary,
};
use crate::model::{
    AnalysisConfig, BuildingId, BuildingRef, DayIndex, DayRange, MeterKind, SiteId,
};
use crate::report::{
    build_heatmap, heatmap_csv, heatmap_targets, render_heatmap, render_legend, render_summary,
    HeatmapStyle,
};

pub const PANEL_CSV: &str = "panel.csv";
pub const BUILDINGS_CSV: &str = "buildings.csv";
pub const INGEST_REPORT_JSON: &str = "ingest_report.json";
pub const DAILY_ERRORS_CSV: &str = "daily_errors.csv";
pub const SCORES_JSON: &str = "scores.json";
pub const LABELS_CSV: &str = "labels.csv";
pub const BREAKDOWNS_CSV: &str = "breakdowns.csv";
pub const BREAKDOWNS_JSON: &str = "breakdowns.json";
pub const HEATMAP_DIR: &str = "heatmaps";
pub const LEGEND_SVG: &str = "legend.svg";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment fallback for the worker-thread cap.
pub const THREADS_ENV: &str = "RESIDUAL_SCREEN_THREADS";

/// Configuration of one run, read from JSON. Relative paths are resolved
/// against the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub actuals: PathBuf,
    pub metadata: PathBuf,
    /// Submission files, in order.
    #[serde(default)]
    pub submissions: Vec<PathBuf>,
    /// Every `*.csv` in this directory, by file name, after `submissions`.
    #[serde(default)]
    pub submissions_dir: Option<PathBuf>,
    pub row_map: PathBuf,
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
    #[serde(default)]
    pub exclude_sites: Vec<u32>,
    pub period_start: DayIndex,
    pub period_end: DayIndex,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub pooling: PoolingMode,
    #[serde(default)]
    pub quantile_rule: QuantileRule,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_relative(base);
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.actuals);
        fix(&mut self.metadata);
        fix(&mut self.row_map);
        fix(&mut self.output_dir);
        self.submissions.iter_mut().for_each(fix);
        if let Some(p) = &mut self.submissions_dir {
            fix(p);
        }
        if let Some(p) = &mut self.exclusions {
            fix(p);
        }
    }

    pub fn period(&self) -> Result<DayRange> {
        DayRange::new(self.period_start, self.period_end)
    }

    /// Checks the settings every stage depends on.
    pub fn validate(&self) -> Result<()> {
        self.period()?;
        self.analysis.validate()
    }

    /// Checks that every raw input exists, on top of [`RunConfig::validate`].
    pub fn validate_inputs(&self) -> Result<()> {
        self.validate()?;
        let mut required = vec![&self.actuals, &self.metadata, &self.row_map];
        required.extend(&self.submissions);
        required.extend(&self.exclusions);
        for p in required {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some(d) = &self.submissions_dir {
            if !d.is_dir() {
                return Err(Error::InvalidConfig(format!(
                    "submissions directory {} does not exist",
                    d.display()
                )));
            }
        }
        if self.submission_paths()?.is_empty() {
            return Err(Error::NoSubmissions);
        }
        Ok(())
    }

    pub fn submission_paths(&self) -> Result<Vec<PathBuf>> {
        let mut out = self.submissions.clone();
        if let Some(dir) = &self.submissions_dir {
            let mut found = Vec::new();
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let p = entry.map_err(|e| Error::io(dir, e))?.path();
                if p.is_file() && p.extension().is_some_and(|x| x == "csv") {
                    found.push(p);
                }
            }
            found.sort();
            out.extend(found);
        }
        Ok(out)
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            period_start: self.period_start,
            period_end: self.period_end,
            analysis: self.analysis,
            pooling: self.pooling,
            quantile_rule: self.quantile_rule,
            exclude_sites: self.exclude_sites.iter().copied().collect(),
        }
    }
}

/// The path-free part of a [`RunConfig`] that determines results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub period_start: DayIndex,
    pub period_end: DayIndex,
    pub analysis: AnalysisConfig,
    pub pooling: PoolingMode,
    pub quantile_rule: QuantileRule,
    pub exclude_sites: BTreeSet<u32>,
}

impl ConfigEcho {
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub sha256: String,
    pub stage: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ConfigEcho,
    /// Input digests by label (`actuals`, `metadata`, `row_map`,
    /// `exclusions`, `submission:<id>`).
    pub inputs: BTreeMap<String, String>,
    pub submission_ids: Vec<String>,
    pub scores: Option<ScoreSummary>,
    /// Warnings by stage.
    pub warnings: BTreeMap<String, Vec<String>>,
    /// Output digests by path relative to the output directory.
    pub outputs: BTreeMap<String, OutputEntry>,
}

impl Manifest {
    fn new(echo: ConfigEcho) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            config_hash: echo.hash(),
            config: echo,
            inputs: BTreeMap::new(),
            submission_ids: Vec::new(),
            scores: None,
            warnings: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Writes artifacts of one stage and keeps the manifest in step.
struct StageWriter<'a> {
    out: &'a Path,
    stage: &'static str,
    manifest: Manifest,
    warnings: Vec<String>,
}

impl<'a> StageWriter<'a> {
    fn open(out: &'a Path, stage: &'static str, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let path = out.join(MANIFEST_JSON);
        let echo = cfg.echo();
        let mut manifest = if path.exists() {
            Manifest::load(&path)?
        } else {
            Manifest::new(echo.clone())
        };
        manifest.tool = TOOL_NAME.into();
        manifest.tool_version = TOOL_VERSION.into();
        manifest.config_hash = echo.hash();
        manifest.config = echo;
        manifest.outputs.retain(|_, e| e.stage != stage);
        Ok(Self {
            out,
            stage,
            manifest,
            warnings: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.insert(
            name.to_string(),
            OutputEntry {
                sha256: sha256_hex(bytes),
                stage: self.stage.into(),
                config_hash: self.manifest.config_hash.clone(),
            },
        );
        Ok(())
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    fn finish(mut self) -> Result<Manifest> {
        if self.warnings.is_empty() {
            self.manifest.warnings.remove(self.stage);
        } else {
            self.manifest
                .warnings
                .insert(self.stage.into(), self.warnings);
        }
        let path = self.out.join(MANIFEST_JSON);
        fs::write(&path, self.manifest.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub const BUILDINGS_SCHEMA: &str = "buildings/v1";
pub const BUILDINGS_HEADER: [&str; 3] = ["building_id", "site_id", "primary_use"];

pub fn buildings_csv(buildings: &Buildings) -> String {
    artifact::csv_string(
        BUILDINGS_SCHEMA,
        &BUILDINGS_HEADER,
        buildings.iter().map(|b| {
            [
                b.building_id.to_string(),
                b.site_id.to_string(),
                b.primary_use.clone(),
            ]
        }),
    )
}

pub fn read_buildings(path: &Path) -> Result<Buildings> {
    let mut reader = artifact::open_csv(path, BUILDINGS_SCHEMA, &BUILDINGS_HEADER)?;
    let mut out = Buildings::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        let id: u32 = record[0]
            .parse()
            .map_err(|_| Error::parse(path, line, "bad building_id"))?;
        let site: u32 = record[1]
            .parse()
            .map_err(|_| Error::parse(path, line, "bad site_id"))?;
        if out.insert(BuildingRef::new(id, site, &record[2])).is_some() {
            return Err(Error::DuplicateBuilding {
                path: path.to_path_buf(),
                building: BuildingId(id),
            });
        }
    }
    Ok(out)
}

pub const PANEL_SCHEMA: &str = "panel/v1";
pub const PANEL_HEADER: [&str; 4] = ["building_id", "meter", "timestamp", "actual"];

/// One row per series and hour; one prediction column per submission, named
/// by submission id.
pub fn write_panel(path: &Path, panel: &AlignedPanel) -> Result<()> {
    let mut header: Vec<&str> = PANEL_HEADER.to_vec();
    header.extend(panel.submission_ids.iter().map(String::as_str));
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let out = std::io::BufWriter::with_capacity(1 << 16, file);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows = panel.series.iter().flat_map(|s| {
        s.cells.iter().map(move |c| {
            let mut row = Vec::with_capacity(4 + c.predictions.len());
            row.push(s.building_id.to_string());
            row.push(s.kind.code().to_string());
            row.push(format_hour(c.hour));
            row.push(opt(c.actual));
            row.extend(c.predictions.iter().map(|&p| opt(p)));
            row
        })
    });
    artifact::write_csv(out, PANEL_SCHEMA, &header, rows).map_err(|e| Error::io(path, e))
}

pub fn read_panel(path: &Path, period: DayRange) -> Result<AlignedPanel> {
    let mut reader = artifact::open_csv(path, PANEL_SCHEMA, &PANEL_HEADER)?;
    let header = reader
        .headers()
        .map_err(|e| artifact::csv_error(path, e))?
        .clone();
    let submission_ids: Vec<String> = header
        .iter()
        .skip(PANEL_HEADER.len())
        .map(String::from)
        .collect();
    let mut series: Vec<AlignedSeries> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| artifact::csv_error(path, e))?;
        let line = line_of(&record);
        let bad = |what: &str| Error::parse(path, line, format!("bad {what}"));
        let building = BuildingId(record[0].parse().map_err(|_| bad("building_id"))?);
        let kind = record[1]
            .parse::<u8>()
            .ok()
            .and_then(MeterKind::from_code)
            .ok_or_else(|| bad("meter"))?;
        let hour = parse_hour(&record[2]).ok_or_else(|| bad("timestamp"))?;
        let num = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        let actual = num(&record[3], "actual")?;
        let predictions = (PANEL_HEADER.len()..record.len())
            .map(|i| num(&record[i], "prediction"))
            .collect::<Result<Vec<_>>>()?;
        if predictions.len() != submission_ids.len() {
            return Err(bad("prediction count"));
        }
        let cell = PanelCell {
            hour,
            actual,
            predictions,
        };
        match series.last_mut() {
            Some(s) if s.building_id == building && s.kind == kind => s.cells.push(cell),
            _ => series.push(AlignedSeries {
                building_id: building,
                kind,
                cells: vec![cell],
            }),
        }
    }
    Ok(AlignedPanel {
        period,
        submission_ids,
        series,
    })
}

/// Loads and cleans the raw inputs and writes the aligned panel.
pub fn ingest_stage(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate_inputs()?;
    let period = cfg.period()?;
    let out = cfg.output_dir.as_path();
    let mut w = StageWriter::open(out, "ingest", cfg)?;

    let buildings = load_metadata(&cfg.metadata)?;
    let mut exclusions = match &cfg.exclusions {
        Some(p) => ExclusionList::load(p)?,
        None => ExclusionList::new(),
    };
    for &s in &cfg.exclude_sites {
        exclusions.exclude_site(SiteId(s));
    }
    exclusions.resolve_sites(&buildings);

    let paths = cfg.submission_paths()?;
    let mut inputs = BTreeMap::new();
    inputs.insert("actuals".to_string(), digest_file(&cfg.actuals)?);
    inputs.insert("metadata".to_string(), digest_file(&cfg.metadata)?);
    inputs.insert("row_map".to_string(), digest_file(&cfg.row_map)?);
    if let Some(p) = &cfg.exclusions {
        inputs.insert("exclusions".to_string(), digest_file(p)?);
    }

    let actuals = load_actuals(&cfg.actuals, &exclusions)?;
    let row_map = RowIdMap::load(&cfg.row_map)?;
    let submissions = paths
        .par_iter()
        .map(|p| load_submission(p, &row_map))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for (s, p) in submissions.iter().zip(&paths) {
        if !seen.insert(s.submission_id.clone()) {
            return Err(Error::InvalidConfig(format!(
                "submission id `{}` of {} is used twice",
                s.submission_id,
                p.display()
            )));
        }
        inputs.insert(format!("submission:{}", s.submission_id), digest_file(p)?);
    }

    let mut report = IngestReport::default();
    report
        .files
        .insert("actuals".into(), actuals.report.clone());
    for s in &submissions {
        report
            .files
            .insert(format!("submission:{}", s.submission_id), s.report.clone());
        if s.report.removed() > 0 {
            w.warn(format!(
                "submission {}: {} of {} rows removed",
                s.submission_id,
                s.report.removed(),
                s.report.rows
            ));
        }
    }
    if actuals.report.removed() > 0 {
        w.warn(format!(
            "actuals: {} of {} rows removed",
            actuals.report.removed(),
            actuals.report.rows
        ));
    }

    let panel = align(&actuals.series, &submissions, period)?;
    let panel_path = out.join(PANEL_CSV);
    write_panel(&panel_path, &panel)?;
    let digest = digest_file(&panel_path)?;
    w.manifest.outputs.insert(
        PANEL_CSV.into(),
        OutputEntry {
            sha256: digest,
            stage: "ingest".into(),
            config_hash: w.manifest.config_hash.clone(),
        },
    );
    w.write(BUILDINGS_CSV, buildings_csv(&buildings).as_bytes())?;
    w.write(INGEST_REPORT_JSON, report.to_json().as_bytes())?;
    w.manifest.inputs = inputs;
    w.manifest.submission_ids = panel.submission_ids.clone();
    w.finish()
}

/// Daily RMSLE per building meter, scaled per kind, plus quartiles.
pub fn score_stage(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    let buildings = read_buildings(&out.join(BUILDINGS_CSV))?;
    let panel = read_panel(&out.join(PANEL_CSV), cfg.period()?)?;
    let mut w = StageWriter::open(out, "score", cfg)?;

    let mut records = daily_errors(&panel, &buildings, cfg.pooling)?;
    if records.is_empty() {
        return Err(Error::InsufficientData {
            what: "scored building-days in the period".into(),
            needed: 1,
            found: 0,
        });
    }
    let scalers = scale_records(&mut records)?;
    let mut summary = ScoreSummary::default();
    for s in scalers {
        if s.is_degenerate() {
            w.warn(format!(
                "{} scaler is degenerate (min = max = {})",
                s.kind, s.min_value
            ));
        }
        summary.scalers.insert(s.kind, s);
        match quartiles(&records, s.kind, cfg.quantile_rule) {
            Ok(q) => {
                summary.quartiles.insert(s.kind, q);
            }
            Err(Error::InsufficientData { found, .. }) => {
                w.warn(format!(
                    "{}: {found} scored days are too few for quartiles",
                    s.kind
                ));
            }
            Err(e) => return Err(e),
        }
    }
    w.write(DAILY_ERRORS_CSV, daily_errors_csv(&records).as_bytes())?;
    w.write(
        SCORES_JSON,
        (serde_json::to_string_pretty(&summary).expect("scores serialize") + "\n").as_bytes(),
    )?;
    w.manifest.scores = Some(summary);
    w.finish()
}

pub fn classify_stage(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    let buildings = read_buildings(&out.join(BUILDINGS_CSV))?;
    let records = read_daily_errors(&out.join(DAILY_ERRORS_CSV), &buildings)?;
    let mut w = StageWriter::open(out, "classify", cfg)?;
    let labels = classify_all(&records, &buildings, &cfg.analysis, &cfg.period()?)?;
    w.write(LABELS_CSV, labels_csv(&labels).as_bytes())?;
    w.finish()
}

pub fn aggregate_stage(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    let buildings = read_buildings(&out.join(BUILDINGS_CSV))?;
    let labels = read_labels(&out.join(LABELS_CSV), &buildings)?;
    let mut w = StageWriter::open(out, "aggregate", cfg)?;
    let b = Breakdowns::compute(&labels, &buildings)?;
    w.write(BREAKDOWNS_CSV, breakdowns_csv(b.tables()).as_bytes())?;
    w.write(BREAKDOWNS_JSON, breakdowns_json(b.tables()).as_bytes())?;
    w.finish()
}

/// Heat maps for every (site, kind) with labels, and the summary report.
/// Without labels only the legend is drawn.
pub fn render_stage(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let period = cfg.period()?;
    let out = cfg.output_dir.as_path();
    let buildings = read_buildings(&out.join(BUILDINGS_CSV))?;
    let labels = read_labels(&out.join(LABELS_CSV), &buildings)?;
    let scores_path = out.join(SCORES_JSON);
    let scores: ScoreSummary = if scores_path.exists() {
        let text = fs::read_to_string(&scores_path).map_err(|e| Error::io(&scores_path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: scores_path.clone(),
            source,
        })?
    } else {
        ScoreSummary::default()
    };
    let mut w = StageWriter::open(out, "render", cfg)?;
    let style = HeatmapStyle::default();

    let heatmap_dir = out.join(HEATMAP_DIR);
    if heatmap_dir.exists() {
        fs::remove_dir_all(&heatmap_dir).map_err(|e| Error::io(&heatmap_dir, e))?;
    }
    let rendered = heatmap_targets(&labels)
        .into_par_iter()
        .map(|(site, kind)| {
            let m = build_heatmap(&labels, site, kind, &period)?;
            Ok((m.file_stem(), heatmap_csv(&m), render_heatmap(&m, &style)))
        })
        .collect::<Result<Vec<_>>>()?;
    for (stem, csv, svg) in rendered {
        w.write(&format!("{HEATMAP_DIR}/{stem}.csv"), csv.as_bytes())?;
        w.write(&format!("{HEATMAP_DIR}/{stem}.svg"), svg.as_bytes())?;
    }
    w.write(
        &format!("{HEATMAP_DIR}/{LEGEND_SVG}"),
        render_legend(&style).as_bytes(),
    )?;

    let b = Breakdowns::compute(&labels, &buildings)?;
    let summary = render_summary(&b, &cfg.analysis, &scores);
    w.write(SUMMARY_TXT, summary.text.as_bytes())?;
    w.write(SUMMARY_CSV, summary.csv.as_bytes())?;
    w.finish()
}

pub const STAGES: [&str; 5] = ["ingest", "score", "classify", "aggregate", "render"];

pub fn run_stage(name: &str, cfg: &RunConfig) -> Result<Manifest> {
    match name {
        "ingest" => ingest_stage(cfg),
        "score" => score_stage(cfg),
        "classify" => classify_stage(cfg),
        "aggregate" => aggregate_stage(cfg),
        "render" => render_stage(cfg),
        other => Err(Error::InvalidConfig(format!("unknown stage `{other}`"))),
    }
}

const BUNDLE_FILES: [&str; 12] = [
    PANEL_CSV,
    BUILDINGS_CSV,
    INGEST_REPORT_JSON,
    DAILY_ERRORS_CSV,
    SCORES_JSON,
    LABELS_CSV,
    BREAKDOWNS_CSV,
    BREAKDOWNS_JSON,
    SUMMARY_TXT,
    SUMMARY_CSV,
    MANIFEST_JSON,
    HEATMAP_DIR,
];

fn remove_bundle(out: &Path, created_dir: bool) {
    for name in BUNDLE_FILES {
        let p = out.join(name);
        let _ = if p.is_dir() {
            fs::remove_dir_all(&p)
        } else {
            fs::remove_file(&p)
        };
    }
    if created_dir {
        let _ = fs::remove_dir(out);
    }
}

/// Runs every stage in order. On failure the bundle files written so far are
/// removed (and the output directory too, if this run created it).
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate_inputs()?;
    let created_dir = !cfg.output_dir.exists();
    let mut manifest = None;
    for stage in STAGES {
        match run_stage(stage, cfg) {
            Ok(m) => manifest = Some(m),
            Err(e) => {
                remove_bundle(&cfg.output_dir, created_dir);
                return Err(e);
            }
        }
    }
    Ok(manifest.expect("at least one stage"))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig(
            "thread count must be at least 1".into(),
        )),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| {
                    Error::InvalidConfig(format!("cannot start {n} worker threads: {e}"))
                })?;
            Ok(pool.install(f))
        }
    }
}

/// Every file of a bundle with its bytes, keyed by relative path.
pub fn read_bundle(out: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let p = entry.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() {
                walk(root, &p, acc)?;
            } else {
                let rel = p
                    .strip_prefix(root)
                    .expect("inside root")
                    .to_string_lossy()
                    .replace('\\', "/");
                acc.insert(rel, fs::read(&p).map_err(|e| Error::io(&p, e))?);
            }
        }
        Ok(())
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc)?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fixture_scenario, generate, write_raw_fleet};

    fn fixture_config(dir: &Path) -> RunConfig {
        let raw = write_raw_fleet(&fixture_scenario(), &dir.join("raw"), 3).unwrap();
        RunConfig {
            actuals: raw.actuals,
            metadata: raw.metadata,
            submissions: vec![],
            submissions_dir: Some(raw.submissions_dir),
            row_map: raw.row_map,
            exclusions: None,
            exclude_sites: vec![],
            period_start: "2017-01-01".parse().unwrap(),
            period_end: "2017-03-01".parse().unwrap(),
            analysis: AnalysisConfig::default(),
            output_dir: dir.join("out"),
            pooling: PoolingMode::Pooled,
            quantile_rule: QuantileRule::Linear,
        }
    }

    #[test]
    fn fixture_fleet_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path());
        let manifest = run_pipeline(&cfg).unwrap();
        for f in [
            PANEL_CSV,
            DAILY_ERRORS_CSV,
            LABELS_CSV,
            BREAKDOWNS_CSV,
            BREAKDOWNS_JSON,
            SUMMARY_TXT,
            MANIFEST_JSON,
        ] {
            assert!(cfg.output_dir.join(f).is_file(), "{f}");
        }
        assert!(cfg
            .output_dir
            .join("heatmaps/site0_electricity_heatmap.svg")
            .is_file());
        assert_eq!(
            manifest.inputs["actuals"],
            digest_file(&cfg.actuals).unwrap()
        );
        assert_eq!(
            manifest.submission_ids,
            ["submission_01", "submission_02", "submission_03"]
        );
        let bundle = read_bundle(&cfg.output_dir).unwrap();
        for (name, entry) in &manifest.outputs {
            assert_eq!(sha256_hex(&bundle[name]), entry.sha256, "{name}");
        }

        // labels follow the injected layout
        let buildings = read_buildings(&cfg.output_dir.join(BUILDINGS_CSV)).unwrap();
        let got = read_labels(&cfg.output_dir.join(LABELS_CSV), &buildings).unwrap();
        let want = generate(&fixture_scenario()).unwrap().expected;
        let cats = |ls: &[crate::classify::ErrorLabel]| {
            ls.iter()
                .map(|l| (l.kind, l.building.building_id, l.day, l.category()))
                .collect::<Vec<_>>()
        };
        assert_eq!(cats(&got), cats(&want));
    }

    #[test]
    fn panel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path());
        ingest_stage(&cfg).unwrap();
        let p = cfg.output_dir.join(PANEL_CSV);
        let panel = read_panel(&p, cfg.period().unwrap()).unwrap();
        let again = dir.path().join("again.csv");
        write_panel(&again, &panel).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        let e = RunConfig::load(&missing).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("nope.json"));

        let mut cfg = fixture_config(dir.path());
        cfg.actuals = dir.path().join("absent.csv");
        let e = run_pipeline(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("absent.csv"));
        assert!(!cfg.output_dir.exists());
    }

    #[test]
    fn failed_run_removes_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path());
        // a period that overlaps no data fails at scoring
        cfg.period_start = "2018-01-01".parse().unwrap();
        cfg.period_end = "2018-01-10".parse().unwrap();
        let e = run_pipeline(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(!cfg.output_dir.exists());
    }

    #[test]
    fn stage_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path());
        ingest_stage(&cfg).unwrap();
        score_stage(&cfg).unwrap();
        let p = cfg.output_dir.join(DAILY_ERRORS_CSV);
        let text =
            fs::read_to_string(&p)
                .unwrap()
                .replacen("daily_errors/v1", "daily_errors/v0", 1);
        fs::write(&p, text).unwrap();
        assert!(matches!(
            classify_stage(&cfg),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn config_json_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(
            &p,
            r#"{"actuals":"a.csv","metadata":"m.csv","row_map":"r.csv","submissions":["s1.csv"],
                "period_start":"2017-01-01","period_end":"2017-01-31","output_dir":"out",
                "analysis":{"good_fit_max":0.05},"pooling":"mean_of_submissions"}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.actuals, dir.path().join("a.csv"));
        assert_eq!(cfg.submissions, [dir.path().join("s1.csv")]);
        assert_eq!(cfg.analysis.good_fit_max, 0.05);
        assert_eq!(cfg.analysis.out_of_range_min, 0.3);
        assert_eq!(cfg.pooling, PoolingMode::MeanOfSubmissions);
        assert!(RunConfig::load(&p).unwrap().validate_inputs().is_err());

        fs::write(&p, r#"{"actuals":"a.csv","bogus":1}"#).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap_err().exit_code(), 2);
    }
}
