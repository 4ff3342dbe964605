//! Reference implementations and synthetic fleets for testing.
//!
//! [`brute_force_classify`] restates every labelling rule as plain nested
//! loops over days and windows. [`generate`] builds scaled records from a
//! [`SyntheticScenario`] and derives the labels they must receive from the
//! injected anomaly intervals. Neither shares code with `classify`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{ErrorLabel, MagnitudeBand, MrLabel, Reach, TbLabel};
use crate::error::{Error, Result};
use crate::ingest::{format_hour, period_hours, Buildings};
use crate::metrics::DailyErrorRecord;
use crate::model::{AnalysisConfig, BuildingId, BuildingRef, DayIndex, DayRange, MeterKind};

fn sort_labels(labels: &mut [ErrorLabel]) {
    labels.sort_by_key(|l| (l.kind, l.building.site_id, l.building.building_id, l.day));
}

/// Labels every record by direct application of the rules, one day and one
/// window at a time. Meant for small fleets.
pub fn brute_force_classify(
    records: &[DailyErrorRecord],
    buildings: &Buildings,
    cfg: &AnalysisConfig,
    period: &DayRange,
) -> Result<Vec<ErrorLabel>> {
    cfg.validate()?;
    let n = period.len();
    let days: Vec<DayIndex> = period.days().collect();

    // band of every (kind, building) on every day of the period
    let mut grid: BTreeMap<(MeterKind, BuildingId), Vec<Option<MagnitudeBand>>> = BTreeMap::new();
    for r in records {
        let b = r.building.building_id;
        if buildings.get(b).is_none() {
            return Err(Error::MissingMetadata(b));
        }
        let Some(i) = days.iter().position(|&d| d == r.day) else {
            return Err(Error::OutsidePeriod {
                building: b,
                day: r.day,
            });
        };
        let Some(s) = r.rmsle_scaled else {
            return Err(Error::Unscaled {
                building: b,
                kind: r.kind,
                day: r.day,
            });
        };
        let band = if s <= cfg.good_fit_max {
            MagnitudeBand::GoodFit
        } else if s <= cfg.out_of_range_min {
            MagnitudeBand::InRange
        } else {
            MagnitudeBand::OutOfRange
        };
        let row = grid.entry((r.kind, b)).or_insert_with(|| vec![None; n]);
        if row[i].is_some() {
            return Err(Error::DuplicateRecord {
                building: b,
                kind: r.kind,
                day: r.day,
            });
        }
        row[i] = Some(band);
    }

    let is_err = |b: Option<MagnitudeBand>| {
        matches!(b, Some(MagnitudeBand::InRange | MagnitudeBand::OutOfRange))
    };

    // length of the run through every day: walk back, then forward
    let mut run_len: BTreeMap<(MeterKind, BuildingId), Vec<u32>> = BTreeMap::new();
    for (key, row) in &grid {
        let mut lens = vec![0u32; n];
        for i in 0..n {
            if !is_err(row[i]) {
                continue;
            }
            let mut first = i;
            while first > 0 && row[first - 1] == row[i] {
                first -= 1;
            }
            let mut last = i;
            while last + 1 < n && row[last + 1] == row[i] {
                last += 1;
            }
            lens[i] = (last - first + 1) as u32;
        }
        run_len.insert(*key, lens);
    }

    let width = (cfg.window_days as usize).min(n);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let b = r.building.building_id;
        let meta = buildings.get(b).unwrap();
        let i = days.iter().position(|&d| d == r.day).unwrap();
        let row = &grid[&(r.kind, b)];
        let band = row[i].unwrap();
        let s = r.rmsle_scaled.unwrap();
        if !is_err(Some(band)) {
            out.push(ErrorLabel {
                building: meta.clone(),
                kind: r.kind,
                day: r.day,
                rmsle_scaled: s,
                band,
                mr: MrLabel::GoodFit,
                tb: None,
                run_length_days: 0,
            });
            continue;
        }

        // reach
        let mut population = 0u64;
        let mut affected = 0u64;
        for ((kind, other), other_row) in &grid {
            if *kind != r.kind || buildings.get(*other).unwrap().site_id != meta.site_id {
                continue;
            }
            population += 1;
            if other_row[i] == Some(band) {
                affected += 1;
            }
        }
        let num = cfg.reach_fraction.numerator();
        let den = cfg.reach_fraction.denominator();
        let multiple = affected >= 2
            && u128::from(affected) * u128::from(den) >= u128::from(num) * u128::from(population);
        let mr = match (band, multiple) {
            (MagnitudeBand::InRange, false) => MrLabel::A,
            (MagnitudeBand::InRange, true) => MrLabel::B,
            (_, false) => MrLabel::C,
            (_, true) => MrLabel::D,
        };

        // temporal behaviour
        let lens = &run_len[&(r.kind, b)];
        let len = lens[i];
        let mut tb = if len >= cfg.long_run_min_days {
            TbLabel::T1
        } else if len >= 2 {
            TbLabel::T2
        } else {
            TbLabel::T3
        };
        if len <= cfg.medium_run_max_days {
            for start in 0..=(n - width) {
                if i < start || i >= start + width {
                    continue;
                }
                let mut e = 0usize;
                let mut single = 0usize;
                for j in start..start + width {
                    if row[j] == Some(band) {
                        e += 1;
                        if lens[j] == 1 {
                            single += 1;
                        }
                    }
                }
                if e >= 2 && single as f64 / e as f64 >= cfg.short_term_fraction {
                    tb = TbLabel::T4;
                    break;
                }
            }
        }
        out.push(ErrorLabel {
            building: meta.clone(),
            kind: r.kind,
            day: r.day,
            rmsle_scaled: s,
            band,
            mr,
            tb: Some(tb),
            run_length_days: len,
        });
    }
    sort_labels(&mut out);
    Ok(out)
}

fn default_use() -> String {
    "Office".to_string()
}

fn default_kinds() -> Vec<MeterKind> {
    vec![MeterKind::Electricity]
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteShape {
    pub site_id: u32,
    pub buildings: Vec<u32>,
    #[serde(default = "default_use")]
    pub primary_use: String,
}

/// `count` blocks of `length` error days in `band`, the i-th starting
/// `i * spacing` days after `start`, on every listed building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anomaly {
    pub buildings: Vec<u32>,
    #[serde(default)]
    pub kind: Option<MeterKind>,
    pub band: MagnitudeBand,
    pub start: DayIndex,
    #[serde(default = "one")]
    pub length: u32,
    #[serde(default = "one")]
    pub count: u32,
    #[serde(default)]
    pub spacing: u32,
}

/// Days without a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gap {
    pub buildings: Vec<u32>,
    #[serde(default)]
    pub kind: Option<MeterKind>,
    pub start: DayIndex,
    #[serde(default = "one")]
    pub length: u32,
}

/// A fleet whose every building meter is good fit except where an anomaly
/// or gap says otherwise. Anomalies and gaps without a `kind` apply to all
/// scenario kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScenario {
    pub sites: Vec<SiteShape>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<MeterKind>,
    pub period_start: DayIndex,
    pub period_end: DayIndex,
    #[serde(default)]
    pub anomalies: Vec<Anomaly>,
    #[serde(default)]
    pub gaps: Vec<Gap>,
    #[serde(default)]
    pub config: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn period(&self) -> Result<DayRange> {
        DayRange::new(self.period_start, self.period_end)
    }

    pub fn buildings(&self) -> Result<Buildings> {
        let mut out = Buildings::new();
        for site in &self.sites {
            for &b in &site.buildings {
                if out
                    .insert(BuildingRef::new(b, site.site_id, site.primary_use.clone()))
                    .is_some()
                {
                    return Err(Error::InvalidScenario(format!("building {b} listed twice")));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub buildings: Buildings,
    pub period: DayRange,
    pub records: Vec<DailyErrorRecord>,
    pub expected: Vec<ErrorLabel>,
}

/// Half-open day offsets `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: usize,
    end: usize,
    band: MagnitudeBand,
}

impl Span {
    fn len(&self) -> usize {
        self.end - self.start
    }

    fn overlap(&self, start: usize, end: usize) -> usize {
        self.end.min(end).saturating_sub(self.start.max(start))
    }
}

struct Track {
    building: BuildingRef,
    kind: MeterKind,
    runs: Vec<Span>,
    gaps: Vec<(usize, usize)>,
}

impl Track {
    fn has_records(&self, n: usize) -> bool {
        let mut covered = vec![false; n];
        for &(s, e) in &self.gaps {
            covered[s..e].iter_mut().for_each(|c| *c = true);
        }
        covered.iter().any(|c| !c)
    }

    fn in_gap(&self, day: usize) -> bool {
        self.gaps.iter().any(|&(s, e)| s <= day && day < e)
    }

    fn run_at(&self, day: usize) -> Option<&Span> {
        self.runs.iter().find(|r| r.start <= day && day < r.end)
    }
}

fn build_tracks(
    s: &SyntheticScenario,
    buildings: &Buildings,
    period: &DayRange,
) -> Result<Vec<Track>> {
    let n = period.len();
    let mut blocks: BTreeMap<(MeterKind, BuildingId), Vec<Span>> = BTreeMap::new();
    let mut gaps: BTreeMap<(MeterKind, BuildingId), Vec<(usize, usize)>> = BTreeMap::new();
    let offset = |day: DayIndex, len: u32| -> Result<(usize, usize)> {
        let start = period
            .offset(day)
            .ok_or_else(|| Error::InvalidScenario(format!("{day} is outside the period")))?;
        let end = start + len as usize;
        if len == 0 || end > n {
            return Err(Error::InvalidScenario(format!(
                "{len} days from {day} do not fit in the period"
            )));
        }
        Ok((start, end))
    };
    let kinds_of = |kind: Option<MeterKind>| -> Result<Vec<MeterKind>> {
        match kind {
            Some(k) if !s.kinds.contains(&k) => Err(Error::InvalidScenario(format!(
                "{k} is not a scenario kind"
            ))),
            Some(k) => Ok(vec![k]),
            None => Ok(s.kinds.clone()),
        }
    };
    let check = |b: u32| -> Result<BuildingId> {
        let id = BuildingId(b);
        buildings
            .get(id)
            .map(|_| id)
            .ok_or_else(|| Error::InvalidScenario(format!("building {b} is not in any site")))
    };

    for a in &s.anomalies {
        if !a.band.is_error() {
            return Err(Error::InvalidScenario(
                "anomalies must be error bands".into(),
            ));
        }
        if a.count > 1 && a.spacing <= a.length {
            return Err(Error::InvalidScenario(format!(
                "spacing {} must exceed length {} for repeated blocks",
                a.spacing, a.length
            )));
        }
        for kind in kinds_of(a.kind)? {
            for &b in &a.buildings {
                let id = check(b)?;
                for i in 0..a.count {
                    let (start, end) =
                        offset(a.start.add_days(i64::from(i * a.spacing)), a.length)?;
                    blocks.entry((kind, id)).or_default().push(Span {
                        start,
                        end,
                        band: a.band,
                    });
                }
            }
        }
    }
    for g in &s.gaps {
        for kind in kinds_of(g.kind)? {
            for &b in &g.buildings {
                let id = check(b)?;
                gaps.entry((kind, id))
                    .or_default()
                    .push(offset(g.start, g.length)?);
            }
        }
    }

    let mut tracks = Vec::new();
    for &kind in &s.kinds {
        for b in buildings.iter() {
            let key = (kind, b.building_id);
            let mut spans = blocks.remove(&key).unwrap_or_default();
            spans.sort_by_key(|sp| sp.start);
            let mut runs: Vec<Span> = Vec::new();
            for sp in spans {
                match runs.last_mut() {
                    Some(prev) if sp.start < prev.end && sp.band != prev.band => {
                        return Err(Error::InvalidScenario(format!(
                            "contradictory anomalies overlap for building {} ({kind})",
                            b.building_id
                        )));
                    }
                    Some(prev) if sp.start <= prev.end && sp.band == prev.band => {
                        prev.end = prev.end.max(sp.end)
                    }
                    _ => runs.push(sp),
                }
            }
            let track_gaps = gaps.remove(&key).unwrap_or_default();
            for &(gs, ge) in &track_gaps {
                if runs.iter().any(|r| r.overlap(gs, ge) > 0) {
                    return Err(Error::InvalidScenario(format!(
                        "gap overlaps an anomaly for building {} ({kind})",
                        b.building_id
                    )));
                }
            }
            tracks.push(Track {
                building: b.clone(),
                kind,
                runs,
                gaps: track_gaps,
            });
        }
    }
    Ok(tracks)
}

fn band_value(rng: &mut ChaCha8Rng, band: MagnitudeBand, cfg: &AnalysisConfig) -> f64 {
    let u: f64 = rng.gen_range(0.1..0.9);
    match band {
        MagnitudeBand::GoodFit => cfg.good_fit_max * u,
        MagnitudeBand::InRange => cfg.good_fit_max + (cfg.out_of_range_min - cfg.good_fit_max) * u,
        MagnitudeBand::OutOfRange if cfg.out_of_range_min < 1.0 => {
            cfg.out_of_range_min + (1.0 - cfg.out_of_range_min) * u
        }
        MagnitudeBand::OutOfRange => cfg.out_of_range_min * (1.1 + u),
    }
}

/// Builds the scenario's scaled records and the labels they must receive.
pub fn generate(s: &SyntheticScenario) -> Result<Synthetic> {
    let cfg = &s.config;
    cfg.validate()?;
    let period = s.period()?;
    let buildings = s.buildings()?;
    let tracks = build_tracks(s, &buildings, &period)?;
    let n = period.len();
    let width = (cfg.window_days as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    let mut records = Vec::new();
    let mut expected = Vec::new();
    for t in &tracks {
        let site = t.building.site_id;
        let peers: Vec<&Track> = tracks
            .iter()
            .filter(|o| o.kind == t.kind && o.building.site_id == site && o.has_records(n))
            .collect();
        for (i, day) in period.days().enumerate() {
            if t.in_gap(i) {
                continue;
            }
            let run = t.run_at(i);
            let band = run.map_or(MagnitudeBand::GoodFit, |r| r.band);
            let v = band_value(&mut rng, band, cfg);
            records.push(DailyErrorRecord {
                building: t.building.clone(),
                kind: t.kind,
                day,
                rmsle: v,
                rmsle_scaled: Some(v),
                pair_count: 24,
            });
            let (mr, tb, len) = match run {
                None => (MrLabel::GoodFit, None, 0),
                Some(run) => {
                    let affected = peers
                        .iter()
                        .filter(|o| o.run_at(i).is_some_and(|r| r.band == run.band))
                        .count();
                    let reach = if affected >= 2
                        && cfg
                            .reach_fraction
                            .is_met(affected as u64, peers.len() as u64)
                    {
                        Reach::Multiple
                    } else {
                        Reach::Single
                    };
                    let len = run.len() as u32;
                    let mut tb = if len >= cfg.long_run_min_days {
                        TbLabel::T1
                    } else if len > 1 {
                        TbLabel::T2
                    } else {
                        TbLabel::T3
                    };
                    if len <= cfg.medium_run_max_days {
                        let lo = (i + 1).saturating_sub(width);
                        let hi = i.min(n - width);
                        let fluctuating = (lo..=hi).any(|w| {
                            let same = t.runs.iter().filter(|r| r.band == run.band);
                            let e: usize = same.clone().map(|r| r.overlap(w, w + width)).sum();
                            let sgl: usize = same
                                .filter(|r| r.len() == 1)
                                .map(|r| r.overlap(w, w + width))
                                .sum();
                            e >= 2 && sgl as f64 / e as f64 >= cfg.short_term_fraction
                        });
                        if fluctuating {
                            tb = TbLabel::T4;
                        }
                    }
                    (MrLabel::new(run.band, reach), Some(tb), len)
                }
            };
            expected.push(ErrorLabel {
                building: t.building.clone(),
                kind: t.kind,
                day,
                rmsle_scaled: v,
                band,
                mr,
                tb,
                run_length_days: len,
            });
        }
    }
    sort_labels(&mut expected);
    Ok(Synthetic {
        buildings,
        period,
        records,
        expected,
    })
}

/// A randomly shaped fleet of scaled records.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFleet {
    pub buildings: Buildings,
    pub period: DayRange,
    pub records: Vec<DailyErrorRecord>,
    pub config: AnalysisConfig,
}

pub const REPRESENTATIVE_VALUES: [f64; 3] = [0.05, 0.2, 0.5];

/// Up to `max_buildings` buildings over up to `max_days` days, with scaled
/// values drawn from [`REPRESENTATIVE_VALUES`]. Bands repeat with a
/// per-fleet stickiness so that runs of every length occur, some days have no
/// record, and odd seeds also vary the window, reach and run settings.
pub fn random_fleet(seed: u64, max_buildings: usize, max_days: usize) -> RandomFleet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_buildings = rng.gen_range(1..=max_buildings.max(1));
    let n_days = rng.gen_range(1..=max_days.max(1));
    let n_sites = rng.gen_range(1..=n_buildings.min(3));
    let start = DayIndex::from_ymd(2017, 1, 1)
        .unwrap()
        .add_days(rng.gen_range(0..365));
    let period = DayRange::new(start, start.add_days(n_days as i64 - 1)).unwrap();

    let mut config = AnalysisConfig::default();
    if seed % 2 == 1 {
        config.window_days = rng.gen_range(2..=40);
        config.short_term_fraction = [0.1, 0.25, 0.5, 1.0][rng.gen_range(0..4)];
        let (num, den) = [(1, 3), (1, 2), (1, 4), (2, 3)][rng.gen_range(0..4)];
        config.reach_fraction = crate::model::ReachFraction::new(num, den).unwrap();
        config.medium_run_max_days = rng.gen_range(1..=4);
        config.long_run_min_days = config.medium_run_max_days + 1;
    }

    let stickiness = [0.0, 0.5, 0.8][rng.gen_range(0..3)];
    let missing = [0.0, 0.05, 0.2][rng.gen_range(0..3)];
    let kinds: Vec<MeterKind> = match rng.gen_range(0..3) {
        0 => vec![MeterKind::Electricity],
        1 => vec![MeterKind::Electricity, MeterKind::Steam],
        _ => vec![MeterKind::ChilledWater],
    };

    let mut buildings = Buildings::new();
    for b in 0..n_buildings as u32 {
        let site = if b < n_sites as u32 {
            b
        } else {
            rng.gen_range(0..n_sites as u32)
        };
        buildings.insert(BuildingRef::new(b, site, "Office"));
    }
    let mut records = Vec::new();
    for b in buildings.iter() {
        for &kind in &kinds {
            let mut prev: Option<usize> = None;
            for day in period.days() {
                if rng.gen_bool(missing) {
                    prev = None;
                    continue;
                }
                let idx = match prev {
                    Some(p) if rng.gen_bool(stickiness) => p,
                    _ => rng.gen_range(0..3),
                };
                prev = Some(idx);
                let v = REPRESENTATIVE_VALUES[idx];
                records.push(DailyErrorRecord {
                    building: b.clone(),
                    kind,
                    day,
                    rmsle: v,
                    rmsle_scaled: Some(v),
                    pair_count: 24,
                });
            }
        }
    }
    RandomFleet {
        buildings,
        period,
        records,
        config,
    }
}

/// The fixture fleet used by the end-to-end tests and examples: three sites,
/// three meter kinds and 60 days, with long, medium, single-day, modulating
/// and site-wide anomalies in both error bands and a few missing stretches.
/// No out-of-range site-wide modulating error (`D4`) is injected.
pub fn fixture_scenario() -> SyntheticScenario {
    let d = |i: i64| DayIndex::from_ymd(2017, 1, 1).unwrap().add_days(i);
    let (e, c, st) = (
        Some(MeterKind::Electricity),
        Some(MeterKind::ChilledWater),
        Some(MeterKind::Steam),
    );
    let (i, o) = (MagnitudeBand::InRange, MagnitudeBand::OutOfRange);
    let a = |buildings: &[u32], kind, band, start, length, count, spacing| Anomaly {
        buildings: buildings.to_vec(),
        kind,
        band,
        start: d(start),
        length,
        count,
        spacing,
    };
    SyntheticScenario {
        sites: vec![
            SiteShape {
                site_id: 0,
                buildings: (0..6).collect(),
                primary_use: "Education".into(),
            },
            SiteShape {
                site_id: 1,
                buildings: (10..15).collect(),
                primary_use: "Office".into(),
            },
            SiteShape {
                site_id: 2,
                buildings: (20..23).collect(),
                primary_use: "Lodging/residential".into(),
            },
        ],
        kinds: vec![
            MeterKind::Electricity,
            MeterKind::ChilledWater,
            MeterKind::Steam,
        ],
        period_start: d(0),
        period_end: d(59),
        anomalies: vec![
            a(&[0], e, i, 5, 6, 1, 0),
            a(&[1], e, i, 12, 2, 1, 0),
            a(&[2], e, i, 18, 1, 7, 3),
            a(&[0, 1, 2, 3], e, o, 40, 5, 1, 0),
            a(&[3], e, o, 50, 1, 1, 0),
            a(&[10], e, o, 8, 3, 1, 0),
            a(&[10, 11, 12], e, i, 30, 1, 1, 0),
            a(&[20, 21], e, i, 15, 2, 1, 0),
            a(&[22], e, i, 33, 1, 4, 5),
            a(&[0, 1, 2, 3, 4, 5], c, i, 10, 4, 1, 0),
            a(&[4], c, o, 25, 1, 3, 4),
            a(&[11], c, o, 45, 7, 1, 0),
            a(&[13, 14], c, i, 20, 1, 5, 2),
            a(&[20, 21, 22], st, o, 5, 2, 1, 0),
            a(&[21], st, i, 20, 3, 1, 0),
            a(&[1], st, o, 55, 1, 1, 0),
        ],
        gaps: vec![
            Gap {
                buildings: vec![12],
                kind: e,
                start: d(0),
                length: 6,
            },
            Gap {
                buildings: vec![2],
                kind: st,
                start: d(50),
                length: 10,
            },
        ],
        config: AnalysisConfig::default(),
        seed: 2017,
    }
}

fn wrap(p: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(p, e)
}

/// Paths of a raw input fleet written by [`write_raw_fleet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFleet {
    pub actuals: PathBuf,
    pub metadata: PathBuf,
    pub row_map: PathBuf,
    pub submissions_dir: PathBuf,
    pub submissions: Vec<PathBuf>,
}

/// Daily log error of the highest-error day of each kind; every other day's
/// log error is its scaled target times this, so min-max scaling recovers
/// the targets.
const RAW_MAX_LOG_ERROR: f64 = 2.0;

/// Writes hourly actuals, metadata, a row-id map and `n_submissions`
/// submission files whose pooled daily RMSLE, once scaled, reproduces the
/// scenario's band layout. Each kind needs at least one out-of-range and one
/// good-fit day; the first of each is pinned to the scaling extremes.
///
/// Submission `s` predicts `(1 + a) * exp(+-k_s * delta) - 1` for actual `a`
/// with the sign alternating by hour, so every hour of a day has the same log
/// error. One prediction is negative and one actual reading is blank, to
/// exercise the cleaning counters.
pub fn write_raw_fleet(
    s: &SyntheticScenario,
    dir: &Path,
    n_submissions: usize,
) -> Result<RawFleet> {
    if n_submissions == 0 {
        return Err(Error::NoSubmissions);
    }
    let synthetic = generate(s)?;
    let mut delta: BTreeMap<(MeterKind, BuildingId, DayIndex), f64> = BTreeMap::new();
    let mut pinned_low = BTreeSet::new();
    let mut pinned_high = BTreeSet::new();
    for l in &synthetic.expected {
        let mut v = l.rmsle_scaled * RAW_MAX_LOG_ERROR;
        if l.band == MagnitudeBand::GoodFit && pinned_low.insert(l.kind) {
            v = 0.0;
        }
        if l.band == MagnitudeBand::OutOfRange && pinned_high.insert(l.kind) {
            v = RAW_MAX_LOG_ERROR;
        }
        delta.insert((l.kind, l.building.building_id, l.day), v);
    }
    for &kind in &s.kinds {
        if !pinned_low.contains(&kind) || !pinned_high.contains(&kind) {
            return Err(Error::InvalidScenario(format!(
                "{kind} needs a good-fit and an out-of-range day to pin its scale"
            )));
        }
    }

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let submissions_dir = dir.join("submissions");
    fs::create_dir_all(&submissions_dir).map_err(|e| Error::io(&submissions_dir, e))?;
    let create = |p: &Path| {
        fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };

    let metadata = dir.join("building_metadata.csv");
    let mut w = create(&metadata)?;
    writeln!(w, "site_id,building_id,primary_use").map_err(wrap(&metadata))?;
    for b in synthetic.buildings.iter() {
        writeln!(w, "{},{},{}", b.site_id, b.building_id, b.primary_use)
            .map_err(wrap(&metadata))?;
    }
    w.flush().map_err(wrap(&metadata))?;

    let actuals = dir.join("actuals.csv");
    let row_map = dir.join("row_map.csv");
    let submissions: Vec<PathBuf> = (0..n_submissions)
        .map(|k| submissions_dir.join(format!("submission_{:02}.csv", k + 1)))
        .collect();
    let mut wa = create(&actuals)?;
    let mut wr = create(&row_map)?;
    let mut ws: Vec<_> = submissions
        .iter()
        .map(|p| create(p))
        .collect::<Result<_>>()?;
    writeln!(wa, "building_id,meter,timestamp,meter_reading").map_err(wrap(&actuals))?;
    writeln!(wr, "row_id,building_id,meter,timestamp").map_err(wrap(&row_map))?;
    for (w, p) in ws.iter_mut().zip(&submissions) {
        writeln!(w, "row_id,meter_reading").map_err(wrap(p))?;
    }

    let hours = period_hours(&synthetic.period);
    let mut row_id = 0u64;
    let keys: BTreeSet<(MeterKind, BuildingId)> = delta.keys().map(|&(k, b, _)| (k, b)).collect();
    for (kind, b) in keys {
        for &h in &hours {
            let day = DayIndex::from(h.date());
            let Some(&dl) = delta.get(&(kind, b, day)) else {
                continue;
            };
            let hour_of_day = (row_id % 24) as f64;
            let actual = 40.0
                + f64::from(b.0 % 7) * 5.0
                + if (8.0..18.0).contains(&hour_of_day) {
                    30.0
                } else {
                    0.0
                };
            let ts = format_hour(h);
            let blank_actual = row_id == 7;
            if blank_actual {
                writeln!(wa, "{b},{},{ts},", kind.code()).map_err(wrap(&actuals))?;
            } else {
                writeln!(wa, "{b},{},{ts},{actual}", kind.code()).map_err(wrap(&actuals))?;
            }
            writeln!(wr, "{row_id},{b},{},{ts}", kind.code()).map_err(wrap(&row_map))?;
            let sign = if row_id % 2 == 0 { 1.0 } else { -1.0 };
            for (k, (w, p)) in ws.iter_mut().zip(&submissions).enumerate() {
                let factor = 1.0 + 0.02 * k as f64;
                let pred = if k == 0 && row_id == 11 {
                    -1.0
                } else {
                    (1.0 + actual) * (sign * factor * dl).exp() - 1.0
                };
                writeln!(w, "{row_id},{pred}").map_err(wrap(p))?;
            }
            row_id += 1;
        }
    }
    wa.flush().map_err(wrap(&actuals))?;
    wr.flush().map_err(wrap(&row_map))?;
    for (w, p) in ws.iter_mut().zip(&submissions) {
        w.flush().map_err(wrap(p))?;
    }
    Ok(RawFleet {
        actuals,
        metadata,
        row_map,
        submissions_dir,
        submissions,
    })
}
