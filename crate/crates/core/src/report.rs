//! Heat-map matrices, SVG renders and the plain-text summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::aggregate::{BreakdownTable, Breakdowns};
use crate::artifact;
use crate::classify::{Category, ErrorLabel};
use crate::error::{Error, Result};
use crate::metrics::ScoreSummary;
use crate::model::{AnalysisConfig, BuildingId, DayIndex, DayRange, MeterKind, SiteId};

pub const NO_DATA: &str = "ND";

/// Cell colours. Good fit is a neutral grey and no-data is white. Each
/// MR type takes one hue from the Okabe-Ito set (A blue, B bluish green,
/// C orange, D vermillion) and TB types step from the darkest shade (T1)
/// to the lightest (T4).
///
/// | code | colour  | code | colour  | code | colour  | code | colour  |
/// |------|---------|------|---------|------|---------|------|---------|
/// | A1   | #00467a | B1   | #00573f | C1   | #8a5a00 | D1   | #8f2d00 |
/// | A2   | #0072b2 | B2   | #009e73 | C2   | #e69f00 | D2   | #d55e00 |
/// | A3   | #56b4e9 | B3   | #5ccfa8 | C3   | #f5c55c | D3   | #f09a6b |
/// | A4   | #b3dcf5 | B4   | #b8ecd9 | C4   | #fbe4b0 | D4   | #f9cfb5 |
///
/// `GF` is #d9d9d9 and `ND` is #ffffff.
pub const PALETTE: [(&str, &str); Category::COUNT + 1] = [
    ("GF", "#d9d9d9"),
    ("A1", "#00467a"),
    ("A2", "#0072b2"),
    ("A3", "#56b4e9"),
    ("A4", "#b3dcf5"),
    ("B1", "#00573f"),
    ("B2", "#009e73"),
    ("B3", "#5ccfa8"),
    ("B4", "#b8ecd9"),
    ("C1", "#8a5a00"),
    ("C2", "#e69f00"),
    ("C3", "#f5c55c"),
    ("C4", "#fbe4b0"),
    ("D1", "#8f2d00"),
    ("D2", "#d55e00"),
    ("D3", "#f09a6b"),
    ("D4", "#f9cfb5"),
    (NO_DATA, "#ffffff"),
];

pub fn colour(cell: Option<Category>) -> &'static str {
    match cell {
        Some(c) => PALETTE[c.index()].1,
        None => PALETTE[Category::COUNT].1,
    }
}

pub fn cell_code(cell: Option<Category>) -> String {
    cell.map_or_else(|| NO_DATA.to_string(), |c| c.code())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapMatrix {
    pub site_id: SiteId,
    pub kind: MeterKind,
    /// Descending mean scaled RMSLE, ties by ascending id.
    pub buildings: Vec<BuildingId>,
    pub days: Vec<DayIndex>,
    /// Row-major, `buildings.len() * days.len()` cells.
    pub cells: Vec<Option<Category>>,
}

impl HeatmapMatrix {
    pub fn cell(&self, row: usize, col: usize) -> Option<Category> {
        self.cells[row * self.days.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<Category>] {
        let w = self.days.len();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn file_stem(&self) -> String {
        heatmap_stem(self.site_id, self.kind)
    }
}

pub fn heatmap_stem(site: SiteId, kind: MeterKind) -> String {
    format!("site{site}_{}_heatmap", kind.slug())
}

/// Every (site, kind) with at least one labelled building-day.
pub fn heatmap_targets(labels: &[ErrorLabel]) -> Vec<(SiteId, MeterKind)> {
    labels
        .iter()
        .map(|l| (l.building.site_id, l.kind))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn build_heatmap(
    labels: &[ErrorLabel],
    site: SiteId,
    kind: MeterKind,
    period: &DayRange,
) -> Result<HeatmapMatrix> {
    let mut per_building: BTreeMap<BuildingId, Vec<&ErrorLabel>> = BTreeMap::new();
    for l in labels
        .iter()
        .filter(|l| l.building.site_id == site && l.kind == kind)
    {
        per_building
            .entry(l.building.building_id)
            .or_default()
            .push(l);
    }
    if per_building.is_empty() {
        return Err(Error::UnknownHeatmapTarget { site, kind });
    }
    let mut order: Vec<(BuildingId, f64)> = per_building
        .iter()
        .map(|(&b, ls)| {
            let in_period: Vec<f64> = ls
                .iter()
                .filter(|l| period.contains(l.day))
                .map(|l| l.rmsle_scaled)
                .collect();
            let mean = if in_period.is_empty() {
                0.0
            } else {
                in_period.iter().sum::<f64>() / in_period.len() as f64
            };
            (b, mean)
        })
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let days: Vec<DayIndex> = period.days().collect();
    let mut cells = vec![None; order.len() * days.len()];
    for (row, (b, _)) in order.iter().enumerate() {
        for l in &per_building[b] {
            if let Some(col) = period.offset(l.day) {
                cells[row * days.len() + col] = Some(l.category());
            }
        }
    }
    Ok(HeatmapMatrix {
        site_id: site,
        kind,
        buildings: order.into_iter().map(|(b, _)| b).collect(),
        days,
        cells,
    })
}

pub const HEATMAP_SCHEMA: &str = "heatmap/v1";

pub fn heatmap_csv(matrix: &HeatmapMatrix) -> String {
    let mut header = vec!["building_id".to_string()];
    header.extend(matrix.days.iter().map(|d| d.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    artifact::csv_string(
        HEATMAP_SCHEMA,
        &header,
        matrix.buildings.iter().enumerate().map(|(i, b)| {
            std::iter::once(b.to_string())
                .chain(matrix.row(i).iter().map(|&c| cell_code(c)))
                .collect::<Vec<_>>()
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapStyle {
    pub cell_width: u32,
    pub cell_height: u32,
    pub margin: u32,
    /// Space for the building-id labels left of the grid.
    pub label_width: u32,
    pub legend_swatch: u32,
    pub font_size: u32,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        Self {
            cell_width: 3,
            cell_height: 8,
            margin: 10,
            label_width: 48,
            legend_swatch: 12,
            font_size: 10,
        }
    }
}

const LEGEND_COLUMNS: u32 = 6;

fn legend_height(style: &HeatmapStyle) -> u32 {
    let rows = (PALETTE.len() as u32).div_ceil(LEGEND_COLUMNS);
    rows * (style.legend_swatch + 4)
}

fn legend_width(style: &HeatmapStyle) -> u32 {
    LEGEND_COLUMNS * (style.legend_swatch + 36)
}

fn write_legend(out: &mut String, style: &HeatmapStyle, x0: u32, y0: u32) {
    out.push_str("<g class=\"legend\">\n");
    for (i, (code, fill)) in PALETTE.iter().enumerate() {
        let i = i as u32;
        let x = x0 + (i % LEGEND_COLUMNS) * (style.legend_swatch + 36);
        let y = y0 + (i / LEGEND_COLUMNS) * (style.legend_swatch + 4);
        let s = style.legend_swatch;
        let _ = writeln!(
            out,
            "<rect class=\"swatch\" x=\"{x}\" y=\"{y}\" width=\"{s}\" height=\"{s}\" fill=\"{fill}\" stroke=\"#808080\" stroke-width=\"0.5\"/>\
             <text x=\"{}\" y=\"{}\" font-size=\"{}\">{code}</text>",
            x + s + 4,
            y + s - 2,
            style.font_size
        );
    }
    out.push_str("</g>\n");
}

fn svg_open(out: &mut String, width: u32, height: u32) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
}

/// A document holding only the legend, used when there is nothing to plot.
pub fn render_legend(style: &HeatmapStyle) -> String {
    let width = legend_width(style) + 2 * style.margin;
    let height = legend_height(style) + 2 * style.margin;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    write_legend(&mut out, style, style.margin, style.margin);
    out.push_str("</svg>\n");
    out
}

/// One `rect.cell` per (building, day), the building ids down the left, the
/// first and last dates along the bottom and the full legend underneath.
pub fn render_heatmap(matrix: &HeatmapMatrix, style: &HeatmapStyle) -> String {
    let n_rows = matrix.buildings.len() as u32;
    let n_cols = matrix.days.len() as u32;
    let title_h = style.font_size + 6;
    let grid_x = style.margin + style.label_width;
    let grid_y = style.margin + title_h;
    let grid_w = n_cols * style.cell_width;
    let grid_h = n_rows * style.cell_height;
    let axis_h = style.font_size + 6;
    let legend_y = grid_y + grid_h + axis_h + 6;
    let width = (grid_x + grid_w).max(style.margin + legend_width(style)) + style.margin;
    let height = legend_y + legend_height(style) + style.margin;

    let mut out = String::with_capacity(80 * matrix.cells.len() + 4096);
    svg_open(&mut out, width, height);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"{}\">site {} {}</text>",
        style.margin,
        style.margin + style.font_size,
        style.font_size + 2,
        matrix.site_id,
        matrix.kind.display_name()
    );
    out.push_str("<g class=\"rows\">\n");
    let label_size = style.font_size.min(style.cell_height);
    for (i, b) in matrix.buildings.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"{label_size}\" text-anchor=\"end\">{b}</text>",
            grid_x - 2,
            grid_y + i as u32 * style.cell_height + style.cell_height
        );
    }
    out.push_str("</g>\n<g class=\"grid\" shape-rendering=\"crispEdges\">\n");
    for row in 0..n_rows {
        let y = grid_y + row * style.cell_height;
        for (col, &cell) in matrix.row(row as usize).iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect class=\"cell\" x=\"{}\" y=\"{y}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                grid_x + col as u32 * style.cell_width,
                style.cell_width,
                style.cell_height,
                colour(cell)
            );
        }
    }
    out.push_str("</g>\n");
    if let (Some(first), Some(last)) = (matrix.days.first(), matrix.days.last()) {
        let y = grid_y + grid_h + style.font_size + 2;
        let _ = writeln!(
            out,
            "<text x=\"{grid_x}\" y=\"{y}\" font-size=\"{}\">{first}</text>\
             <text x=\"{}\" y=\"{y}\" font-size=\"{}\" text-anchor=\"end\">{last}</text>",
            style.font_size,
            grid_x + grid_w,
            style.font_size
        );
    }
    write_legend(&mut out, style, style.margin, legend_y);
    out.push_str("</svg>\n");
    out
}

/// Share rendered to 0.1 percentage points.
pub fn pct(share: f64) -> String {
    format!("{:.1}%", share * 100.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryReport {
    pub text: String,
    pub csv: String,
}

pub const SUMMARY_SCHEMA: &str = "summary/v1";
pub const SUMMARY_HEADER: [&str; 6] = [
    "section",
    "key",
    "label",
    "frequency",
    "contribution",
    "n_days",
];

fn text_table(out: &mut String, title: &str, table: &BreakdownTable) {
    let _ = writeln!(
        out,
        "{title} ({} building-days, {} buildings)",
        table.n_days, table.n_buildings
    );
    let _ = writeln!(
        out,
        "  {:<6} {:>10} {:>13} {:>10}",
        "label", "frequency", "contribution", "days"
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "  {:<6} {:>10} {:>13} {:>10}",
            r.label,
            pct(r.frequency_share),
            pct(r.contribution_share),
            r.n_days
        );
    }
    out.push('\n');
}

/// Per-kind joint tables (all 17 categories for all four kinds) and the
/// overall tables, followed by the analysis settings and fitted scalers.
pub fn render_summary(
    breakdowns: &Breakdowns,
    config: &AnalysisConfig,
    scores: &ScoreSummary,
) -> SummaryReport {
    let mut text = String::new();
    let mut sections: Vec<(&str, &BreakdownTable)> = vec![
        ("overall", &breakdowns.overall.mr),
        ("overall_in_range", &breakdowns.overall.in_range_tb),
        ("overall_out_of_range", &breakdowns.overall.out_of_range_tb),
    ];
    text_table(&mut text, "Overall", &breakdowns.overall.mr);
    let _ = writeln!(
        text,
        "In range {}, out of range {}\n",
        pct(breakdowns.overall.in_range_share()),
        pct(breakdowns.overall.out_of_range_share())
    );
    text_table(
        &mut text,
        "Temporal behaviour, in-range days",
        &breakdowns.overall.in_range_tb,
    );
    text_table(
        &mut text,
        "Temporal behaviour, out-of-range days",
        &breakdowns.overall.out_of_range_tb,
    );
    for t in &breakdowns.meter_joint {
        let kind: MeterKind = t.key.parse().expect("meter tables are keyed by slug");
        text_table(&mut text, kind.display_name(), t);
        sections.push(("meter", t));
    }
    for t in &breakdowns.primary_use {
        sections.push(("primary_use", t));
    }

    let _ = writeln!(text, "Analysis settings");
    let _ = writeln!(text, "  good_fit_max         {}", config.good_fit_max);
    let _ = writeln!(text, "  out_of_range_min     {}", config.out_of_range_min);
    let _ = writeln!(text, "  reach_fraction       {}", config.reach_fraction);
    let _ = writeln!(text, "  window_days          {}", config.window_days);
    let _ = writeln!(
        text,
        "  short_term_fraction  {}",
        config.short_term_fraction
    );
    let _ = writeln!(text, "  long_run_min_days    {}", config.long_run_min_days);
    let _ = writeln!(
        text,
        "  medium_run_max_days  {}",
        config.medium_run_max_days
    );
    text.push('\n');
    if !scores.scalers.is_empty() {
        let _ = writeln!(text, "Scalers and scaled quartiles");
        let _ = writeln!(
            text,
            "  {:<14} {:>10} {:>10} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "meter", "min", "max", "q1", "q2", "q3", "iqr", "fence"
        );
        for (kind, s) in &scores.scalers {
            let q = scores.quartiles.get(kind);
            let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                text,
                "  {:<14} {:>10.4} {:>10.4} {:>6} {:>6} {:>6} {:>6} {:>6}",
                kind.display_name(),
                s.min_value,
                s.max_value,
                f(q.map(|q| q.q1)),
                f(q.map(|q| q.q2)),
                f(q.map(|q| q.q3)),
                f(q.map(|q| q.iqr)),
                f(q.map(|q| q.upper_fence)),
            );
        }
    }

    let csv = artifact::csv_string(
        SUMMARY_SCHEMA,
        &SUMMARY_HEADER,
        sections.iter().flat_map(|(section, t)| {
            t.rows.iter().map(move |r| {
                [
                    section.to_string(),
                    t.key.clone(),
                    r.label.clone(),
                    pct(r.frequency_share),
                    pct(r.contribution_share),
                    r.n_days.to_string(),
                ]
            })
        }),
    );
    SummaryReport { text, csv }
}
