//! Renders one site's heat map to SVG.
//!
//! Usage: `cargo run --example render_heatmap [OUT.svg]`.

use residual_screen::classify::classify_all;
use residual_screen::oracle::{fixture_scenario, generate};
use residual_screen::report::{build_heatmap, heatmap_csv, render_heatmap, HeatmapStyle};
use residual_screen::{MeterKind, SiteId};

fn main() -> residual_screen::Result<()> {
    let scenario = fixture_scenario();
    let fleet = generate(&scenario)?;
    let labels = classify_all(
        &fleet.records,
        &fleet.buildings,
        &scenario.config,
        &fleet.period,
    )?;
    let matrix = build_heatmap(&labels, SiteId(0), MeterKind::Electricity, &fleet.period)?;

    print!("{}", heatmap_csv(&matrix));
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("{}.svg", matrix.file_stem())));
    let svg = render_heatmap(&matrix, &HeatmapStyle::default());
    std::fs::write(&out, svg).map_err(|e| residual_screen::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    println!("wrote {}", out.display());
    Ok(())
}
