//! Loads raw actuals, metadata and submissions from CSV and aligns them.
//!
//! Usage: `cargo run --example ingest_csv [DIR]`. Without `DIR` a small
//! synthetic fleet is written to a temporary directory first.

use std::path::PathBuf;

use residual_screen::ingest::{
    align, load_actuals, load_metadata, load_submission, ExclusionList, RowIdMap,
};
use residual_screen::oracle::{fixture_scenario, write_raw_fleet};
use residual_screen::{BuildingId, MeterKind};

fn main() -> residual_screen::Result<()> {
    let scenario = fixture_scenario();
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("residual-screen-ingest"));
    let raw = write_raw_fleet(&scenario, &dir, 2)?;

    let buildings = load_metadata(&raw.metadata)?;
    let mut exclusions = ExclusionList::new();
    exclusions.exclude(BuildingId(22), MeterKind::Steam);
    let actuals = load_actuals(&raw.actuals, &exclusions)?;
    let row_map = RowIdMap::load(&raw.row_map)?;
    let submissions = raw
        .submissions
        .iter()
        .map(|p| load_submission(p, &row_map))
        .collect::<residual_screen::Result<Vec<_>>>()?;

    println!(
        "{} buildings, {} meter series",
        buildings.len(),
        actuals.series.len()
    );
    println!("actuals: {:?}", actuals.report);
    for s in &submissions {
        println!("{}: {:?}", s.submission_id, s.report);
    }
    let panel = align(&actuals.series, &submissions, scenario.period()?)?;
    println!(
        "aligned {} hourly cells over {} days",
        panel.cell_count(),
        panel.period.len()
    );
    Ok(())
}
