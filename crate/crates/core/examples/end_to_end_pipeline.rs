//! Writes a raw fixture fleet, runs every stage and lists the bundle.
//!
//! Usage: `cargo run --example end_to_end_pipeline [OUT_DIR]`.

use std::path::PathBuf;

use residual_screen::metrics::{PoolingMode, QuantileRule};
use residual_screen::oracle::{fixture_scenario, write_raw_fleet};
use residual_screen::pipeline::{read_bundle, run_pipeline, RunConfig};
use residual_screen::AnalysisConfig;

fn main() -> residual_screen::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("residual-screen-e2e"));
    let scenario = fixture_scenario();
    let raw = write_raw_fleet(&scenario, &root.join("raw"), 3)?;
    let cfg = RunConfig {
        actuals: raw.actuals,
        metadata: raw.metadata,
        submissions: vec![],
        submissions_dir: Some(raw.submissions_dir),
        row_map: raw.row_map,
        exclusions: None,
        exclude_sites: vec![],
        period_start: scenario.period_start,
        period_end: scenario.period_end,
        analysis: AnalysisConfig::default(),
        output_dir: root.join("out"),
        pooling: PoolingMode::Pooled,
        quantile_rule: QuantileRule::Linear,
    };
    let manifest = run_pipeline(&cfg)?;
    println!("config {}", manifest.config_hash);
    for (name, bytes) in read_bundle(&cfg.output_dir)? {
        println!("  {name:<45} {:>9} bytes", bytes.len());
    }
    print!(
        "{}",
        std::fs::read_to_string(cfg.output_dir.join("summary.txt")).unwrap_or_default()
    );
    Ok(())
}
