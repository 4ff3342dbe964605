//! Labels a synthetic fleet and counts building-days per category.

use std::collections::BTreeMap;

use residual_screen::classify::classify_all;
use residual_screen::oracle::{fixture_scenario, generate};

fn main() -> residual_screen::Result<()> {
    let scenario = fixture_scenario();
    let fleet = generate(&scenario)?;
    let labels = classify_all(
        &fleet.records,
        &fleet.buildings,
        &scenario.config,
        &fleet.period,
    )?;

    let mut counts: BTreeMap<_, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l.category()).or_default() += 1;
    }
    println!("{} building-days", labels.len());
    for (category, n) in counts {
        println!("  {category:<3} {n:>5}");
    }

    println!("building 0, electricity, first 12 days:");
    for l in labels
        .iter()
        .filter(|l| l.building.building_id.0 == 0)
        .take(12)
    {
        println!("  {}  {:.3}  {}", l.day, l.rmsle_scaled, l.category());
    }
    Ok(())
}
