//! Frequency and contribution shares of a labelled fleet.

use residual_screen::aggregate::Breakdowns;
use residual_screen::classify::classify_all;
use residual_screen::oracle::{fixture_scenario, generate};
use residual_screen::report::pct;

fn main() -> residual_screen::Result<()> {
    let scenario = fixture_scenario();
    let fleet = generate(&scenario)?;
    let labels = classify_all(
        &fleet.records,
        &fleet.buildings,
        &scenario.config,
        &fleet.period,
    )?;
    let b = Breakdowns::compute(&labels, &fleet.buildings)?;

    println!("overall ({} building-days)", b.overall.mr.n_days);
    for r in &b.overall.mr.rows {
        println!(
            "  {:<3} {:>7} of days  {:>7} of error",
            r.label,
            pct(r.frequency_share),
            pct(r.contribution_share)
        );
    }
    println!(
        "  in range {}, out of range {}",
        pct(b.overall.in_range_share()),
        pct(b.overall.out_of_range_share())
    );

    println!("per meter kind, good fit share");
    for t in b.meter.iter().filter(|t| t.n_days > 0) {
        println!("  {:<13} {}", t.key, pct(t.frequency("GF")));
    }
    println!("per primary use, type A contribution");
    for t in &b.primary_use {
        println!("  {:<20} {}", t.key, pct(t.contribution("A")));
    }
    Ok(())
}
