//! Differential check of the classifier against the brute-force oracle.
//!
//! Usage: `cargo run --release --example synthetic_oracle [FLEETS]`.

use residual_screen::classify::classify_all;
use residual_screen::oracle::{brute_force_classify, fixture_scenario, generate, random_fleet};

fn main() -> residual_screen::Result<()> {
    let fleets: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let mut cells = 0;
    for seed in 0..fleets {
        let f = random_fleet(seed, 20, 120);
        let fast = classify_all(&f.records, &f.buildings, &f.config, &f.period)?;
        let slow = brute_force_classify(&f.records, &f.buildings, &f.config, &f.period)?;
        if fast != slow {
            let first = fast.iter().zip(&slow).find(|(a, b)| a != b);
            eprintln!("seed {seed}: disagreement at {first:?}");
            std::process::exit(1);
        }
        cells += fast.len();
    }
    println!("{fleets} random fleets, {cells} building-days, full agreement");

    let scenario = fixture_scenario();
    let g = generate(&scenario)?;
    let oracle = brute_force_classify(&g.records, &g.buildings, &scenario.config, &g.period)?;
    println!(
        "fixture scenario: oracle reproduces the injected labels: {}",
        oracle == g.expected
    );
    Ok(())
}
