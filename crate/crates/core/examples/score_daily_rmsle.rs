//! Pools two submissions' hourly predictions into daily RMSLE for one meter.

use residual_screen::ingest::{period_hours, AlignedSeries, PanelCell};
use residual_screen::metrics::{rmsle, score_series, PoolingMode};
use residual_screen::{BuildingId, BuildingRef, DayIndex, DayRange, MeterKind};

fn main() -> residual_screen::Result<()> {
    // perfect prediction, then a prediction of e - 1 against an actual of 0
    println!("rmsle([(5, 5)])     = {}", rmsle(&[(5.0, 5.0)])?);
    println!(
        "rmsle([(e - 1, 0)]) = {}",
        rmsle(&[(std::f64::consts::E - 1.0, 0.0)])?
    );

    let start = DayIndex::from_ymd(2017, 6, 1).unwrap();
    let period = DayRange::new(start, start.add_days(2))?;
    let cells = period_hours(&period)
        .into_iter()
        .enumerate()
        .map(|(i, hour)| {
            let actual = 100.0 + (i % 24) as f64;
            let drift = 1.0 + 0.1 * (i / 24) as f64;
            PanelCell {
                hour,
                actual: Some(actual),
                predictions: vec![Some(actual * drift), Some(actual / drift)],
            }
        })
        .collect();
    let series = AlignedSeries {
        building_id: BuildingId(7),
        kind: MeterKind::Electricity,
        cells,
    };
    let building = BuildingRef::new(7, 0, "Office");
    for mode in [PoolingMode::Pooled, PoolingMode::MeanOfSubmissions] {
        println!("{mode:?}");
        for r in score_series(&series, &building, mode) {
            println!("  {}  rmsle {:.6}  pairs {}", r.day, r.rmsle, r.pair_count);
        }
    }
    Ok(())
}
