//! Shows how short errors inside a fluctuating window become modulating.

use residual_screen::classify::{modulation_pass, runs, tb_from_run, MagnitudeBand, RunDay};
use residual_screen::{AnalysisConfig, DayIndex};

fn show(title: &str, bands: &[Option<MagnitudeBand>], cfg: &AnalysisConfig) {
    let start = DayIndex::from_ymd(2017, 1, 1).unwrap();
    let mut days: Vec<Option<RunDay>> = vec![None; bands.len()];
    for run in runs(start, bands) {
        let first = run.start.days_since(start) as usize;
        for d in &mut days[first..first + run.length as usize] {
            *d = Some(RunDay {
                run_length: run.length,
                tb: tb_from_run(run.length, cfg),
            });
        }
    }
    let before: String = days
        .iter()
        .map(|d| d.map_or('.', |d| char::from(b'0' + d.tb.digit())))
        .collect();
    modulation_pass(&mut days, cfg);
    let after: String = days
        .iter()
        .map(|d| d.map_or('.', |d| char::from(b'0' + d.tb.digit())))
        .collect();
    println!("{title}\n  runs  {before}\n  final {after}");
}

fn main() {
    let cfg = AnalysisConfig::default();
    let e = Some(MagnitudeBand::InRange);
    let g = Some(MagnitudeBand::GoodFit);

    let mut isolated = vec![g; 30];
    for i in (0..30).step_by(3) {
        isolated[i] = e;
    }
    show("ten isolated error days in 30", &isolated, &cfg);

    let mut mixed = vec![g; 30];
    mixed[2..5].iter_mut().for_each(|d| *d = e);
    mixed[10] = e;
    mixed[15..21].iter_mut().for_each(|d| *d = e);
    show("3-day run, one isolated day and a 6-day run", &mixed, &cfg);

    let mut lone = vec![g; 30];
    lone[12] = e;
    show("a single isolated day", &lone, &cfg);
}
