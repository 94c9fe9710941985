//! Compares each strategy with the no-service baseline across congestion
//! levels and prints the congestion/capacity trade-off table.

use mobility_pricing::commands::{run_batch, tradeoff, tradeoff_csv};
use mobility_pricing::demand::{CongestionLevel, NamedLevel};
use mobility_pricing::policy::Strategy;
use mobility_pricing::scenario::ScenarioFile;

fn main() -> mobility_pricing::Result<()> {
    let base = ScenarioFile::desk().build()?;
    let strategies = [
        Strategy::Single,
        Strategy::Shared,
        Strategy::Both,
        Strategy::Myopic,
        Strategy::None,
    ];
    let seeds: Vec<u64> = (0..5).collect();
    let mut records = Vec::new();
    for level in [NamedLevel::Low, NamedLevel::Medium, NamedLevel::High] {
        let sc = base.with_congestion(CongestionLevel::Named(level));
        records.extend(run_batch(&sc, &strategies, &seeds)?);
    }
    print!("{}", tradeoff_csv(&tradeoff(&records)?));
    Ok(())
}
