//! Runs every basic and pricing strategy on the desk preset and prints seed means.

use std::time::Instant;

use mobility_pricing::engine::run_episode;
use mobility_pricing::policy::{PolicyParams, Strategy};
use mobility_pricing::scenario::ScenarioFile;

fn main() -> mobility_pricing::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let scenario = ScenarioFile::desk().build()?;
    let strategies = [
        Strategy::Single,
        Strategy::Shared,
        Strategy::Both,
        Strategy::Myopic,
        Strategy::Rollout(PolicyParams::zero()),
        Strategy::None,
    ];
    println!(
        "{:<6} {:>9} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8} {:>7} {:>6}",
        "strat", "profit", "revenue", "single", "shared", "orig", "cancel", "t_ave", "delta_d", "awt", "ms"
    );
    for s in &strategies {
        let start = Instant::now();
        let mut rs = Vec::new();
        for seed in 0..seeds {
            rs.push(run_episode(&scenario, s, seed)?);
        }
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&mobility_pricing::engine::EpisodeResult) -> f64| rs.iter().map(f).sum::<f64>() / n;
        println!(
            "{:<6} {:>9.2} {:>9.2} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>7.4} {:>8.1} {:>7.2} {:>6}",
            s.label(),
            mean(&|r| r.profit),
            mean(&|r| r.revenue),
            mean(&|r| r.single as f64),
            mean(&|r| r.shared as f64),
            mean(&|r| r.original as f64),
            mean(&|r| r.cancelled as f64),
            mean(&|r| r.t_ave.unwrap_or(0.0)),
            mean(&|r| r.delta_d_km),
            mean(&|r| r.awt_min.unwrap_or(0.0)),
            start.elapsed().as_millis() / seeds as u128
        );
    }
    Ok(())
}
