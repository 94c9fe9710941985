//! Trains rollout-policy parameters on the desk preset and compares the result
//! with myopic pricing on held-out seeds.

use std::time::Instant;

use mobility_pricing::engine::run_episode;
use mobility_pricing::policy::{PolicyParams, Strategy};
use mobility_pricing::scenario::ScenarioFile;
use mobility_pricing::trainer::{train, CmaConfig};

fn main() -> mobility_pricing::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let generations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let scenario = ScenarioFile::desk().build()?;
    let cfg = CmaConfig {
        generations,
        ..CmaConfig::default()
    };
    let start = Instant::now();
    let outcome = train(&scenario, &cfg, 1)?;
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());
    println!("{}", outcome.theta.to_text());

    let held_out = 0..20u64;
    let po = Strategy::Rollout(outcome.theta);
    let (mut sum_po, mut sum_pm) = (0.0, 0.0);
    for seed in held_out.clone() {
        sum_po += run_episode(&scenario, &po, seed)?.profit;
        sum_pm += run_episode(&scenario, &Strategy::Rollout(PolicyParams::zero()), seed)?.profit;
    }
    let n = held_out.count() as f64;
    println!(
        "held-out mean profit: PO {:.2}  PM {:.2}  margin {:+.2}%",
        sum_po / n,
        sum_pm / n,
        100.0 * (sum_po - sum_pm) / sum_pm
    );
    Ok(())
}
