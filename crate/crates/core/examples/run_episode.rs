//! Runs one desk episode under myopic pricing and prints its metrics and a
//! few hourly snapshots of the step trace.

use mobility_pricing::engine::{run_episode_detailed, RunOptions, RESULT_FIELDS};
use mobility_pricing::policy::Strategy;
use mobility_pricing::scenario::ScenarioFile;

fn main() -> mobility_pricing::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let scenario = ScenarioFile::desk().build()?;
    let out = run_episode_detailed(&scenario, &Strategy::Myopic, seed, RunOptions { record_trace: true })?;
    for (name, v) in RESULT_FIELDS.iter().zip(out.result.values()) {
        match v {
            Some(x) => println!("{name:>20} {x:.3}"),
            None => println!("{name:>20} -"),
        }
    }
    println!("\n  t  requests booked busy  speed");
    for s in out.trace.iter().step_by(60) {
        println!(
            "{:>3} {:>9} {:>6} {:>4} {:>6.2}",
            s.t, s.requests, s.booked, s.busy_vehicles, s.mean_speed
        );
    }
    let shared = out.trips.iter().filter(|p| p.est_detour_km > 0.0).count();
    println!("\n{} trips booked, {shared} with a detour", out.trips.len());
    Ok(())
}
