//! Samples one day of requests from the desk preset and prints arrivals per
//! hour against the expected intensity.

use mobility_pricing::scenario::ScenarioFile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mobility_pricing::Result<()> {
    let scenario = ScenarioFile::desk().build()?;
    let demand = &scenario.demand;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("hour  expected  sampled");
    let mut total = 0;
    for hour in 0..demand.horizon() / 60 {
        let steps = hour * 60..(hour + 1) * 60;
        let expected: f64 = steps.clone().map(|t| demand.step_total(t)).sum();
        let sampled: usize = steps.map(|t| demand.sample_requests(t, 0, &mut rng).len()).sum();
        total += sampled;
        println!("{hour:>4}  {expected:>8.1}  {sampled:>7}");
    }
    println!("total {total} requests (expected {:.0})", demand.total());
    Ok(())
}
