use mobility_pricing::scenario::ScenarioFile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn episode_request_count_averages_to_the_configured_total() {
    let sc = ScenarioFile::desk().build().unwrap();
    let demand = &sc.demand;
    assert!((demand.total() - 2000.0).abs() < 1e-6);
    let runs = 150;
    let counts: Vec<f64> = (0..runs)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..demand.horizon())
                .map(|t| demand.sample_requests(t, 0, &mut rng).len())
                .sum::<usize>() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / runs as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let se = (2000.0 / runs as f64).sqrt();
    assert!((mean - 2000.0).abs() < 4.0 * se, "mean {mean}");
    // Poisson totals: variance close to the mean
    assert!(var > 2000.0 * 0.7 && var < 2000.0 * 1.4, "variance {var}");
}

#[test]
fn sampled_pairs_follow_step_intensities() {
    let sc = ScenarioFile::desk().build().unwrap();
    let demand = &sc.demand;
    let n = demand.node_count();
    let t = 60;
    let mut counts = vec![0usize; n * n];
    let reps = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..reps {
        for r in demand.sample_requests(t, 0, &mut rng) {
            assert_ne!(r.origin, r.destination);
            assert_eq!(r.time, t);
            counts[r.origin * n + r.destination] += 1;
        }
    }
    let mut checked = 0;
    for o in 0..n {
        for d in 0..n {
            let lambda = demand.intensity(o, d, t) * reps as f64;
            if lambda < 30.0 {
                continue;
            }
            let got = counts[o * n + d] as f64;
            assert!(
                (got - lambda).abs() < 5.0 * lambda.sqrt(),
                "pair {o}->{d}: {got} vs {lambda}"
            );
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn request_ids_are_sequential_from_the_given_start() {
    let sc = ScenarioFile::desk().build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rs = sc.demand.sample_requests(100, 42, &mut rng);
    for (i, r) in rs.iter().enumerate() {
        assert_eq!(r.id, 42 + i as u64);
    }
}
