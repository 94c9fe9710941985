//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::time::{Duration, Instant};

use common::{brute_force_z, instances};
use mobility_pricing::cma::CmaEs;
use mobility_pricing::demand::{CongestionLevel, NamedLevel};
use mobility_pricing::engine::{run_episode, run_episode_detailed, EpisodeResult, RunOptions, Scenario};
use mobility_pricing::policy::{PolicyParams, Strategy};
use mobility_pricing::pricing::{solve_pricing, verify_fixed_point, SolverConfig};
use mobility_pricing::scenario::ScenarioFile;
use mobility_pricing::trainer::{train, CmaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn profits(sc: &Scenario, s: &Strategy, seeds: &[u64]) -> Vec<EpisodeResult> {
    seeds.iter().map(|&x| run_episode(sc, s, x).unwrap()).collect()
}

fn pricing_criteria(rep: &mut Report) {
    let raws = instances(2024, 200);
    let cfg = SolverConfig::default();
    let start = Instant::now();
    let sols: Vec<_> = raws
        .iter()
        .map(|r| solve_pricing(&r.to_instance(), &cfg).expect("solver converges"))
        .collect();
    let solver_time = start.elapsed();

    let worst = raws
        .iter()
        .zip(&sols)
        .map(|(r, s)| (s.value - brute_force_z(r)).abs())
        .fold(0.0, f64::max);
    rep.line(
        1,
        "pricing solver vs brute force (200 instances, n in {1,2})",
        worst <= 1e-4 && solver_time < Duration::from_secs(5),
        format!(
            "max |z* - z_grid| = {worst:.2e} (tol 1e-4), solver time {:.3}s (limit 5s)",
            solver_time.as_secs_f64()
        ),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_residual: f64 = 0.0;
    let mut sign_errors = 0;
    for (r, s) in raws.iter().zip(&sols) {
        let inst = r.to_instance();
        max_residual = max_residual.max(verify_fixed_point(s.value, &inst).abs());
        for _ in 0..10 {
            let z = s.value + rng.random_range(-5.0..5.0);
            let h = r.h(z);
            if (h > 0.0) != (s.value > z) {
                sign_errors += 1;
            }
        }
    }
    rep.line(
        2,
        "root of h and sign agreement",
        max_residual <= 1e-8 && sign_errors == 0,
        format!("max |h(z*)| = {max_residual:.2e} (tol 1e-8), sign mismatches {sign_errors}/2000"),
    );

    let monotone = sols
        .iter()
        .all(|s| s.iterates[0] == 0.0 && s.iterates.windows(2).all(|w| w[1] >= w[0]));
    let max_iter = sols.iter().map(|s| s.iterations).max().unwrap();
    rep.line(
        3,
        "monotone Newton iterates from z0 = 0",
        monotone && max_iter <= 200,
        format!("non-decreasing on all instances: {monotone}, max iterations {max_iter} (limit 200)"),
    );
}

fn reduction_identity(rep: &mut Report, sc: &Scenario) {
    let zero = Strategy::Rollout(PolicyParams::zero());
    let seeds: Vec<u64> = (0..10).collect();
    let same = seeds
        .iter()
        .filter(|&&s| run_episode(sc, &zero, s).unwrap() == run_episode(sc, &Strategy::Myopic, s).unwrap())
        .count();
    rep.line(
        4,
        "PO(theta=0) equals PM",
        same == 10,
        format!("{same}/10 seeds with identical episode results"),
    );
}

fn cma_sphere(rep: &mut Report) {
    let x0: Vec<f64> = (0..10).map(|i| 0.3 * (i as f64) - 1.2).collect();
    let start = Instant::now();
    let mut es = CmaEs::new(&[0.0; 10], 0.5, 12, 2024).unwrap();
    let mut generations = 0;
    let mut dist = f64::INFINITY;
    while generations < 150 && dist >= 1e-3 {
        let c = es.ask();
        let f: Vec<f64> = c
            .iter()
            .map(|x| -x.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .collect();
        es.tell(&c, &f).unwrap();
        generations += 1;
        dist = es
            .mean()
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    let t = start.elapsed();
    rep.line(
        5,
        "CMA-ES on the 10-d sphere",
        dist < 1e-3 && t < Duration::from_secs(30),
        format!(
            "|mean - x0| = {dist:.2e} after {generations} generations (limit 150), {:.2}s",
            t.as_secs_f64()
        ),
    );
}

fn congestion_monotonicity(rep: &mut Report, sc: &Scenario) {
    let seeds: Vec<u64> = (0..10).collect();
    let t: Vec<f64> = [NamedLevel::Low, NamedLevel::Medium, NamedLevel::High]
        .iter()
        .map(|&l| {
            let s = sc.with_congestion(CongestionLevel::Named(l));
            mean(
                &profits(&s, &Strategy::Myopic, &seeds)
                    .iter()
                    .map(|r| r.t_ave.unwrap())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    rep.line(
        8,
        "mean T_ave rises with congestion (PM, 10 seeds)",
        t[0] < t[1] && t[1] < t[2],
        format!("low {:.4} < medium {:.4} < high {:.4} min/km", t[0], t[1], t[2]),
    );
}

fn invariants(rep: &mut Report, sc: &Scenario, theta: &PolicyParams) {
    let strategies = [
        Strategy::Single,
        Strategy::Shared,
        Strategy::Both,
        Strategy::Myopic,
        Strategy::Rollout(*theta),
        Strategy::None,
    ];
    let mut problems: Vec<String> = Vec::new();
    let mut episodes = 0;
    let mut worst_ledger: f64 = 0.0;
    let mut worst_detour = (0.0f64, 0.0f64);
    let mut most_parties = 0;
    let opts = RunOptions { record_trace: false };
    for seed in 0..10u64 {
        for s in &strategies {
            let out = run_episode_detailed(sc, s, seed, opts).unwrap();
            let again = run_episode_detailed(sc, s, seed, opts).unwrap();
            episodes += 1;
            let r = &out.result;
            let tag = format!("{} seed {seed}", s.label());
            if out != again {
                problems.push(format!("{tag}: repeated run differs"));
            }
            if r.requests != r.single + r.shared + r.original + r.cancelled {
                problems.push(format!("{tag}: outcome counts do not add up"));
            }
            if r.serviced_passengers != r.single + r.shared || out.trips.len() != r.serviced_passengers {
                problems.push(format!("{tag}: serviced passengers do not match bookings"));
            }
            let revenue: f64 = out.trips.iter().map(|p| p.fare + p.adjustment).sum();
            let ledger = (r.profit - (revenue - sc.tariff.fuel_cost * out.audit.odometer_km))
                .abs()
                .max((r.profit - (r.revenue - r.cost)).abs())
                .max((revenue - out.audit.booked_revenue).abs());
            worst_ledger = worst_ledger.max(ledger);
            most_parties = most_parties.max(out.audit.max_parties);
            worst_detour.0 = worst_detour.0.max(out.audit.max_detour_km);
            worst_detour.1 = worst_detour.1.max(out.audit.max_detour_min);
            if out.audit.violations > 0 || r.violations > 0 {
                problems.push(format!("{tag}: {} constraint violations", out.audit.violations));
            }
            for p in &out.trips {
                let order_ok = match (p.pickup_time, p.dropoff_time) {
                    (Some(a), Some(b)) => a >= p.confirm_time && b >= a,
                    (None, Some(_)) => false,
                    (Some(a), None) => a >= p.confirm_time,
                    (None, None) => true,
                };
                if !order_ok {
                    problems.push(format!("{tag}: request {} events out of order", p.request));
                }
            }
        }
    }
    let rules = &sc.rules;
    let pass = problems.is_empty()
        && worst_ledger <= 0.01
        && most_parties <= rules.capacity
        && worst_detour.0 <= rules.max_detour_km + 1e-6
        && worst_detour.1 <= rules.max_detour_min + 1e-6;
    for p in problems.iter().take(5) {
        println!("       {p}");
    }
    rep.line(
        10,
        "simulation invariants",
        pass,
        format!(
            "{episodes} episodes run twice; ledger gap {worst_ledger:.2e} (tol 0.01); max parties {most_parties} (cap {}); \
             max booked detour {:.3} km / {:.3} min (limits {} / {}); issues {}",
            rules.capacity,
            worst_detour.0,
            worst_detour.1,
            rules.max_detour_km,
            rules.max_detour_min,
            problems.len()
        ),
    );
}

fn main() {
    let mut rep = Report { failures: 0 };
    let sc = ScenarioFile::desk().build().expect("desk preset builds");

    pricing_criteria(&mut rep);
    reduction_identity(&mut rep, &sc);
    cma_sphere(&mut rep);

    let cfg = CmaConfig::default();
    let start = Instant::now();
    let outcome = train(&sc, &cfg, 1).expect("training runs");
    let train_time = start.elapsed();

    let seeds: Vec<u64> = (0..20).collect();
    let po = profits(&sc, &Strategy::Rollout(outcome.theta), &seeds);
    let pm = profits(&sc, &Strategy::Myopic, &seeds);
    let diffs: Vec<f64> = po.iter().zip(&pm).map(|(a, b)| a.profit - b.profit).collect();
    let d_mean = mean(&diffs);
    let d_sd = (diffs.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
    let t_stat = d_mean / (d_sd / (diffs.len() as f64).sqrt());
    let p_value = 1.0 - StudentsT::new(0.0, 1.0, (diffs.len() - 1) as f64).unwrap().cdf(t_stat);
    let po_mean = mean(&po.iter().map(|r| r.profit).collect::<Vec<_>>());
    let pm_mean = mean(&pm.iter().map(|r| r.profit).collect::<Vec<_>>());
    let margin = 100.0 * (po_mean - pm_mean) / pm_mean;
    rep.line(
        6,
        "trained PO beats PM on 20 held-out seeds",
        p_value < 0.05 && margin >= 3.0 && train_time < Duration::from_secs(1800),
        format!(
            "PO {po_mean:.2} vs PM {pm_mean:.2}, margin {margin:+.2}% (target >= 3%), paired t = {t_stat:.2}, \
             one-sided p = {p_value:.2e} (< 0.05); training {:.0}s ({} generations x {} candidates x {} runs, limit 1800s)",
            train_time.as_secs_f64(),
            cfg.generations,
            cfg.population + usize::from(cfg.evaluate_mean),
            cfg.runs_per_eval
        ),
    );

    let basic = [Strategy::Single, Strategy::Shared, Strategy::Both];
    let basic_res: Vec<Vec<EpisodeResult>> = basic.iter().map(|s| profits(&sc, s, &seeds)).collect();
    let basic_means: Vec<f64> = basic_res
        .iter()
        .map(|rs| mean(&rs.iter().map(|r| r.profit).collect::<Vec<_>>()))
        .collect();
    let best_basic = basic_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rep.line(
        7,
        "pricing strategies out-earn fixed-price strategies",
        pm_mean > best_basic && po_mean > best_basic,
        format!(
            "PO {po_mean:.2}, PM {pm_mean:.2} vs S {:.2}, Sh {:.2}, S+Sh {:.2}",
            basic_means[0], basic_means[1], basic_means[2]
        ),
    );

    congestion_monotonicity(&mut rep, &sc);

    let dd = |rs: &[EpisodeResult]| mean(&rs.iter().map(|r| r.delta_d_km).collect::<Vec<_>>());
    let (dd_s, dd_sh) = (dd(&basic_res[0]), dd(&basic_res[1]));
    rep.line(
        9,
        "sharing saves vehicle distance",
        dd_sh > dd_s,
        format!("mean delta_d: Sh {dd_sh:.1} km > S {dd_s:.1} km"),
    );

    invariants(&mut rep, &sc, &outcome.theta);

    println!("acceptance: {} criteria failed", rep.failures);
    if rep.failures > 0 {
        std::process::exit(1);
    }
}
