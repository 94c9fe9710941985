use std::path::Path;
use std::process::{Command, Output};

use mobility_pricing::engine::EpisodeRecord;
use mobility_pricing::policy::PolicyParams;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobility-pricing"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn text(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_reproducible_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = bin(&[
            "simulate",
            "--strategy",
            "PM",
            "--seeds",
            "2",
            "--seed",
            "5",
            "--jobs",
            "1",
            "--out",
            path(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(text(&a), text(&b));
    let recs = EpisodeRecord::read_csv(&a).unwrap();
    assert_eq!(recs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6]);
    assert!(recs.iter().all(|r| r.strategy == "PM" && r.setting == "desk/medium"));
}

#[test]
fn job_count_does_not_change_results() {
    let one = bin(&["simulate", "--strategy", "S+Sh", "--seeds", "0..3", "--jobs", "1"]);
    let two = bin(&["simulate", "--strategy", "S+Sh", "--seeds", "0..3", "--jobs", "2"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn simulate_details_write_trip_logs_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("details");
    let o = bin(&["simulate", "--strategy", "Sh", "--seeds", "1", "--details", path(&det)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&det.join("Sh_0_trips.csv")).starts_with("request,vehicle,service"));
    assert!(text(&det.join("Sh_0_steps.csv")).lines().count() > 400);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["simulate", "--strategy", "XX", "--seeds", "1"],
        vec!["simulate", "--strategy", "PO", "--seeds", "1"],
        vec!["simulate", "--strategy", "PM", "--seeds", "0"],
        vec!["simulate", "--strategy", "PM", "--preset", "nowhere"],
        vec!["frobnicate"],
        vec!["compare", "--strategy", "PM"],
    ] {
        let o = bin(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn malformed_scenario_reports_the_line_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("bad.toml");
    std::fs::write(&sc, "fleet_size = 4\nhorizon = \"long\"\n").unwrap();
    let o = bin(&["simulate", "--scenario", path(&sc), "--strategy", "PM", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:2"), "{err}");
}

#[test]
fn missing_files_are_runtime_failures() {
    let o = bin(&["report", "/nonexistent/results.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bin(&[
        "simulate",
        "--strategy",
        "PO",
        "--theta",
        "/nonexistent/theta.txt",
        "--seeds",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_compare_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cma = dir.path().join("cma.toml");
    std::fs::write(
        &cma,
        "population = 4\nruns_per_eval = 1\ngenerations = 2\ninitial_sigma = 0.2\n",
    )
    .unwrap();
    let sc = dir.path().join("small.toml");
    std::fs::write(&sc, "name = \"small\"\nhorizon = 120\ndemand_total = 500\n").unwrap();
    let theta = dir.path().join("theta.txt");
    let trace = dir.path().join("trace.csv");
    let o = bin(&[
        "train",
        "--scenario",
        path(&sc),
        "--cma",
        path(&cma),
        "--seed",
        "3",
        "--jobs",
        "1",
        "--out",
        path(&theta),
        "--trace",
        path(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    PolicyParams::read(&theta).unwrap();
    assert_eq!(text(&trace).lines().count(), 3);

    let results = dir.path().join("results.csv");
    let summary = dir.path().join("summary.txt");
    let o = bin(&[
        "compare",
        "--scenario",
        path(&sc),
        "--strategy",
        "PO,PM,S,none",
        "--theta",
        path(&theta),
        "--seeds",
        "3",
        "--out",
        path(&summary),
        "--results",
        path(&results),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = text(&summary);
    assert!(s.contains("reference PO") && s.contains("profit"), "{s}");
    assert!(!s.contains("WARNING"));
    assert_eq!(EpisodeRecord::read_csv(&results).unwrap().len(), 12);

    let tradeoff = dir.path().join("tradeoff.csv");
    let o = bin(&["report", path(&results), "--out", path(&tradeoff)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = text(&tradeoff);
    assert!(t.starts_with("setting,strategy,d_tave_pct,d_rho_pct,delta_d\n"));
    assert_eq!(t.lines().count(), 4);
}

#[test]
fn report_without_baseline_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.csv");
    let o = bin(&["simulate", "--strategy", "S", "--seeds", "1", "--out", path(&results)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(bin(&["report", path(&results)]).status.code(), Some(2));
}

#[test]
fn price_prints_the_iteration_trace() {
    let o = bin(&[
        "price",
        "--option",
        "single:2.35:0.35:10",
        "--option",
        "shared:1.6:0.3:12",
        "--outside-minutes",
        "15",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(
        s.contains("iteration 0: z = 0.000000000000") && s.contains("z* ="),
        "{s}"
    );
}
