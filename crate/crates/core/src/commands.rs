//! The operations behind the command-line tool, usable from code and tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::choice::{option_utility, outside_utility, ChoiceParams, ServiceType};
use crate::engine::{
    run_episode, run_episode_detailed, trip_log_csv, EpisodeRecord, EpisodeResult, RunOptions, Scenario, StepTrace,
};
use crate::error::{Error, Result};
use crate::fleet::Tariff;
use crate::policy::{PolicyParams, Strategy};
use crate::pricing::{solve_pricing, PricingInstance, PricingOption, PricingSolution, Sensitivity, SolverConfig};
use crate::scenario::ScenarioFile;
use crate::trainer::{train, CmaConfig, TrainingOutcome};

/// A set of episode seeds: a count starting at a base seed, a half-open range
/// `a..b`, or an explicit list `a,b,c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSpec {
    Count(u64),
    Range(u64, u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (base..base + n).collect(),
            SeedSpec::Range(a, b) => (*a..*b).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

impl FromStr for SeedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("invalid seed set `{s}` (use N, a..b or a,b,c)"));
        let s = s.trim();
        let spec = if let Some((a, b)) = s.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b <= a {
                return Err(bad());
            }
            SeedSpec::Range(a, b)
        } else if s.contains(',') {
            let v = s
                .split(',')
                .map(|x| x.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            SeedSpec::List(v)
        } else {
            let n: u64 = s.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            SeedSpec::Count(n)
        };
        Ok(spec)
    }
}

/// Where the scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Preset(String),
}

impl ScenarioSource {
    pub fn load(&self) -> Result<ScenarioFile> {
        match self {
            ScenarioSource::File(p) => ScenarioFile::read(p),
            ScenarioSource::Preset(name) => ScenarioFile::preset(name),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        self.load()?.build()
    }
}

/// Runs `f` on a pool of `jobs` worker threads (0 = all cores).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Resolves strategy names, reading θ when any of them is `PO`.
pub fn resolve_strategies(names: &[String], theta: Option<&Path>) -> Result<Vec<Strategy>> {
    if names.is_empty() {
        return Err(Error::config("no strategy given"));
    }
    let needs_theta = names
        .iter()
        .any(|n| matches!(n.trim().to_ascii_lowercase().as_str(), "po" | "rollout"));
    let params = match (needs_theta, theta) {
        (true, Some(p)) => Some(PolicyParams::read(p)?),
        (true, None) => return Err(Error::config("strategy PO requires --theta")),
        (false, _) => None,
    };
    names.iter().map(|n| Strategy::from_name(n, params)).collect()
}

/// Runs every (strategy, seed) pair in parallel, returning rows in input order.
pub fn run_batch(scenario: &Scenario, strategies: &[Strategy], seeds: &[u64]) -> Result<Vec<EpisodeRecord>> {
    let jobs: Vec<(&Strategy, u64)> = strategies
        .iter()
        .flat_map(|s| seeds.iter().map(move |&x| (s, x)))
        .collect();
    let setting = scenario.setting();
    jobs.par_iter()
        .map(|&(s, seed)| {
            run_episode(scenario, s, seed).map(|result| EpisodeRecord {
                setting: setting.clone(),
                strategy: s.label().to_string(),
                seed,
                result,
            })
        })
        .collect()
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(format!("writing {}", p.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateRequest {
    pub scenario: ScenarioSource,
    pub strategy: String,
    pub theta: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Directory for per-seed trip logs and step traces.
    pub detail_dir: Option<PathBuf>,
}

pub fn simulate(req: &SimulateRequest) -> Result<Vec<EpisodeRecord>> {
    let scenario = req.scenario.build()?;
    let strategies = resolve_strategies(std::slice::from_ref(&req.strategy), req.theta.as_deref())?;
    let records = run_batch(&scenario, &strategies, &req.seeds)?;
    if let Some(dir) = &req.detail_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for &seed in &req.seeds {
            let out = run_episode_detailed(&scenario, &strategies[0], seed, RunOptions { record_trace: true })?;
            let stem = format!("{}_{seed}", strategies[0].label().replace('+', "_"));
            write_output(Some(&dir.join(format!("{stem}_trips.csv"))), &trip_log_csv(&out.trips))?;
            write_output(
                Some(&dir.join(format!("{stem}_steps.csv"))),
                &StepTrace::csv(&out.trace),
            )?;
        }
    }
    Ok(records)
}

pub fn train_policy(scenario: &ScenarioSource, cma: Option<&Path>, seed: u64) -> Result<TrainingOutcome> {
    let cfg = match cma {
        Some(p) => CmaConfig::read(p)?,
        None => CmaConfig::default(),
    };
    let scenario = scenario.build()?;
    train(&scenario, &cfg, seed)
}

/// Fields summarised by [`ComparisonReport`], in display order.
pub const REPORT_FIELDS: [&str; 15] = [
    "profit",
    "revenue",
    "cost",
    "serviced_passengers",
    "single",
    "shared",
    "original",
    "cancelled",
    "fleet_distance_km",
    "fleet_time_min",
    "awt_min",
    "capacity",
    "t_ave",
    "delta_d_km",
    "mean_adjustment",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, stderr, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: String,
    /// Per field in [`REPORT_FIELDS`] order.
    pub fields: Vec<Option<Summary>>,
    /// Percentage difference of each field mean against the reference.
    pub pct_vs_reference: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub setting: String,
    pub reference: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<StrategySummary>,
    /// Whether every strategy saw the same number of requests on each seed.
    pub common_requests: bool,
}

/// (x − ref) / ref in percent; absent when the reference is zero.
pub fn pct_diff(x: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * (x - reference) / reference)
}

impl ComparisonReport {
    /// Summarises records of one setting; the reference is PO when present.
    pub fn from_records(records: &[EpisodeRecord]) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        for r in records {
            if !order.contains(&r.strategy) {
                order.push(r.strategy.clone());
            }
        }
        if order.is_empty() {
            return Err(Error::config("no episode results to compare"));
        }
        let reference = if order.iter().any(|s| s == "PO") {
            "PO".to_string()
        } else {
            order[0].clone()
        };
        let field_values = |s: &str, f: &str| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.strategy == s)
                .filter_map(|r| r.result.get(f))
                .collect()
        };
        let ref_means: Vec<Option<f64>> = REPORT_FIELDS
            .iter()
            .map(|f| summarize(&field_values(&reference, f)).map(|s| s.mean))
            .collect();
        let rows = order
            .iter()
            .map(|s| {
                let fields: Vec<Option<Summary>> =
                    REPORT_FIELDS.iter().map(|f| summarize(&field_values(s, f))).collect();
                let pct = fields
                    .iter()
                    .zip(&ref_means)
                    .map(|(f, r)| match (f, r) {
                        (Some(f), Some(r)) => pct_diff(f.mean, *r),
                        _ => None,
                    })
                    .collect();
                StrategySummary {
                    strategy: s.clone(),
                    fields,
                    pct_vs_reference: pct,
                }
            })
            .collect();
        let mut per_seed: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for r in records {
            per_seed.entry(r.seed).or_default().push(r.result.requests);
        }
        let common_requests = per_seed.values().all(|v| v.windows(2).all(|w| w[0] == w[1]));
        Ok(ComparisonReport {
            setting: records[0].setting.clone(),
            reference,
            seeds: per_seed.keys().copied().collect(),
            rows,
            common_requests,
        })
    }

    pub fn row(&self, strategy: &str) -> Option<&StrategySummary> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn mean(&self, strategy: &str, field: &str) -> Option<f64> {
        let i = REPORT_FIELDS.iter().position(|f| *f == field)?;
        self.row(strategy)?.fields[i].map(|s| s.mean)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "setting {}  seeds {}  reference {}{}",
            self.setting,
            self.seeds.len(),
            self.reference,
            if self.common_requests {
                ""
            } else {
                "  (WARNING: request streams differ)"
            }
        );
        let _ = write!(out, "{:<20}", "metric");
        for r in &self.rows {
            let _ = write!(out, " {:>24}", r.strategy);
        }
        out.push('\n');
        for (i, f) in REPORT_FIELDS.iter().enumerate() {
            let _ = write!(out, "{f:<20}");
            for r in &self.rows {
                let cell = match (r.fields[i], r.pct_vs_reference[i]) {
                    (Some(s), Some(p)) => format!("{:.3}±{:.3} ({:+.2}%)", s.mean, s.stderr, p),
                    (Some(s), None) => format!("{:.3}±{:.3}", s.mean, s.stderr),
                    _ => "-".to_string(),
                };
                let _ = write!(out, " {cell:>24}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,strategy,field,mean,stderr,n,pct_vs_reference\n");
        for r in &self.rows {
            for (i, f) in REPORT_FIELDS.iter().enumerate() {
                let (mean, se, n) = r.fields[i].map_or((String::new(), String::new(), 0), |s| {
                    (s.mean.to_string(), s.stderr.to_string(), s.n)
                });
                let pct = r.pct_vs_reference[i].map(|p| p.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{f},{mean},{se},{n},{pct}", self.setting, r.strategy);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRequest {
    pub scenario: ScenarioSource,
    pub strategies: Vec<String>,
    pub theta: Option<PathBuf>,
    pub seeds: Vec<u64>,
}

pub fn compare(req: &CompareRequest) -> Result<(ComparisonReport, Vec<EpisodeRecord>)> {
    if req.strategies.len() < 2 {
        return Err(Error::config("compare needs at least two strategies"));
    }
    let scenario = req.scenario.build()?;
    let strategies = resolve_strategies(&req.strategies, req.theta.as_deref())?;
    let records = run_batch(&scenario, &strategies, &req.seeds)?;
    Ok((ComparisonReport::from_records(&records)?, records))
}

/// Congestion and capacity change of one strategy against the no-service
/// baseline of the same setting.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRecord {
    pub setting: String,
    pub strategy: String,
    pub d_tave_pct: Option<f64>,
    pub d_rho_pct: Option<f64>,
    pub delta_d: f64,
}

pub fn tradeoff(records: &[EpisodeRecord]) -> Result<Vec<TradeoffRecord>> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<&EpisodeResult>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.setting.as_str())
            .or_default()
            .entry(r.strategy.as_str())
            .or_default()
            .push(&r.result);
    }
    let mean = |rs: &[&EpisodeResult], f: &dyn Fn(&EpisodeResult) -> Option<f64>| {
        let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
        summarize(&v).map(|s| s.mean)
    };
    let mut out = Vec::new();
    for (setting, by_strategy) in groups {
        let others: Vec<_> = by_strategy.iter().filter(|(s, _)| **s != "none").collect();
        if others.is_empty() {
            continue;
        }
        let base = by_strategy
            .get("none")
            .ok_or_else(|| Error::config(format!("setting `{setting}` has no baseline rows (strategy `none`)")))?;
        let base_t = mean(base, &|r| r.t_ave);
        let base_rho = mean(base, &|r| r.capacity);
        for (strategy, rs) in others {
            let d = |m: Option<f64>, b: Option<f64>| match (m, b) {
                (Some(m), Some(b)) => pct_diff(m, b),
                _ => None,
            };
            out.push(TradeoffRecord {
                setting: setting.to_string(),
                strategy: strategy.to_string(),
                d_tave_pct: d(mean(rs, &|r| r.t_ave), base_t),
                d_rho_pct: d(mean(rs, &|r| r.capacity), base_rho),
                delta_d: mean(rs, &|r| Some(r.delta_d_km)).unwrap_or(0.0),
            });
        }
    }
    Ok(out)
}

pub fn tradeoff_csv(rows: &[TradeoffRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("setting,strategy,d_tave_pct,d_rho_pct,delta_d\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.setting,
            r.strategy,
            opt(r.d_tave_pct),
            opt(r.d_rho_pct),
            r.delta_d
        );
    }
    out
}

/// Reads result files and builds per-setting comparison reports and the
/// congestion/capacity trade-off table.
pub fn report(inputs: &[PathBuf]) -> Result<(Vec<ComparisonReport>, Vec<TradeoffRecord>)> {
    if inputs.is_empty() {
        return Err(Error::config("report needs at least one result file"));
    }
    let mut records = Vec::new();
    for p in inputs {
        records.extend(EpisodeRecord::read_csv(p)?);
    }
    let mut settings: Vec<String> = Vec::new();
    for r in &records {
        if !settings.contains(&r.setting) {
            settings.push(r.setting.clone());
        }
    }
    let reports = settings
        .iter()
        .map(|s| {
            let rs: Vec<EpisodeRecord> = records.iter().filter(|r| &r.setting == s).cloned().collect();
            ComparisonReport::from_records(&rs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reports, tradeoff(&records)?))
}

/// One option of a hand-built pricing problem for the `price` command:
/// `service:fare:cost:minutes[:opportunity_cost]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub service: ServiceType,
    pub fare: f64,
    pub cost: f64,
    pub minutes: f64,
    pub opportunity_cost: f64,
}

impl FromStr for OptionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| {
            Error::config(format!(
                "invalid option `{s}`: {m} (use service:fare:cost:minutes[:opp])"
            ))
        };
        let parts: Vec<&str> = s.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad("wrong number of fields"));
        }
        let service = match parts[0].to_ascii_lowercase().as_str() {
            "single" | "s" => ServiceType::Single,
            "shared" | "sh" => ServiceType::Shared,
            _ => return Err(bad("service must be single or shared")),
        };
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad("not a number"));
        Ok(OptionSpec {
            service,
            fare: num(parts[1])?,
            cost: num(parts[2])?,
            minutes: num(parts[3])?,
            opportunity_cost: parts.get(4).map_or(Ok(0.0), |x| num(x))?,
        })
    }
}

/// Solves a single pricing problem under the given choice parameters; the
/// rejection weight comes from the original-mode time and cost.
pub fn price(
    options: &[OptionSpec],
    outside_minutes: f64,
    outside_cost: f64,
    choice: &ChoiceParams,
) -> Result<(PricingInstance, PricingSolution)> {
    if !(outside_minutes.is_finite() && outside_minutes >= 0.0 && outside_cost.is_finite()) {
        return Err(Error::config("original-mode time must be non-negative and cost finite"));
    }
    let outside = outside_utility(outside_minutes, outside_cost, choice);
    let opts = options
        .iter()
        .map(|o| PricingOption {
            service: o.service,
            fare: o.fare,
            cost: o.cost,
            travel_time: o.minutes,
            base_utility: option_utility(o.service, o.fare, 0.0, o.minutes, choice),
            opportunity_cost: o.opportunity_cost,
        })
        .collect();
    let sens = Sensitivity::from_choice(choice);
    let inst = PricingInstance::new(opts, outside.rejection_weight, sens, sens)?;
    let sol = solve_pricing(&inst, &SolverConfig::default())?;
    Ok((inst, sol))
}

pub fn price_text(inst: &PricingInstance, sol: &PricingSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rejection weight V0 = {:.6}", inst.rejection_weight);
    for (j, o) in inst.options.iter().enumerate() {
        let _ = writeln!(
            out,
            "option {j}: {} fare {:.4} cost {:.4} minutes {:.2} U0 {:.6} margin {:.4}",
            o.service.as_str(),
            o.fare,
            o.cost,
            o.travel_time,
            o.base_utility,
            o.margin()
        );
    }
    for (k, z) in sol.iterates.iter().enumerate() {
        let _ = writeln!(out, "iteration {k}: z = {z:.12}");
    }
    for (j, d) in sol.adjustments.iter().enumerate() {
        let _ = writeln!(out, "delta[{j}] = {d:.6}");
    }
    let _ = writeln!(
        out,
        "z* = {:.9}  iterations {}  |h(z*)| = {:.3e}",
        sol.value, sol.iterations, sol.residual
    );
    out
}

/// Default fares and costs of a direct trip, for the `price` command.
pub fn direct_option(service: ServiceType, distance_km: f64, minutes: f64, tariff: &Tariff) -> OptionSpec {
    OptionSpec {
        service,
        fare: tariff.fare(service, distance_km, minutes),
        cost: tariff.cost(distance_km),
        minutes,
        opportunity_cost: 0.0,
    }
}
