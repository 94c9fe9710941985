use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mobility_pricing::commands::{
    compare, price, price_text, report, simulate, tradeoff_csv, train_policy, with_jobs, write_output, CompareRequest,
    OptionSpec, ScenarioSource, SeedSpec, SimulateRequest,
};
use mobility_pricing::engine::EpisodeRecord;
use mobility_pricing::Result;

#[derive(Parser)]
#[command(
    name = "mobility-pricing",
    version,
    about = "Ride-hailing pricing simulator and policy trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes of one strategy and write per-seed results as CSV.
    Simulate(SimulateArgs),
    /// Train rollout policy parameters with CMA-ES.
    Train(TrainArgs),
    /// Run several strategies on common seeds and summarise them.
    Compare(CompareArgs),
    /// Summarise result files and build the congestion trade-off table.
    Report(ReportArgs),
    /// Solve one pricing problem and print the solver trace.
    Price(PriceArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario preset (desk or paper) used when no file is given.
    #[arg(long, default_value = "desk")]
    preset: String,
}

impl ScenarioArgs {
    fn source(&self) -> ScenarioSource {
        match &self.scenario {
            Some(p) => ScenarioSource::File(p.clone()),
            None => ScenarioSource::Preset(self.preset.clone()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Seed set: a count starting at --seed, a range a..b, or a list a,b,c.
    #[arg(long, default_value = "10")]
    seeds: String,
    /// First seed when --seeds is a count.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 uses every core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl RunArgs {
    fn seeds(&self) -> Result<Vec<u64>> {
        Ok(self.seeds.parse::<SeedSpec>()?.seeds(self.seed))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    run: RunArgs,
    /// S, Sh, S+Sh, PM, PO or none.
    #[arg(long)]
    strategy: String,
    /// Policy parameter file, required for PO.
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Results CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-seed trip logs and step traces.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// CMA-ES settings TOML.
    #[arg(long)]
    cma: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Trained parameter file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-generation training trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "S,Sh,S+Sh,PM")]
    strategy: Vec<String>,
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Summary table (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-episode results CSV.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV files written by simulate or compare.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Trade-off CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-setting summary tables.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// service:fare:cost:minutes[:opportunity_cost], repeatable.
    #[arg(long = "option", required = true)]
    options: Vec<String>,
    /// Travel time of the original mode in minutes.
    #[arg(long)]
    outside_minutes: f64,
    /// Monetary cost of the original mode.
    #[arg(long, default_value_t = 0.0)]
    outside_cost: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let req = SimulateRequest {
                scenario: a.scenario.source(),
                strategy: a.strategy,
                theta: a.theta,
                seeds: a.run.seeds()?,
                detail_dir: a.details,
            };
            let records = with_jobs(a.run.jobs, || simulate(&req))??;
            write_output(a.out.as_deref(), &EpisodeRecord::to_csv(&records))
        }
        Command::Train(a) => {
            let source = a.scenario.source();
            let outcome = with_jobs(a.jobs, || train_policy(&source, a.cma.as_deref(), a.seed))??;
            log::info!("best training fitness {:.3}", outcome.fitness);
            if let Some(p) = &a.trace {
                write_output(Some(p), &outcome.trace.to_csv())?;
            }
            match &a.out {
                Some(p) => outcome.theta.write(p),
                None => write_output(None, &outcome.theta.to_text()),
            }
        }
        Command::Compare(a) => {
            let req = CompareRequest {
                scenario: a.scenario.source(),
                strategies: a.strategy,
                theta: a.theta,
                seeds: a.run.seeds()?,
            };
            let (rep, records) = with_jobs(a.run.jobs, || compare(&req))??;
            if let Some(p) = &a.results {
                write_output(Some(p), &EpisodeRecord::to_csv(&records))?;
            }
            if let Some(p) = &a.csv {
                write_output(Some(p), &rep.to_csv())?;
            }
            write_output(a.out.as_deref(), &rep.to_text())
        }
        Command::Report(a) => {
            let (reports, rows) = report(&a.inputs)?;
            if let Some(p) = &a.summary {
                let text: String = reports.iter().map(|r| r.to_text() + "\n").collect();
                write_output(Some(p), &text)?;
            }
            write_output(a.out.as_deref(), &tradeoff_csv(&rows))
        }
        Command::Price(a) => {
            let scenario = a.scenario.source().load()?.build()?;
            let options = a
                .options
                .iter()
                .map(|s| s.parse::<OptionSpec>())
                .collect::<Result<Vec<_>>>()?;
            let (inst, sol) = price(&options, a.outside_minutes, a.outside_cost, &scenario.choice)?;
            write_output(None, &price_text(&inst, &sol))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
