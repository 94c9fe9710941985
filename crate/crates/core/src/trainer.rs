//! Episodic training of the rollout policy parameters with CMA-ES.
//!
//! Every candidate of a generation is evaluated on the same block of seeds.
//! Training seeds live far above the small seeds used for evaluation so that
//! held-out comparisons never reuse a training episode.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cma::CmaEs;
use crate::engine::{run_episode, Scenario};
use crate::error::{Error, Result};
use crate::policy::{PolicyParams, Strategy};

/// First seed used for training episodes.
pub const TRAINING_SEED_ORIGIN: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaConfig {
    pub population: usize,
    pub runs_per_eval: usize,
    pub generations: usize,
    /// Starting θ, 10 values; zeros when absent.
    pub initial_mean: Option<Vec<f64>>,
    pub initial_sigma: f64,
    /// Also evaluate the distribution mean each generation as a candidate
    /// for the returned best.
    pub evaluate_mean: bool,
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig {
            population: 12,
            runs_per_eval: 10,
            generations: 20,
            initial_mean: None,
            initial_sigma: 0.5,
            evaluate_mean: true,
        }
    }
}

impl CmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::config("cma.population must be at least 4"));
        }
        if self.runs_per_eval == 0 {
            return Err(Error::config("cma.runs_per_eval must be at least 1"));
        }
        if !(self.initial_sigma > 0.0 && self.initial_sigma.is_finite()) {
            return Err(Error::config("cma.initial_sigma must be positive"));
        }
        self.start()?;
        Ok(())
    }

    pub fn start(&self) -> Result<PolicyParams> {
        match &self.initial_mean {
            Some(v) => PolicyParams::from_slice(v),
            None => Ok(PolicyParams::zero()),
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: CmaConfig = toml::from_str(text).map_err(|e| Error::toml(text, origin, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Seeds of generation `generation` for a training run started with `seed`.
pub fn training_seed_base(seed: u64, generation: usize, runs: usize) -> u64 {
    TRAINING_SEED_ORIGIN + (seed % (1 << 20)) * (1 << 20) + (generation * runs) as u64
}

/// Mean profit of PO(θ) over seeds `seed_base .. seed_base + runs`.
pub fn evaluate_policy(theta: &PolicyParams, scenario: &Scenario, runs: usize, seed_base: u64) -> Result<f64> {
    Ok(evaluate_many(std::slice::from_ref(theta), scenario, runs, seed_base)?[0])
}

/// Evaluates several parameter vectors on one shared seed block, in parallel.
pub fn evaluate_many(thetas: &[PolicyParams], scenario: &Scenario, runs: usize, seed_base: u64) -> Result<Vec<f64>> {
    if runs == 0 {
        return Err(Error::config("runs must be at least 1"));
    }
    let jobs: Vec<(usize, u64)> = (0..thetas.len())
        .flat_map(|c| (0..runs as u64).map(move |r| (c, seed_base + r)))
        .collect();
    let profits = jobs
        .par_iter()
        .map(|&(c, seed)| run_episode(scenario, &Strategy::Rollout(thetas[c]), seed).map(|r| r.profit))
        .collect::<Result<Vec<f64>>>()?;
    Ok(profits
        .chunks(runs)
        .map(|c| c.iter().sum::<f64>() / runs as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub seed_base: u64,
    pub runs: usize,
    /// Best candidate fitness in this generation.
    pub best: f64,
    /// Mean fitness over the generation's candidates.
    pub mean: f64,
    /// Fitness of the distribution mean, when evaluated.
    pub mean_theta_fitness: Option<f64>,
    pub best_so_far: f64,
    pub sigma: f64,
    /// Distribution mean after the update.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub generations: Vec<GenerationRecord>,
}

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,seed_base,runs,best,mean,mean_theta_fitness,best_so_far,sigma");
        for n in PolicyParams::header().split(',') {
            let _ = write!(out, ",mean.{n}");
        }
        out.push('\n');
        for g in &self.generations {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                g.generation,
                g.seed_base,
                g.runs,
                g.best,
                g.mean,
                g.mean_theta_fitness.map(|v| v.to_string()).unwrap_or_default(),
                g.best_so_far,
                g.sigma
            );
            for v in &g.theta {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub theta: PolicyParams,
    /// Evaluated fitness of `theta` on the seeds it was selected on.
    pub fitness: f64,
    pub trace: TrainingTrace,
}

/// Runs CMA-ES over θ. Parallel work uses the ambient rayon pool.
pub fn train(scenario: &Scenario, cfg: &CmaConfig, seed: u64) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let start = cfg.start()?;
    let runs = cfg.runs_per_eval;
    let mut es = CmaEs::new(&start.to_vec(), cfg.initial_sigma, cfg.population, seed)?;
    let mut trace = TrainingTrace::default();

    if cfg.generations == 0 {
        let fitness = evaluate_policy(&start, scenario, runs, training_seed_base(seed, 0, runs))?;
        return Ok(TrainingOutcome {
            theta: start,
            fitness,
            trace,
        });
    }

    let mut best: Option<(PolicyParams, f64)> = None;
    for g in 0..cfg.generations {
        let base = training_seed_base(seed, g, runs);
        let raw = es.ask();
        let mut thetas = raw
            .iter()
            .map(|v| PolicyParams::from_slice(v))
            .collect::<Result<Vec<_>>>()?;
        let mean_theta = PolicyParams::from_slice(es.mean())?;
        if cfg.evaluate_mean {
            thetas.push(mean_theta);
        }
        let fitness = evaluate_many(&thetas, scenario, runs, base)?;
        let (cand_fit, mean_fit) = fitness.split_at(raw.len());
        es.tell(&raw, cand_fit)?;

        for (th, &f) in thetas.iter().zip(&fitness) {
            if best.as_ref().is_none_or(|(_, b)| f > *b) {
                best = Some((*th, f));
            }
        }
        let gen_best = cand_fit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gen_mean = cand_fit.iter().sum::<f64>() / cand_fit.len() as f64;
        let best_so_far = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
        log::info!(
            "generation {g}: best {gen_best:.3} mean {gen_mean:.3} best-so-far {best_so_far:.3} sigma {:.4}",
            es.sigma()
        );
        trace.generations.push(GenerationRecord {
            generation: g,
            seed_base: base,
            runs,
            best: gen_best,
            mean: gen_mean,
            mean_theta_fitness: mean_fit.first().copied(),
            best_so_far,
            sigma: es.sigma(),
            theta: es.mean().to_vec(),
        });
    }
    let (theta, fitness) = best.expect("at least one generation ran");
    Ok(TrainingOutcome { theta, fitness, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = CmaConfig::default();
        assert_eq!((c.population, c.runs_per_eval, c.generations), (12, 10, 20));
        c.validate().unwrap();
        let bad = CmaConfig {
            initial_sigma: 0.0,
            ..CmaConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_usage());
        let bad = CmaConfig {
            population: 3,
            ..CmaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = CmaConfig {
            initial_mean: Some(vec![0.0; 9]),
            ..CmaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let c = CmaConfig {
            population: 6,
            runs_per_eval: 2,
            generations: 3,
            initial_mean: Some(vec![0.25; 10]),
            initial_sigma: 0.1,
            evaluate_mean: false,
        };
        let back = CmaConfig::parse(&c.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, c);
        let err = CmaConfig::parse("population = 6\nsigma = 1\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn seed_blocks_do_not_overlap() {
        let runs = 10;
        let a: Vec<u64> = (0..20).map(|g| training_seed_base(0, g, runs)).collect();
        assert!(a.windows(2).all(|w| w[1] - w[0] == runs as u64));
        assert!(training_seed_base(1, 0, runs) > a[19] + runs as u64);
        assert!(a[0] >= TRAINING_SEED_ORIGIN);
    }
}
