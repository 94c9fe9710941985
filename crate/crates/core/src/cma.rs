//! Covariance matrix adaptation evolution strategy, maximising fitness.
//!
//! Uses the standard (μ/μ_w, λ) recombination with cumulative step-size
//! adaptation and rank-one plus rank-μ covariance updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    pc: DVector<f64>,
    ps: DVector<f64>,
    basis: DMatrix<f64>,
    /// Square roots of the covariance eigenvalues.
    scales: DVector<f64>,
    generation: usize,
    rng: ChaCha8Rng,
}

impl CmaEs {
    pub fn new(mean: &[f64], sigma: f64, lambda: usize, seed: u64) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::config("cma: dimension must be positive"));
        }
        if lambda < 4 {
            return Err(Error::config("cma: population must be at least 4"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("cma: initial sigma must be positive"));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("cma: initial mean must be finite"));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(CmaEs {
            dim: n,
            lambda,
            weights,
            mu_eff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean: DVector::from_column_slice(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            pc: DVector::zeros(n),
            ps: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            generation: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn population(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Samples λ candidates from N(m, σ² C).
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut self.rng));
                let y = &self.basis * z.component_mul(&self.scales);
                (&self.mean + self.sigma * y).as_slice().to_vec()
            })
            .collect()
    }

    /// Updates the distribution from evaluated candidates; larger fitness is better.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        if candidates.len() != self.lambda || fitness.len() != self.lambda {
            return Err(Error::config(format!(
                "cma: expected {} candidates and fitness values",
                self.lambda
            )));
        }
        if candidates.iter().any(|c| c.len() != self.dim) {
            return Err(Error::config("cma: candidate dimension mismatch"));
        }
        if fitness.iter().any(|f| f.is_nan()) {
            return Err(Error::config("cma: fitness must not be NaN"));
        }
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

        let old = self.mean.clone();
        let steps: Vec<DVector<f64>> = order
            .iter()
            .take(self.weights.len())
            .map(|&i| (DVector::from_column_slice(&candidates[i]) - &old) / self.sigma)
            .collect();
        let y_w = steps
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim), |acc, (y, w)| acc + y * *w);
        self.mean = &old + self.sigma * &y_w;

        let inv_sqrt = &self.basis * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d)) * self.basis.transpose();
        self.ps = (1.0 - self.cs) * &self.ps + (self.cs * (2.0 - self.cs) * self.mu_eff).sqrt() * (inv_sqrt * &y_w);
        let gen = (self.generation + 1) as f64;
        let ps_norm = self.ps.norm();
        let hsig =
            ps_norm / (1.0 - (1.0 - self.cs).powf(2.0 * gen)).sqrt() / self.chi_n < 1.4 + 2.0 / (self.dim as f64 + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        self.pc = (1.0 - self.cc) * &self.pc + h * (self.cc * (2.0 - self.cc) * self.mu_eff).sqrt() * &y_w;

        let rank_mu = steps
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, (y, w)| {
                acc + *w * y * y.transpose()
            });
        let rank_one = &self.pc * self.pc.transpose() + (1.0 - h) * self.cc * (2.0 - self.cc) * &self.cov;
        self.cov = (1.0 - self.c1 - self.cmu) * &self.cov + self.c1 * rank_one + self.cmu * rank_mu;
        // keep exact symmetry against rounding
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
        Ok(())
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let max = eig.eigenvalues.max().max(EIGEN_FLOOR);
        let floor = max * EIGEN_FLOOR;
        let mut repaired = false;
        let values = eig.eigenvalues.map(|v| {
            if v < floor {
                repaired = true;
                floor
            } else {
                v
            }
        });
        if repaired {
            log::warn!(
                "cma: covariance lost positive definiteness at generation {}; eigenvalues floored",
                self.generation
            );
            self.cov = &eig.eigenvectors * DMatrix::from_diagonal(&values) * eig.eigenvectors.transpose();
        }
        self.basis = eig.eigenvectors;
        self.scales = values.map(f64::sqrt);
    }
}

/// One generation-synchronous update: thin wrapper over [`CmaEs::tell`].
pub fn cma_step(state: &mut CmaEs, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
    state.tell(candidates, fitness)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64], x0: &[f64]) -> f64 {
        -x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(CmaEs::new(&[0.0; 3], 0.0, 8, 1).is_err());
        assert!(CmaEs::new(&[0.0; 3], 1.0, 3, 1).is_err());
        assert!(CmaEs::new(&[], 1.0, 8, 1).is_err());
    }

    #[test]
    fn identical_candidates_at_mean_leave_mean_unchanged() {
        let mut es = CmaEs::new(&[0.3, -0.2], 0.5, 6, 1).unwrap();
        let cands = vec![vec![0.3, -0.2]; 6];
        es.tell(&cands, &[1.0; 6]).unwrap();
        assert_eq!(es.mean(), &[0.3, -0.2]);
    }

    #[test]
    fn equal_fitness_of_identical_points_moves_mean_to_them() {
        let mut es = CmaEs::new(&[0.0, 0.0], 0.5, 6, 1).unwrap();
        let cands = vec![vec![1.0, 2.0]; 6];
        es.tell(&cands, &[0.0; 6]).unwrap();
        assert!((es.mean()[0] - 1.0).abs() < 1e-12 && (es.mean()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn converges_on_sphere() {
        let x0: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 5.0).collect();
        let mut es = CmaEs::new(&[0.0; 10], 0.5, 12, 42).unwrap();
        for _ in 0..150 {
            let c = es.ask();
            let f: Vec<f64> = c.iter().map(|x| sphere(x, &x0)).collect();
            es.tell(&c, &f).unwrap();
        }
        let d: f64 = -sphere(es.mean(), &x0);
        assert!(d.sqrt() < 1e-3, "distance {}", d.sqrt());
    }

    #[test]
    fn same_seed_same_samples() {
        let mut a = CmaEs::new(&[0.0; 4], 1.0, 8, 9).unwrap();
        let mut b = CmaEs::new(&[0.0; 4], 1.0, 8, 9).unwrap();
        assert_eq!(a.ask(), b.ask());
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut es = CmaEs::new(&[1.0; 5], 0.3, 10, 3).unwrap();
        for _ in 0..60 {
            let c = es.ask();
            let f: Vec<f64> = c
                .iter()
                .map(|x| {
                    -x.iter()
                        .enumerate()
                        .map(|(i, v)| 10f64.powi(i as i32) * v * v)
                        .sum::<f64>()
                })
                .collect();
            es.tell(&c, &f).unwrap();
        }
        let cov = es.covariance();
        assert_eq!(cov, &cov.transpose());
        assert!(SymmetricEigen::new(cov.clone()).eigenvalues.min() > 0.0);
    }
}
