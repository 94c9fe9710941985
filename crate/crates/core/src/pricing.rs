//! Request-level price optimisation under a multinomial logit choice model.
//!
//! For offered options j with base utilities U_{j0}, margins m_j and fare
//! adjustments δ_j, the operator maximises
//!
//! ```text
//!   Σ_j V_{j0} e^{S_j(δ_j)} (m_j + δ_j) / (Σ_j V_{j0} e^{S_j(δ_j)} + V_0)
//! ```
//!
//! where V_{j0} = e^{U_{j0}}, V_0 is the rejection weight and
//! S(δ) = -ẽ₁ min(0, δ) - ẽ₂ max(0, δ) is the utility shift of an adjustment.
//! The optimum z* is the unique root of the decreasing convex function
//! h(z) = max_δ Σ_j V_{j0} e^{S_j(δ_j)} (m_j - z + δ_j) - V_0 z, and Newton's
//! method on h started at z = 0 reduces to alternating a closed-form δ update
//! with a z update equal to the objective itself.

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceParams, ServiceType};
use crate::error::{Error, Result};

/// Sensitivities of utility to fare reductions and surges, already multiplied
/// by the choice scale μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub discount: f64,
    pub surge: f64,
}

impl Sensitivity {
    pub fn from_choice(p: &ChoiceParams) -> Self {
        Sensitivity {
            discount: p.scale * p.discount_sensitivity,
            surge: p.scale * p.surge_sensitivity,
        }
    }

    /// Utility shift S(δ) caused by a fare adjustment δ.
    pub fn utility_shift(&self, delta: f64) -> f64 {
        -self.discount * delta.min(0.0) - self.surge * delta.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingOption {
    pub service: ServiceType,
    pub fare: f64,
    pub cost: f64,
    pub travel_time: f64,
    /// Utility of the option at δ = 0.
    pub base_utility: f64,
    /// Opportunity cost charged against the option; zero for myopic pricing.
    pub opportunity_cost: f64,
}

impl PricingOption {
    pub fn margin(&self) -> f64 {
        self.fare - self.cost - self.opportunity_cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingInstance {
    pub options: Vec<PricingOption>,
    /// V_0 = e^{U_0}
    pub rejection_weight: f64,
    pub single: Sensitivity,
    pub shared: Sensitivity,
    /// Optional clamp on every δ.
    pub bounds: Option<(f64, f64)>,
}

impl PricingInstance {
    pub fn new(
        options: Vec<PricingOption>,
        rejection_weight: f64,
        single: Sensitivity,
        shared: Sensitivity,
    ) -> Result<Self> {
        let inst = PricingInstance {
            options,
            rejection_weight,
            single,
            shared,
            bounds: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= 0.0 && 0.0 <= hi) {
            return Err(Error::config("adjustment bounds must contain 0"));
        }
        self.bounds = Some((lo, hi));
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rejection_weight > 0.0 && self.rejection_weight.is_finite()) {
            return Err(Error::config("pricing: rejection weight must be positive"));
        }
        for s in [self.single, self.shared] {
            if !(s.surge > s.discount && s.discount > 0.0) {
                return Err(Error::config("pricing: need surge > discount > 0"));
            }
        }
        if self
            .options
            .iter()
            .any(|o| !o.base_utility.is_finite() || !o.margin().is_finite())
        {
            return Err(Error::config("pricing: option utilities and margins must be finite"));
        }
        Ok(())
    }

    pub fn sensitivity(&self, service: ServiceType) -> Sensitivity {
        match service {
            ServiceType::Single => self.single,
            ServiceType::Shared => self.shared,
        }
    }

    /// Selection weight V_{j0} e^{S(δ)} of option `j` at adjustment `delta`.
    pub fn weight(&self, j: usize, delta: f64) -> f64 {
        let o = &self.options[j];
        (o.base_utility + self.sensitivity(o.service).utility_shift(delta)).exp()
    }

    fn clamp(&self, delta: f64) -> f64 {
        match self.bounds {
            Some((lo, hi)) => delta.clamp(lo, hi),
            None => delta,
        }
    }
}

/// Expected margin per request for the given adjustments.
pub fn expected_profit(deltas: &[f64], inst: &PricingInstance) -> f64 {
    let mut num = 0.0;
    let mut den = inst.rejection_weight;
    for (j, (o, &d)) in inst.options.iter().zip(deltas).enumerate() {
        let w = inst.weight(j, d);
        num += w * (o.margin() + d);
        den += w;
    }
    num / den
}

/// Per-option maximiser of e^{S(δ)} (m_j - z + δ).
pub fn delta_update(z: f64, inst: &PricingInstance) -> Vec<f64> {
    inst.options
        .iter()
        .map(|o| {
            let s = inst.sensitivity(o.service);
            let gap = z - o.margin();
            let discount = gap + 1.0 / s.discount;
            let surge = gap + 1.0 / s.surge;
            let d = if discount < 0.0 {
                discount
            } else if surge > 0.0 {
                surge
            } else {
                0.0
            };
            inst.clamp(d)
        })
        .collect()
}

/// Newton step on h, which equals the objective at the updated adjustments.
pub fn z_update(deltas: &[f64], inst: &PricingInstance) -> f64 {
    expected_profit(deltas, inst)
}

/// h(z) = max_δ Σ V_{j0} e^{S(δ_j)} (m_j - z + δ_j) - V_0 z.
pub fn verify_fixed_point(z: f64, inst: &PricingInstance) -> f64 {
    let deltas = delta_update(z, inst);
    let inner: f64 = inst
        .options
        .iter()
        .zip(&deltas)
        .enumerate()
        .map(|(j, (o, &d))| inst.weight(j, d) * (o.margin() - z + d))
        .sum();
    inner - inst.rejection_weight * z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingSolution {
    pub adjustments: Vec<f64>,
    /// Optimal expected margin z*.
    pub value: f64,
    pub iterations: usize,
    /// |h(z*)|
    pub residual: f64,
    /// z iterates starting from z⁰ = 0.
    pub iterates: Vec<f64>,
}

pub fn solve_pricing(inst: &PricingInstance, cfg: &SolverConfig) -> Result<PricingSolution> {
    if inst.options.is_empty() {
        return Ok(PricingSolution {
            adjustments: Vec::new(),
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            iterates: vec![0.0],
        });
    }
    let mut z = 0.0;
    let mut iterates = vec![z];
    let mut deltas = Vec::new();
    for k in 1..=cfg.max_iterations {
        let candidate = delta_update(z, inst);
        let next = z_update(&candidate, inst);
        if next <= z && !deltas.is_empty() {
            // no ascent left at floating-point resolution
            return Ok(PricingSolution {
                residual: verify_fixed_point(z, inst).abs(),
                adjustments: deltas,
                value: z,
                iterations: k - 1,
                iterates,
            });
        }
        deltas = candidate;
        iterates.push(next);
        let step = (next - z).abs();
        z = next;
        if step <= cfg.tolerance {
            return Ok(PricingSolution {
                residual: verify_fixed_point(z, inst).abs(),
                adjustments: deltas,
                value: z,
                iterations: k,
                iterates,
            });
        }
    }
    let n = iterates.len();
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        last_value: z,
        last_step: (iterates[n - 1] - iterates[n - 2]).abs(),
        last_adjustments: deltas,
    })
}
