//! Traveller choice among the offered services, the original mode and cancelling.
//!
//! Utilities are expressed in dollars and multiplied by the scale factor μ.
//! Cancelling has utility exactly zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceType {
    Single,
    Shared,
}

impl ServiceType {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceType::Single => "single",
            ServiceType::Shared => "shared",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChoiceParams {
    /// Scale factor μ.
    pub scale: f64,
    /// Value of time, $/min.
    pub value_of_time: f64,
    pub asc_single: f64,
    pub asc_shared: f64,
    pub asc_original: f64,
    /// Sensitivity e₁ to fare reductions.
    pub discount_sensitivity: f64,
    /// Sensitivity e₂ to fare surges.
    pub surge_sensitivity: f64,
    /// Reliability multiplier b_v,sh on shared in-vehicle time.
    pub shared_time_factor: f64,
    /// Cost factor b_f,o of the original travel mode.
    pub original_cost_factor: f64,
}

impl Default for ChoiceParams {
    fn default() -> Self {
        ChoiceParams {
            scale: 0.5,
            value_of_time: 0.03,
            asc_single: 4.5,
            asc_shared: 4.0,
            asc_original: 5.0,
            discount_sensitivity: 1.0,
            surge_sensitivity: 2.0,
            shared_time_factor: 1.2,
            original_cost_factor: 2.5,
        }
    }
}

impl ChoiceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::config("choice.scale must be positive"));
        }
        if !(self.surge_sensitivity > self.discount_sensitivity && self.discount_sensitivity > 0.0) {
            return Err(Error::config(
                "choice: need surge_sensitivity > discount_sensitivity > 0",
            ));
        }
        if !(self.shared_time_factor >= 1.0) {
            return Err(Error::config("choice.shared_time_factor must be >= 1"));
        }
        if !(self.value_of_time >= 0.0) {
            return Err(Error::config("choice.value_of_time must be >= 0"));
        }
        Ok(())
    }
}

/// Disutility E(δ) of a fare adjustment, in dollars.
pub fn adjustment_disutility(delta: f64, p: &ChoiceParams) -> f64 {
    if delta < 0.0 {
        p.discount_sensitivity * delta
    } else {
        p.surge_sensitivity * delta
    }
}

pub fn option_utility(service: ServiceType, fare: f64, delta: f64, travel_time: f64, p: &ChoiceParams) -> f64 {
    let e = adjustment_disutility(delta, p);
    match service {
        ServiceType::Single => p.scale * (p.asc_single - p.value_of_time * travel_time - fare - e),
        ServiceType::Shared => {
            p.scale * (p.asc_shared - p.shared_time_factor * p.value_of_time * travel_time - fare - e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutsideUtility {
    /// U_o of the original travel mode.
    pub original: f64,
    /// e^{U_o} + e^{U_n}: the original mode and cancelling folded into one
    /// rejection alternative.
    pub rejection_weight: f64,
}

pub fn outside_utility(travel_time: f64, cost: f64, p: &ChoiceParams) -> OutsideUtility {
    let original = p.scale * (p.asc_original - p.value_of_time * travel_time - p.original_cost_factor * cost);
    OutsideUtility {
        original,
        rejection_weight: original.exp() + 1.0,
    }
}

/// Utilities of one choice situation. Cancelling is implicit with utility 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeUtilities {
    pub offers: Vec<f64>,
    pub original: f64,
}

impl AlternativeUtilities {
    pub const CANCEL: f64 = 0.0;
}

/// Index of the chosen alternative in the probability vector laid out as
/// offers, then original, then cancel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Offer(usize),
    Original,
    Cancel,
}

impl Choice {
    pub fn from_index(index: usize, offers: usize) -> Choice {
        match index.cmp(&offers) {
            std::cmp::Ordering::Less => Choice::Offer(index),
            std::cmp::Ordering::Equal => Choice::Original,
            std::cmp::Ordering::Greater => Choice::Cancel,
        }
    }
}

/// MNL probabilities over offers, original mode and cancel (in that order).
pub fn choice_probabilities(u: &AlternativeUtilities) -> Vec<f64> {
    let all: Vec<f64> = u
        .offers
        .iter()
        .copied()
        .chain([u.original, AlternativeUtilities::CANCEL])
        .collect();
    let shift = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = all.iter().map(|x| (x - shift).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Inverse-CDF draw; consumes exactly one uniform.
pub fn sample_choice<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
