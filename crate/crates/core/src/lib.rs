//! Mobility-on-demand fleet simulation with choice-based dynamic pricing.
//!
//! The crate is organised bottom-up: a congestible grid [`network`], Poisson
//! trip [`demand`], a logit traveller [`choice`] model, the request-level
//! [`pricing`] solver, pricing [`policy`] strategies, the [`fleet`] of
//! vehicles, the episode [`engine`], and CMA-ES [`trainer`] for policy
//! parameters. [`scenario`] and [`commands`] back the command-line tool.

pub mod choice;
pub mod cma;
pub mod commands;
pub mod demand;
pub mod engine;
pub mod error;
pub mod fleet;
pub mod network;
pub mod policy;
pub mod pricing;
pub mod scenario;
pub mod trainer;

pub use error::{Error, Result};
