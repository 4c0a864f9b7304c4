//! Built-in environments and their test suites.

mod grid_chain;
mod point_mass;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testkit::TestSuite;

pub use grid_chain::{GridChain, GridChainConfig, ENUMERATION_LIMIT, LEFT, MAX_HORIZON, MAX_STATES, RIGHT, STAY};
pub use point_mass::{PointMassConfig, PointMassReach};

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    /// The episode is over.
    pub done: bool,
    /// The episode ended in an absorbing state. False when only the horizon
    /// was reached, so value targets keep bootstrapping through the cut.
    pub terminal: bool,
}

/// Fixed-horizon episodic environment with a box action space.
pub trait Environment {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_low(&self) -> Vec<f64>;
    fn action_high(&self) -> Vec<f64>;
    fn horizon(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// `done` is true exactly on the step that reaches the horizon.
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Step>;
    /// Internal state (including the step counter) for checkpointing.
    fn snapshot(&self) -> Vec<f64>;
    fn restore(&mut self, snapshot: &[f64]) -> Result<()>;
}

pub(crate) fn bad_snapshot(expected: usize, actual: usize) -> Error {
    Error::DimensionMismatch {
        context: "environment snapshot",
        expected,
        actual,
    }
}

/// Environment selection as it appears in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvConfig {
    PointMassReach(PointMassConfig),
    GridChain(GridChainConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::PointMassReach(PointMassConfig::default())
    }
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::PointMassReach(_) => "point-mass-reach",
            EnvConfig::GridChain(_) => "grid-chain",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvConfig::PointMassReach(c) => Box::new(PointMassReach::new(c.clone())?),
            EnvConfig::GridChain(c) => Box::new(GridChain::new(c.clone())?),
        })
    }

    pub fn suite(&self) -> Result<TestSuite> {
        match self {
            EnvConfig::PointMassReach(c) => point_mass::suite(c),
            EnvConfig::GridChain(c) => grid_chain::suite(c),
        }
    }
}

/// Default-constant suite for a built-in environment name.
pub fn builtin_suite(name: &str) -> Result<TestSuite> {
    match name {
        "point-mass-reach" => point_mass::suite(&PointMassConfig::default()),
        "grid-chain" => grid_chain::suite(&GridChainConfig::default()),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}
