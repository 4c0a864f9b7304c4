use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::maxent::exact::{ExactPolicy, TabularTrajectory, TrajectoryDistribution};
use crate::testkit::{IndicativeTest, PassFailTest, TestSuite, Trajectory};

pub const MAX_STATES: usize = 8;
pub const MAX_HORIZON: usize = 6;
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const STAY: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridChainConfig {
    pub states: usize,
    /// 2 (left, right) or 3 (left, right, stay).
    pub actions: usize,
    pub horizon: usize,
    /// Probability that a move fails and the agent stays put.
    pub slip: f64,
}

impl Default for GridChainConfig {
    fn default() -> Self {
        Self {
            states: 5,
            actions: 3,
            horizon: 5,
            slip: 0.0,
        }
    }
}

/// States `0..N` on a line, start at 0. Moves off either end leave the state
/// unchanged. A failed move (probability `slip`) also leaves it unchanged.
#[derive(Debug, Clone)]
pub struct GridChain {
    config: GridChainConfig,
    state: usize,
    t: usize,
}

impl GridChain {
    pub fn new(config: GridChainConfig) -> Result<Self> {
        let bad = |key: &str, message: String| Error::Config {
            key: format!("env.{key}"),
            message,
        };
        if !(2..=MAX_STATES).contains(&config.states) {
            return Err(bad("states", format!("must be in 2..={MAX_STATES}, got {}", config.states)));
        }
        if !(2..=3).contains(&config.actions) {
            return Err(bad("actions", format!("must be 2 or 3, got {}", config.actions)));
        }
        if !(1..=MAX_HORIZON).contains(&config.horizon) {
            return Err(bad("horizon", format!("must be in 1..={MAX_HORIZON}, got {}", config.horizon)));
        }
        if !(0.0..1.0).contains(&config.slip) {
            return Err(bad("slip", format!("must be in [0, 1), got {}", config.slip)));
        }
        Ok(Self {
            config,
            state: 0,
            t: 0,
        })
    }

    pub fn config(&self) -> &GridChainConfig {
        &self.config
    }

    pub fn num_states(&self) -> usize {
        self.config.states
    }

    pub fn num_actions(&self) -> usize {
        self.config.actions
    }

    pub fn goal(&self) -> usize {
        self.config.states - 1
    }

    fn target(&self, s: usize, a: usize) -> usize {
        match a {
            LEFT => s.saturating_sub(1),
            RIGHT => (s + 1).min(self.config.states - 1),
            _ => s,
        }
    }

    /// Successor distribution of `(s, a)`, without zero-probability entries.
    pub fn transitions(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        let to = self.target(s, a);
        if to == s || self.config.slip == 0.0 {
            vec![(to, 1.0)]
        } else {
            vec![(to, 1.0 - self.config.slip), (s, self.config.slip)]
        }
    }

    pub fn suite(&self) -> Result<TestSuite> {
        suite(&self.config)
    }

    /// Exhaustive expansion of every action and outcome branch with positive
    /// probability, in lexicographic order of (action, outcome) choices.
    pub fn enumerate_trajectories(&self, policy: &ExactPolicy) -> Result<TrajectoryDistribution> {
        let (n, na, h) = (self.config.states, self.config.actions, self.config.horizon);
        let branches = if self.config.slip > 0.0 { 2 * na } else { na } as u128;
        let count = branches.checked_pow(h as u32).unwrap_or(u128::MAX);
        if count > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        if policy.horizon() != h || policy.num_states() != n || policy.num_actions() != na {
            return Err(Error::DimensionMismatch {
                context: "exact policy shape (horizon * states * actions)",
                expected: h * n * na,
                actual: policy.horizon() * policy.num_states() * policy.num_actions(),
            });
        }
        let mut out = Vec::new();
        let mut states = vec![0];
        let mut actions = Vec::new();
        self.expand(policy, &mut states, &mut actions, 1.0, &mut out);
        TrajectoryDistribution::new(out)
    }

    fn expand(
        &self,
        policy: &ExactPolicy,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        prob: f64,
        out: &mut Vec<(TabularTrajectory, f64)>,
    ) {
        let t = actions.len();
        if t == self.config.horizon {
            out.push((TabularTrajectory::new(states.clone(), actions.clone()), prob));
            return;
        }
        let s = states[t];
        for a in 0..self.config.actions {
            let pa = policy.prob(t, s, a);
            if pa == 0.0 {
                continue;
            }
            for (next, pt) in self.transitions(s, a) {
                states.push(next);
                actions.push(a);
                self.expand(policy, states, actions, prob * pa * pt, out);
                states.pop();
                actions.pop();
            }
        }
    }
}

impl Environment for GridChain {
    fn name(&self) -> &'static str {
        "grid-chain"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_low(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn action_high(&self) -> Vec<f64> {
        vec![(self.config.actions - 1) as f64]
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = 0;
        self.t = 0;
        vec![0.0]
    }

    /// The continuous action is rounded to the nearest action index.
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Step> {
        if action.len() != 1 {
            return Err(Error::DimensionMismatch {
                context: "grid-chain action",
                expected: 1,
                actual: action.len(),
            });
        }
        if !action[0].is_finite() {
            return Err(Error::NonFinite(format!("grid-chain action {}", action[0])));
        }
        let a = action[0].round().clamp(0.0, (self.config.actions - 1) as f64) as usize;
        let mut next = self.target(self.state, a);
        if next != self.state && self.config.slip > 0.0 && rng.random_bool(self.config.slip) {
            next = self.state;
        }
        self.state = next;
        self.t += 1;
        Ok(Step {
            next_state: vec![next as f64],
            done: self.t >= self.config.horizon,
            terminal: false,
        })
    }

    fn snapshot(&self) -> Vec<f64> {
        vec![self.state as f64, self.t as f64]
    }

    fn restore(&mut self, snapshot: &[f64]) -> Result<()> {
        if snapshot.len() != 2 {
            return Err(super::bad_snapshot(2, snapshot.len()));
        }
        self.state = snapshot[0] as usize;
        self.t = snapshot[1] as usize;
        Ok(())
    }
}

fn state_index(s: &[f64]) -> usize {
    s[0].round() as usize
}

fn moves_right(traj: &Trajectory) -> usize {
    traj.transitions()
        .iter()
        .filter(|tr| state_index(&tr.next_state) > state_index(&tr.state))
        .count()
}

/// `pf-goal`, `pf-no-revisit`, `ind-rightmost`, `ind-steps-right`.
pub fn suite(config: &GridChainConfig) -> Result<TestSuite> {
    let goal = config.states - 1;
    TestSuite::new(
        vec![
            PassFailTest::new("pf-goal", move |t| state_index(t.final_state()) == goal),
            PassFailTest::new("pf-no-revisit", |t| {
                let mut seen = [false; MAX_STATES + 1];
                t.states().all(|s| {
                    let i = state_index(s).min(MAX_STATES);
                    !std::mem::replace(&mut seen[i], true)
                })
            }),
        ],
        vec![
            IndicativeTest::new("ind-rightmost", |t| {
                t.states().map(state_index).max().unwrap_or(0) as f64
            }),
            IndicativeTest::new("ind-steps-right", |t| moves_right(t) as f64),
        ],
    )
}
