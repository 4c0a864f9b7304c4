use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::testkit::{IndicativeTest, PassFailTest, TestSuite, Trajectory};

/// Constants of the point-mass task. Every field can be overridden from the
/// run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassConfig {
    pub dt: f64,
    pub horizon: usize,
    pub v_cap: f64,
    pub goal: [f64; 2],
    pub start: [f64; 2],
    /// Half-width of a uniform perturbation of the start position. 0 disables it.
    pub start_jitter: f64,
    pub goal_radius: f64,
    pub speed_fraction: f64,
    pub energy_budget: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 200,
            v_cap: 2.0,
            goal: [3.0, 3.0],
            start: [0.0, 0.0],
            start_jitter: 0.0,
            goal_radius: 0.1,
            speed_fraction: 0.9,
            energy_budget: 40.0,
        }
    }
}

impl PointMassConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("v_cap", self.v_cap),
            ("goal_radius", self.goal_radius),
            ("speed_fraction", self.speed_fraction),
            ("energy_budget", self.energy_budget),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config {
                    key: format!("env.{key}"),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config {
                key: "env.horizon".into(),
                message: "must be at least 1".into(),
            });
        }
        if !(self.start_jitter.is_finite() && self.start_jitter >= 0.0) {
            return Err(Error::Config {
                key: "env.start_jitter".into(),
                message: format!("must be non-negative, got {}", self.start_jitter),
            });
        }
        Ok(())
    }

    fn speed_limit(&self) -> f64 {
        self.speed_fraction * self.v_cap
    }
}

/// Double integrator on the plane. State `(x, y, vx, vy)`, action is an
/// acceleration in `[-1, 1]^2`. Position integrates the old velocity, then
/// velocity is updated and clipped per component to `±v_cap`.
#[derive(Debug, Clone)]
pub struct PointMassReach {
    config: PointMassConfig,
    state: [f64; 4],
    t: usize,
}

impl PointMassReach {
    pub fn new(config: PointMassConfig) -> Result<Self> {
        config.validate()?;
        let state = [config.start[0], config.start[1], 0.0, 0.0];
        Ok(Self { config, state, t: 0 })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.config
    }

    pub fn suite(&self) -> Result<TestSuite> {
        suite(&self.config)
    }

    /// Next state without touching the environment.
    pub fn dynamics(config: &PointMassConfig, state: &[f64], action: &[f64]) -> [f64; 4] {
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        let cap = config.v_cap;
        [
            state[0] + state[2] * config.dt,
            state[1] + state[3] * config.dt,
            (state[2] + a[0] * config.dt).clamp(-cap, cap),
            (state[3] + a[1] * config.dt).clamp(-cap, cap),
        ]
    }
}

impl Environment for PointMassReach {
    fn name(&self) -> &'static str {
        "point-mass-reach"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_low(&self) -> Vec<f64> {
        vec![-1.0, -1.0]
    }

    fn action_high(&self) -> Vec<f64> {
        vec![1.0, 1.0]
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let j = self.config.start_jitter;
        let (dx, dy) = if j > 0.0 {
            (rng.random_range(-j..=j), rng.random_range(-j..=j))
        } else {
            (0.0, 0.0)
        };
        self.state = [self.config.start[0] + dx, self.config.start[1] + dy, 0.0, 0.0];
        self.t = 0;
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<Step> {
        if action.len() != 2 {
            return Err(Error::DimensionMismatch {
                context: "point-mass action",
                expected: 2,
                actual: action.len(),
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("point-mass action {action:?}")));
        }
        self.state = Self::dynamics(&self.config, &self.state, action);
        self.t += 1;
        Ok(Step {
            next_state: self.state.to_vec(),
            done: self.t >= self.config.horizon,
            terminal: false,
        })
    }

    fn snapshot(&self) -> Vec<f64> {
        let mut out = self.state.to_vec();
        out.push(self.t as f64);
        out
    }

    fn restore(&mut self, snapshot: &[f64]) -> Result<()> {
        if snapshot.len() != 5 {
            return Err(super::bad_snapshot(5, snapshot.len()));
        }
        self.state.copy_from_slice(&snapshot[..4]);
        self.t = snapshot[4] as usize;
        Ok(())
    }
}

fn goal_distance(goal: [f64; 2], s: &[f64]) -> f64 {
    (s[0] - goal[0]).hypot(s[1] - goal[1])
}

fn energy(traj: &Trajectory) -> f64 {
    traj.transitions().iter().map(|tr| tr.action.iter().map(|a| a * a).sum::<f64>()).sum()
}

fn max_speed(traj: &Trajectory) -> f64 {
    traj.states().map(|s| s[2].hypot(s[3])).fold(0.0, f64::max)
}

/// The point-mass suite: `pf-reach`, `pf-speed-limit`, `pf-energy` and the
/// matching margins `ind-progress`, `ind-speed-margin`, `ind-energy-margin`.
pub fn suite(config: &PointMassConfig) -> Result<TestSuite> {
    let c = config.clone();
    let (goal, radius, limit, budget) = (c.goal, c.goal_radius, c.speed_limit(), c.energy_budget);
    TestSuite::new(
        vec![
            PassFailTest::new("pf-reach", move |t| goal_distance(goal, t.final_state()) < radius),
            PassFailTest::new("pf-speed-limit", move |t| max_speed(t) <= limit),
            PassFailTest::new("pf-energy", move |t| energy(t) <= budget),
        ],
        vec![
            IndicativeTest::new("ind-progress", move |t| {
                let n = t.len() + 1;
                -t.states().map(|s| goal_distance(goal, s)).sum::<f64>() / n as f64
            }),
            IndicativeTest::new("ind-speed-margin", move |t| limit - max_speed(t)),
            IndicativeTest::new("ind-energy-margin", move |t| budget - energy(t)),
        ],
    )
}
