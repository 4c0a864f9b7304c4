use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::envs::EnvConfig;
use crate::error::Result;
use crate::maxent::GaussianPolicy;
use crate::testkit::{TestSuite, Trajectory, TrajectoryId, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Per-test results of rolling out a policy with its deterministic action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub pass_rates: Vec<NamedValue>,
    /// Fraction of episodes passing every pass-fail test.
    pub all_pass_rate: f64,
    pub indicative_means: Vec<NamedValue>,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = format!("episodes: {}\n", self.episodes);
        for v in &self.pass_rates {
            out.push_str(&format!("  {:<20} pass rate {:.3}\n", v.name, v.value));
        }
        out.push_str(&format!("  {:<20} pass rate {:.3}\n", "all pass-fail", self.all_pass_rate));
        for v in &self.indicative_means {
            out.push_str(&format!("  {:<20} mean {:.6}\n", v.name, v.value));
        }
        out
    }
}

/// Rolls out `episodes` full episodes. Outcomes do not touch the suite's
/// statistics.
pub fn evaluate(
    policy: &GaussianPolicy,
    env_config: &EnvConfig,
    suite: &TestSuite,
    episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalReport> {
    let mut env = env_config.build()?;
    let (m, n) = (suite.passfail_len(), suite.indicative_len());
    let mut passes = vec![0usize; m];
    let mut all = 0usize;
    let mut sums = vec![0.0; n];
    for k in 0..episodes {
        let mut state = env.reset(rng);
        let mut transitions = Vec::with_capacity(env.horizon());
        loop {
            let action = policy.act(&state, false, rng)?;
            let step = env.step(&action, rng)?;
            transitions.push(Transition::new(state, action, step.next_state.clone(), step.done));
            state = step.next_state;
            if step.done {
                break;
            }
        }
        let o = suite.evaluate_uncached(&Trajectory::new(TrajectoryId(k as u64), transitions)?)?;
        passes.iter_mut().zip(&o.passfail).for_each(|(p, b)| *p += usize::from(*b));
        all += usize::from(o.passes_all());
        sums.iter_mut().zip(&o.indicative).for_each(|(s, v)| *s += v);
    }
    let denom = episodes.max(1) as f64;
    Ok(EvalReport {
        episodes,
        pass_rates: suite
            .passfail_tests()
            .iter()
            .zip(&passes)
            .map(|(t, p)| NamedValue {
                name: t.name().to_string(),
                value: *p as f64 / denom,
            })
            .collect(),
        all_pass_rate: all as f64 / denom,
        indicative_means: suite
            .indicative_tests()
            .iter()
            .zip(&sums)
            .map(|(t, s)| NamedValue {
                name: t.name().to_string(),
                value: s / denom,
            })
            .collect(),
    })
}
