use rand::{Rng, RngCore};

use crate::envs::Environment;
use crate::error::Result;
use crate::testkit::{Trajectory, TrajectoryId, Transition};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmupData {
    /// Every collected transition, including those of a trailing partial episode.
    pub transitions: Vec<Transition>,
    /// Absorbing-state flag of each transition, for value bootstrapping.
    pub terminals: Vec<bool>,
    /// Completed episodes only.
    pub trajectories: Vec<Trajectory>,
}

/// Uniform-random actions in the action box for `steps` environment steps.
/// Trajectory ids are assigned consecutively from `first_id`.
pub fn warmup(env: &mut dyn Environment, steps: usize, first_id: u64, rng: &mut dyn RngCore) -> Result<WarmupData> {
    let mut data = WarmupData::default();
    if steps == 0 {
        return Ok(data);
    }
    let (low, high) = (env.action_low(), env.action_high());
    let mut state = env.reset(rng);
    let mut episode = Vec::with_capacity(env.horizon());
    let mut next_id = first_id;
    for _ in 0..steps {
        let action: Vec<f64> = low.iter().zip(&high).map(|(l, h)| rng.random_range(*l..=*h)).collect();
        let step = env.step(&action, rng)?;
        let tr = Transition::new(state, action, step.next_state.clone(), step.done);
        data.transitions.push(tr.clone());
        data.terminals.push(step.terminal);
        episode.push(tr);
        state = step.next_state;
        if step.done {
            data.trajectories.push(Trajectory::new(TrajectoryId(next_id), std::mem::take(&mut episode))?);
            next_id += 1;
            state = env.reset(rng);
        }
    }
    Ok(data)
}
