use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrajectoryId(pub u64);

impl fmt::Display for TrajectoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>, done: bool) -> Self {
        Self {
            state,
            action,
            next_state,
            done,
        }
    }
}

/// An episode (or episode segment) of chained transitions.
///
/// Construction validates that the chain is unbroken: every transition's
/// `next_state` equals the following transition's `state` bit-for-bit, and
/// only the final transition may carry `done`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: TrajectoryId,
    transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(id: TrajectoryId, transitions: Vec<Transition>) -> Result<Self> {
        let first = transitions
            .first()
            .ok_or_else(|| Error::InvalidTrajectory(format!("{id} has no transitions")))?;
        let state_dim = first.state.len();
        let action_dim = first.action.len();
        let last = transitions.len() - 1;
        for (t, tr) in transitions.iter().enumerate() {
            if tr.state.len() != state_dim || tr.next_state.len() != state_dim {
                return Err(Error::InvalidTrajectory(format!(
                    "{id}: state dimension changes at step {t}"
                )));
            }
            if tr.action.len() != action_dim {
                return Err(Error::InvalidTrajectory(format!(
                    "{id}: action dimension changes at step {t}"
                )));
            }
            if tr.done && t != last {
                return Err(Error::InvalidTrajectory(format!(
                    "{id}: done flag set at step {t} before the final transition"
                )));
            }
        }
        for (t, pair) in transitions.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(Error::InvalidTrajectory(format!(
                    "{id}: chain broken between steps {t} and {}",
                    t + 1
                )));
            }
        }
        Ok(Self { id, transitions })
    }

    pub fn id(&self) -> TrajectoryId {
        self.id
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.transitions[0].state.len()
    }

    pub fn action_dim(&self) -> usize {
        self.transitions[0].action.len()
    }

    /// The `T + 1` visited states: every transition's state, then the last next-state.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.transitions
            .iter()
            .map(|t| t.state.as_slice())
            .chain(std::iter::once(self.final_state()))
    }

    pub fn final_state(&self) -> &[f64] {
        &self.transitions[self.transitions.len() - 1].next_state
    }

    /// Every action component lies in `[low, high]`.
    pub fn actions_within(&self, low: &[f64], high: &[f64]) -> bool {
        self.transitions.iter().all(|t| {
            t.action.len() == low.len()
                && t.action
                    .iter()
                    .zip(low.iter().zip(high))
                    .all(|(a, (lo, hi))| *a >= *lo && *a <= *hi)
        })
    }

    /// Splits into contiguous segments of at most `size` transitions. Segment
    /// ids are assigned sequentially from `first_id`.
    pub fn segments(&self, size: usize, first_id: u64) -> Vec<Trajectory> {
        assert!(size > 0, "segment size must be positive");
        self.transitions
            .chunks(size)
            .enumerate()
            .map(|(k, chunk)| Trajectory {
                id: TrajectoryId(first_id + k as u64),
                transitions: chunk.to_vec(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: f64, a: f64, done: bool) -> Transition {
        Transition::new(vec![s], vec![a], vec![s + a], done)
    }

    #[test]
    fn accepts_chained_transitions() {
        let traj = Trajectory::new(
            TrajectoryId(1),
            vec![step(0.0, 1.0, false), step(1.0, 1.0, false), step(2.0, -1.0, true)],
        )
        .unwrap();
        assert_eq!(traj.len(), 3);
        let states: Vec<f64> = traj.states().map(|s| s[0]).collect();
        assert_eq!(states, vec![0.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_broken_chain() {
        let err = Trajectory::new(TrajectoryId(2), vec![step(0.0, 1.0, false), step(5.0, 1.0, true)])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidTrajectory(msg) if msg.contains("chain broken")));
    }

    #[test]
    fn rejects_early_done_and_empty() {
        assert!(Trajectory::new(TrajectoryId(3), vec![step(0.0, 1.0, true), step(1.0, 1.0, true)]).is_err());
        assert!(Trajectory::new(TrajectoryId(4), vec![]).is_err());
    }

    #[test]
    fn segments_cover_the_episode() {
        let transitions: Vec<_> = (0..5).map(|k| step(k as f64, 1.0, k == 4)).collect();
        let traj = Trajectory::new(TrajectoryId(0), transitions).unwrap();
        let segs = traj.segments(2, 10);
        assert_eq!(segs.iter().map(Trajectory::len).collect::<Vec<_>>(), vec![2, 2, 1]);
        assert_eq!(segs[2].id(), TrajectoryId(12));
        assert!(segs[2].transitions()[0].done);
    }
}
