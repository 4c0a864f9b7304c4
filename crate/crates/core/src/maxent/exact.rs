//! Exact tabular trajectory distributions and the closed-form soft update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::GridChain;
use crate::error::{Error, Result};
use crate::testkit::{Trajectory, TrajectoryId, Transition};

const SUM_TOLERANCE: f64 = 1e-12;

/// Time-indexed tabular policy `probs[t][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPolicy {
    probs: Vec<Vec<Vec<f64>>>,
}

impl ExactPolicy {
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let shape_ok = !probs.is_empty()
            && !probs[0].is_empty()
            && !probs[0][0].is_empty()
            && probs.iter().all(|layer| {
                layer.len() == probs[0].len() && layer.iter().all(|row| row.len() == probs[0][0].len())
            });
        if !shape_ok {
            return Err(Error::InvalidArgument("exact policy table is empty or ragged".into()));
        }
        for (t, layer) in probs.iter().enumerate() {
            for (s, row) in layer.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "action distribution at t={t}, s={s} is not a probability vector: {row:?}"
                    )));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(horizon: usize, states: usize, actions: usize) -> Self {
        let p = 1.0 / actions as f64;
        Self {
            probs: vec![vec![vec![p; actions]; states]; horizon],
        }
    }

    pub fn deterministic(
        horizon: usize,
        states: usize,
        actions: usize,
        choose: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let probs = (0..horizon)
            .map(|t| {
                (0..states)
                    .map(|s| {
                        let mut row = vec![0.0; actions];
                        row[choose(t, s).min(actions - 1)] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self::new(probs)
    }

    /// Random full-support policy: each row is normalised exponential draws.
    pub fn random<R: Rng + ?Sized>(horizon: usize, states: usize, actions: usize, rng: &mut R) -> Self {
        let probs = (0..horizon)
            .map(|_| {
                (0..states)
                    .map(|_| {
                        let w: Vec<f64> = (0..actions).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                        let z: f64 = w.iter().sum();
                        w.iter().map(|x| x / z).collect()
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn num_states(&self) -> usize {
        self.probs[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0][0].len()
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.probs[t][s][a]
    }
}

/// State and action index sequences of a tabular episode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TabularTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl TabularTrajectory {
    pub fn new(states: Vec<usize>, actions: Vec<usize>) -> Self {
        assert_eq!(states.len(), actions.len() + 1, "need one more state than actions");
        Self { states, actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// One-dimensional float encoding usable by test suites.
    pub fn to_trajectory(&self, id: TrajectoryId) -> Trajectory {
        let last = self.actions.len().saturating_sub(1);
        let transitions = self
            .actions
            .iter()
            .enumerate()
            .map(|(t, &a)| {
                Transition::new(
                    vec![self.states[t] as f64],
                    vec![a as f64],
                    vec![self.states[t + 1] as f64],
                    t == last,
                )
            })
            .collect();
        Trajectory::new(id, transitions).expect("tabular trajectories are well formed")
    }
}

/// Probability of every enumerated trajectory, in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDistribution {
    entries: Vec<(TabularTrajectory, f64)>,
}

impl TrajectoryDistribution {
    pub fn new(entries: Vec<(TabularTrajectory, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory distribution".into()));
        }
        if entries.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::NonFinite("trajectory probability".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(TabularTrajectory, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    pub fn same_support(&self, other: &Self) -> bool {
        self.len() == other.len() && self.entries.iter().zip(&other.entries).all(|((a, _), (b, _))| a == b)
    }

    /// Total-variation distance to a distribution over the same support.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        if !self.same_support(other) {
            return Err(Error::SupportMismatch);
        }
        Ok(0.5 * self.entries.iter().zip(&other.entries).map(|((_, p), (_, q))| (p - q).abs()).sum::<f64>())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.entries.iter().filter(|(_, p)| *p > 0.0).map(|(_, p)| p * p.ln()).sum::<f64>()
    }
}

/// `P2(tau) = P1(tau) exp(R(tau) / alpha) / Z`, with `Z` summed over the whole
/// support. Exponents are shifted by their maximum before exponentiation.
pub fn reweight(dist: &TrajectoryDistribution, returns: &[f64], alpha: f64) -> Result<TrajectoryDistribution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {alpha}")));
    }
    if returns.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            context: "returns per enumerated trajectory",
            expected: dist.len(),
            actual: returns.len(),
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("trajectory return".into()));
    }
    let logits: Vec<f64> = dist
        .entries
        .iter()
        .zip(returns)
        .map(|((_, p), r)| if *p > 0.0 { p.ln() + r / alpha } else { f64::NEG_INFINITY })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    TrajectoryDistribution::new(
        dist.entries
            .iter()
            .zip(weights)
            .map(|((tau, _), w)| (tau.clone(), w / z))
            .collect(),
    )
}

/// The maximum-entropy policy improvement step in trajectory space.
pub fn soft_update_exact(
    env: &GridChain,
    pi1: &ExactPolicy,
    reward: impl Fn(&TabularTrajectory) -> f64,
    alpha: f64,
) -> Result<TrajectoryDistribution> {
    let p1 = env.enumerate_trajectories(pi1)?;
    let returns: Vec<f64> = p1.entries.iter().map(|(tau, _)| reward(tau)).collect();
    reweight(&p1, &returns, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GridChainConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_paths() -> TrajectoryDistribution {
        TrajectoryDistribution::new(vec![
            (TabularTrajectory::new(vec![0, 0], vec![0]), 0.5),
            (TabularTrajectory::new(vec![0, 1], vec![1]), 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn ln2_return_gives_two_thirds() {
        let p2 = reweight(&two_paths(), &[2f64.ln(), 0.0], 1.0).unwrap();
        assert!((p2.entries()[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((p2.entries()[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_return_is_identity() {
        let env = GridChain::new(GridChainConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pi = ExactPolicy::random(5, 5, 3, &mut rng);
        let p1 = env.enumerate_trajectories(&pi).unwrap();
        let p2 = soft_update_exact(&env, &pi, |_| 7.5, 0.3).unwrap();
        assert!(p1.total_variation(&p2).unwrap() < 1e-12);
    }

    #[test]
    fn huge_temperature_barely_moves() {
        let env = GridChain::new(GridChainConfig::default()).unwrap();
        let pi = ExactPolicy::uniform(5, 5, 3);
        let p1 = env.enumerate_trajectories(&pi).unwrap();
        let p2 = soft_update_exact(&env, &pi, |t| t.states[5] as f64, 1e6).unwrap();
        let max_diff = p1
            .probabilities()
            .iter()
            .zip(p2.probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-5);
    }

    #[test]
    fn extreme_returns_stay_normalised() {
        let p2 = reweight(&two_paths(), &[1e6, -1e6], 1e-3).unwrap();
        assert_eq!(p2.probabilities(), vec![1.0, 0.0]);
    }

    #[test]
    fn higher_temperature_raises_entropy_on_two_paths() {
        let p1 = TrajectoryDistribution::new(vec![
            (TabularTrajectory::new(vec![0, 0], vec![0]), 0.3),
            (TabularTrajectory::new(vec![0, 1], vec![1]), 0.7),
        ])
        .unwrap();
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
            // the return favours the already likelier path; the other ordering can overshoot 1/2
            let h = reweight(&p1, &[0.0, 3.0], alpha).unwrap().entropy();
            assert!(h >= last - 1e-15, "alpha={alpha}");
            last = h;
        }
    }

    #[test]
    fn policy_rows_must_sum_to_one() {
        assert!(ExactPolicy::new(vec![vec![vec![0.5, 0.5 + 1e-9]]]).is_err());
        assert!(ExactPolicy::new(vec![vec![vec![0.5, 0.5]]]).is_ok());
    }

    #[test]
    fn nonpositive_alpha_is_rejected() {
        assert!(reweight(&two_paths(), &[0.0, 0.0], 0.0).is_err());
    }
}
