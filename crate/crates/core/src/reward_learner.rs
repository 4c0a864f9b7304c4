//! Decomposing the learned trajectory return into a per-step reward
//! `r_phi(s, a)` by least squares, and relabelling the replay buffer with it.

use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::ReplayBuffer;
use crate::nn::{layer_widths, Activation, AdamState, GradientBundle, Mlp};
use crate::return_learner::LossAndGrad;
use crate::testkit::{Trajectory, TrajectoryId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub update_num: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            update_num: 50,
            batch_size: 128,
            lr: 3e-4,
        }
    }
}

/// Ensemble of per-step reward networks on `concat(s, a)`. Outputs are not squashed.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEnsemble {
    members: Vec<Mlp>,
    optimizers: Vec<AdamState>,
}

impl RewardEnsemble {
    /// Zeroed output layers: every initial reward is exactly 0.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        depth: usize,
        size: usize,
        rng: &mut R,
    ) -> Self {
        let widths = layer_widths(state_dim + action_dim, hidden, depth, 1);
        let members = (0..size.max(1))
            .map(|_| {
                let mut net = Mlp::new(&widths, Activation::Relu, Activation::Identity, rng);
                net.zero_output_layer();
                net
            })
            .collect();
        Self::from_members(members).expect("members share one architecture")
    }

    pub fn from_members(members: Vec<Mlp>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("an ensemble needs at least one member".into()))?;
        if first.output_dim() != 1 || members.iter().any(|m| !m.same_architecture(first)) {
            return Err(Error::InvalidArgument(
                "ensemble members must share one scalar-output architecture".into(),
            ));
        }
        let optimizers = members.iter().map(AdamState::for_net).collect();
        Ok(Self { members, optimizers })
    }

    pub fn with_optimizers(mut self, optimizers: Vec<AdamState>) -> Result<Self> {
        if optimizers.len() != self.members.len()
            || optimizers.iter().zip(&self.members).any(|(o, m)| o.len() != m.num_params())
        {
            return Err(Error::InvalidArgument("optimizer state does not match ensemble".into()));
        }
        self.optimizers = optimizers;
        Ok(self)
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Mlp] {
        &mut self.members
    }

    pub fn optimizers(&self) -> &[AdamState] {
        &self.optimizers
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    /// Ensemble-mean reward of one state-action pair.
    pub fn reward_of(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let x: Vec<f64> = state.iter().chain(action).copied().collect();
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "reward input (state + action)",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.forward(&x)?[0];
        }
        Ok(sum / self.members.len() as f64)
    }

    /// Ensemble-mean rewards for the rows of a `(state, action)` design matrix.
    pub fn rewards_batch(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "reward input (state + action)",
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let mut sum = vec![0.0; x.nrows()];
        for m in &self.members {
            let out = m.forward_batch(x.view())?;
            sum.iter_mut().zip(out.column(0)).for_each(|(s, v)| *s += v);
        }
        let e = self.members.len() as f64;
        Ok(sum.into_iter().map(|s| s / e).collect())
    }

    pub fn apply(&mut self, grads: &[GradientBundle], lr: f64) -> Result<()> {
        for ((net, opt), g) in self.members.iter_mut().zip(self.optimizers.iter_mut()).zip(grads) {
            opt.step_net(net, g, lr)?;
        }
        Ok(())
    }
}

fn stack_transitions(trajs: &[&Trajectory], width: usize) -> Result<Array2<f64>> {
    let rows: usize = trajs.iter().map(|t| t.len()).sum();
    let mut x = Array2::zeros((rows, width));
    let mut r = 0;
    for traj in trajs {
        for tr in traj.transitions() {
            if tr.state.len() + tr.action.len() != width {
                return Err(Error::DimensionMismatch {
                    context: "reward input (state + action)",
                    expected: width,
                    actual: tr.state.len() + tr.action.len(),
                });
            }
            let mut row = x.row_mut(r);
            row.iter_mut()
                .zip(tr.state.iter().chain(&tr.action))
                .for_each(|(d, v)| *d = *v);
            r += 1;
        }
    }
    Ok(x)
}

/// Decomposition loss `sum_tau (R(tau) - sum_t r(s_t, a_t))^2`, undiscounted,
/// averaged over members. Member `m` receives `grad L_m / E`.
pub fn loss_reward(
    trajs: &[&Trajectory],
    returns: &HashMap<TrajectoryId, f64>,
    ens: &RewardEnsemble,
) -> Result<LossAndGrad> {
    if trajs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let targets = trajs
        .iter()
        .map(|t| returns.get(&t.id()).copied().ok_or(Error::MissingReturn(t.id())))
        .collect::<Result<Vec<f64>>>()?;
    let x = stack_transitions(trajs, ens.input_dim())?;
    let e = ens.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(ens.len());
    for member in &ens.members {
        let tape = member.forward_tape(x.view())?;
        let out = tape.output();
        let mut upstream = Array2::zeros((x.nrows(), 1));
        let mut start = 0;
        for (traj, target) in trajs.iter().zip(&targets) {
            let end = start + traj.len();
            let predicted: f64 = (start..end).map(|r| out[[r, 0]]).sum();
            let gap = target - predicted;
            loss += gap * gap / e;
            for r in start..end {
                upstream[[r, 0]] = -2.0 * gap / e;
            }
            start = end;
        }
        grads.push(member.backward(&tape, upstream.view())?.0);
    }
    Ok(LossAndGrad { loss, grads })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardRoundReport {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Adam steps on trajectory minibatches. Targets come from `return_fn`,
/// evaluated once per trajectory before the first step.
pub fn update_round<R: Rng + ?Sized>(
    ens: &mut RewardEnsemble,
    buffer: &[Trajectory],
    mut return_fn: impl FnMut(&Trajectory) -> Result<f64>,
    config: &RewardConfig,
    rng: &mut R,
) -> Result<RewardRoundReport> {
    if buffer.is_empty() {
        return Err(Error::NotEnoughTrajectories { needed: 1, have: 0 });
    }
    let returns = buffer
        .iter()
        .map(|t| Ok((t.id(), return_fn(t)?)))
        .collect::<Result<HashMap<_, _>>>()?;
    let mut report = RewardRoundReport::default();
    let batch = config.batch_size.max(1);
    for step in 0..config.update_num {
        let picks: Vec<usize> = if buffer.len() >= batch {
            index::sample(rng, buffer.len(), batch).into_vec()
        } else {
            (0..batch).map(|_| rng.random_range(0..buffer.len())).collect()
        };
        let trajs: Vec<&Trajectory> = picks.iter().map(|&i| &buffer[i]).collect();
        let lg = loss_reward(&trajs, &returns, ens)?;
        if !lg.loss.is_finite() {
            return Err(Error::NonFinite("reward decomposition loss".into()));
        }
        if step == 0 {
            report.initial_loss = lg.loss;
        }
        report.final_loss = lg.loss;
        ens.apply(&lg.grads, config.lr)?;
        report.steps += 1;
    }
    Ok(report)
}

/// Rewrites every stored reward with `reward_of(s, a)`. Returns the count.
pub fn relabel(replay: &mut ReplayBuffer, ens: &RewardEnsemble) -> Result<usize> {
    if replay.is_empty() {
        return Ok(0);
    }
    let rewards = ens.rewards_batch(&replay.state_action_matrix())?;
    replay.overwrite_rewards(&rewards)
}
