//! Soft actor-critic update with twin critics and automatic temperature.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use super::replay::ReplayBatch;
use crate::error::{Error, Result};
use crate::nn::{layer_widths, Activation, AdamState, GradientBundle, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftCritic {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub gamma: f64,
    pub tau: f64,
}

impl SoftCritic {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        depth: usize,
        gamma: f64,
        tau: f64,
        rng: &mut R,
    ) -> Self {
        let widths = layer_widths(state_dim + action_dim, hidden, depth, 1);
        let q1 = Mlp::new(&widths, Activation::Relu, Activation::Identity, rng);
        let q2 = Mlp::new(&widths, Activation::Relu, Activation::Identity, rng);
        Self::from_nets(q1, q2, gamma, tau)
    }

    pub fn from_nets(q1: Mlp, q2: Mlp, gamma: f64, tau: f64) -> Self {
        Self {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1_opt: AdamState::for_net(&q1),
            q2_opt: AdamState::for_net(&q2),
            q1,
            q2,
            gamma,
            tau,
        }
    }

    pub fn polyak_update(&mut self) {
        self.q1_target.polyak_from(&self.q1, self.tau);
        self.q2_target.polyak_from(&self.q2, self.tau);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            alpha_lr: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SacReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

fn state_action(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states, actions]).expect("state and action rows align")
}

/// Soft Bellman targets `y = r + gamma (1 - done) (min Q_target(s', a') - alpha log pi(a'|s'))`
/// with `a'` drawn from the policy using `noise`.
pub fn critic_targets(
    policy: &GaussianPolicy,
    critic: &SoftCritic,
    batch: &ReplayBatch,
    noise: Array2<f64>,
    alpha: f64,
) -> Result<Array1<f64>> {
    let next = policy.sample_batch(batch.next_states.view(), noise)?;
    let x = state_action(batch.next_states.view(), next.actions.view());
    let t1 = critic.q1_target.forward_batch(x.view())?;
    let t2 = critic.q2_target.forward_batch(x.view())?;
    Ok(Array1::from_shape_fn(batch.rewards.len(), |r| {
        let soft_v = t1[[r, 0]].min(t2[[r, 0]]) - alpha * next.log_prob[r];
        batch.rewards[r] + critic.gamma * (1.0 - batch.dones[r]) * soft_v
    }))
}

/// Mean squared Bellman error of one Q network and its parameter gradient.
pub fn critic_loss_and_grad(
    q: &Mlp,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    targets: &Array1<f64>,
) -> Result<(f64, GradientBundle)> {
    let b = targets.len();
    let x = state_action(states, actions);
    let tape = q.forward_tape(x.view())?;
    let out = tape.output();
    let mut upstream = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for r in 0..b {
        let diff = out[[r, 0]] - targets[r];
        loss += diff * diff / b as f64;
        upstream[[r, 0]] = 2.0 * diff / b as f64;
    }
    Ok((loss, q.backward(&tape, upstream.view())?.0))
}

/// Actor objective `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a))` through the
/// reparameterised sample, with its gradient w.r.t. the actor parameters.
/// Also returns the per-row log-probabilities.
pub fn actor_loss_and_grad(
    policy: &GaussianPolicy,
    critic: &SoftCritic,
    states: ArrayView2<f64>,
    noise: Array2<f64>,
    alpha: f64,
) -> Result<(f64, GradientBundle, Array1<f64>)> {
    let b = states.nrows();
    let d = policy.action_dim();
    let ds = states.ncols();
    let sample = policy.sample_batch(states, noise)?;
    let x = state_action(states, sample.actions.view());
    let tape1 = critic.q1.forward_tape(x.view())?;
    let tape2 = critic.q2.forward_tape(x.view())?;
    let (o1, o2) = (tape1.output(), tape2.output());
    let mut pick1 = Array2::zeros((b, 1));
    let mut pick2 = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for r in 0..b {
        let (v1, v2) = (o1[[r, 0]], o2[[r, 0]]);
        if v1 <= v2 {
            pick1[[r, 0]] = 1.0;
        } else {
            pick2[[r, 0]] = 1.0;
        }
        loss += (alpha * sample.log_prob[r] - v1.min(v2)) / b as f64;
    }
    let (_, dx1) = critic.q1.backward(&tape1, pick1.view())?;
    let (_, dx2) = critic.q2.backward(&tape2, pick2.view())?;
    let dq_da = dx1.slice(s![.., ds..]).to_owned() + dx2.slice(s![.., ds..]);

    let mut upstream = Array2::zeros((b, 2 * d));
    for r in 0..b {
        for i in 0..d {
            let t = sample.squashed[[r, i]];
            let half = 0.5 * (policy.high()[i] - policy.low()[i]);
            let du = half * (1.0 - t * t) * dq_da[[r, i]];
            let std = sample.log_std[[r, i]].exp();
            let eps = sample.noise[[r, i]];
            // d log pi / du = 2 tanh(u); u = mean + std * eps
            let g_mean = alpha * 2.0 * t - du;
            let g_log_std = alpha * (-1.0 + 2.0 * t * std * eps) - du * std * eps;
            upstream[[r, i]] = g_mean / b as f64;
            upstream[[r, d + i]] = g_log_std * sample.log_std_live[[r, i]] / b as f64;
        }
    }
    let (grad, _) = policy.actor.backward(&sample.tape, upstream.view())?;
    Ok((loss, grad, sample.log_prob))
}

/// One soft actor-critic step: critics, actor, temperature, then targets.
pub fn sac_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    critic: &mut SoftCritic,
    batch: &ReplayBatch,
    config: &SacConfig,
    rng: &mut R,
) -> Result<SacReport> {
    let b = batch.rewards.len();
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    let alpha = policy.alpha();

    let next_noise = policy.sample_noise(b, rng);
    let targets = critic_targets(policy, critic, batch, next_noise, alpha)?;
    let (l1, g1) = critic_loss_and_grad(&critic.q1, batch.states.view(), batch.actions.view(), &targets)?;
    let (l2, g2) = critic_loss_and_grad(&critic.q2, batch.states.view(), batch.actions.view(), &targets)?;
    let critic_loss = l1 + l2;
    if !critic_loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    critic.q1_opt.step_net(&mut critic.q1, &g1, config.critic_lr)?;
    critic.q2_opt.step_net(&mut critic.q2, &g2, config.critic_lr)?;

    let noise = policy.sample_noise(b, rng);
    let (actor_loss, actor_grad, log_prob) =
        actor_loss_and_grad(policy, critic, batch.states.view(), noise, alpha)?;
    if !actor_loss.is_finite() {
        return Err(Error::NonFinite("actor loss".into()));
    }
    policy.actor_opt.step_net(&mut policy.actor, &actor_grad, config.actor_lr)?;

    let mean_log_prob = log_prob.mean().unwrap_or(0.0);
    let alpha_loss = -policy.log_alpha * (mean_log_prob + policy.target_entropy);
    if policy.auto_alpha {
        let grad = -(mean_log_prob + policy.target_entropy);
        let mut log_alpha = policy.log_alpha;
        policy.alpha_opt.step_scalar(&mut log_alpha, grad, config.alpha_lr)?;
        policy.log_alpha = log_alpha;
    }

    critic.polyak_update();
    Ok(SacReport {
        critic_loss,
        actor_loss,
        alpha_loss,
        alpha: policy.alpha(),
        entropy: -mean_log_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::ReplayBuffer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_batch() -> ReplayBatch {
        let mut buf = ReplayBuffer::new(8, 2, 1);
        buf.push(&[0.0, 1.0], &[0.3], &[1.0, 0.0], 1.5, false).unwrap();
        buf.push(&[1.0, 0.0], &[-0.6], &[0.0, 1.0], -0.25, true).unwrap();
        buf.gather(&[0, 1])
    }

    #[test]
    fn degenerate_target_is_the_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let policy = GaussianPolicy::new(2, vec![-1.0], vec![1.0], 8, 2, 1.0, &mut rng);
        let critic = SoftCritic::new(2, 1, 8, 2, 0.0, 0.005, &mut rng);
        let batch = toy_batch();
        let noise = policy.sample_noise(2, &mut rng);
        let y = critic_targets(&policy, &critic, &batch, noise, 0.0).unwrap();
        assert_eq!(y, batch.rewards);
    }

    #[test]
    fn unit_polyak_copies_online_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy = GaussianPolicy::new(2, vec![-1.0], vec![1.0], 8, 2, 1.0, &mut rng);
        let mut critic = SoftCritic::new(2, 1, 8, 2, 0.99, 1.0, &mut rng);
        sac_update(&mut policy, &mut critic, &toy_batch(), &SacConfig::default(), &mut rng).unwrap();
        assert_eq!(critic.q1, critic.q1_target);
        assert_eq!(critic.q2, critic.q2_target);
    }

    #[test]
    fn sac_update_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut policy = GaussianPolicy::new(2, vec![-1.0], vec![1.0], 8, 2, 1.0, &mut rng);
            let mut critic = SoftCritic::new(2, 1, 8, 2, 0.99, 0.005, &mut rng);
            for _ in 0..3 {
                sac_update(&mut policy, &mut critic, &toy_batch(), &SacConfig::default(), &mut rng).unwrap();
            }
            (policy, critic)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn alpha_moves_toward_target_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut policy = GaussianPolicy::new(2, vec![-1.0], vec![1.0], 8, 2, 1.0, &mut rng);
        // demand far more entropy than the policy has: alpha must grow
        policy.target_entropy = 10.0;
        let mut critic = SoftCritic::new(2, 1, 8, 2, 0.99, 0.005, &mut rng);
        let before = policy.alpha();
        sac_update(&mut policy, &mut critic, &toy_batch(), &SacConfig::default(), &mut rng).unwrap();
        assert!(policy.alpha() > before);
    }
}
