use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{layer_widths, Activation, AdamState, Mlp, Tape};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(1 - tanh(u)^2)`, stable for large |u|.
pub(crate) fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - crate::return_learner::softplus(-2.0 * u))
}

/// Tanh-squashed diagonal Gaussian policy with a learnable temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub actor: Mlp,
    pub actor_opt: AdamState,
    pub log_alpha: f64,
    pub alpha_opt: AdamState,
    pub auto_alpha: bool,
    pub target_entropy: f64,
    low: Vec<f64>,
    high: Vec<f64>,
}

/// Reparameterised samples for a batch of states, plus what the actor
/// gradient needs.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub tape: Tape,
    pub noise: Array2<f64>,
    pub log_std: Array2<f64>,
    /// 1 where the raw log-std was inside the clamp range.
    pub log_std_live: Array2<f64>,
    pub squashed: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_prob: Array1<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        low: Vec<f64>,
        high: Vec<f64>,
        hidden: usize,
        depth: usize,
        init_alpha: f64,
        rng: &mut R,
    ) -> Self {
        assert_eq!(low.len(), high.len(), "action bounds differ in length");
        assert!(low.iter().zip(&high).all(|(l, h)| l < h), "empty action box");
        let action_dim = low.len();
        let actor = Mlp::new(
            &layer_widths(state_dim, hidden, depth, 2 * action_dim),
            Activation::Relu,
            Activation::Identity,
            rng,
        );
        Self::from_actor(actor, low, high, init_alpha)
    }

    pub fn from_actor(actor: Mlp, low: Vec<f64>, high: Vec<f64>, init_alpha: f64) -> Self {
        assert_eq!(actor.output_dim(), 2 * low.len(), "actor emits mean and log-std per action");
        let actor_opt = AdamState::for_net(&actor);
        Self {
            actor,
            actor_opt,
            log_alpha: init_alpha.ln(),
            alpha_opt: AdamState::new(1),
            auto_alpha: true,
            target_entropy: -(low.len() as f64),
            low,
            high,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    fn center_half(&self, i: usize) -> (f64, f64) {
        (0.5 * (self.high[i] + self.low[i]), 0.5 * (self.high[i] - self.low[i]))
    }

    /// Maps a squashed value in (-1, 1) into the action box.
    pub fn scale_action(&self, i: usize, squashed: f64) -> f64 {
        let (c, h) = self.center_half(i);
        (c + h * squashed).clamp(self.low[i], self.high[i])
    }

    /// Stochastic: squashed reparameterised sample. Deterministic: squashed mean.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], stochastic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let out = self.actor.forward(state)?;
        let d = self.action_dim();
        Ok((0..d)
            .map(|i| {
                let mean = out[i];
                let u = if stochastic {
                    let log_std = out[d + i].clamp(LOG_STD_MIN, LOG_STD_MAX);
                    let eps: f64 = rng.sample(StandardNormal);
                    mean + log_std.exp() * eps
                } else {
                    mean
                };
                self.scale_action(i, u.tanh())
            })
            .collect())
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_fn((rows, self.action_dim()), |_| rng.sample(StandardNormal))
    }

    /// Reparameterised batch sample `u = mean + std * noise`, `a = squash(u)`,
    /// with exact log-density of `a` including the tanh and box Jacobians.
    pub fn sample_batch(&self, states: ArrayView2<f64>, noise: Array2<f64>) -> Result<PolicySample> {
        let d = self.action_dim();
        if noise.dim() != (states.nrows(), d) {
            return Err(Error::DimensionMismatch {
                context: "policy noise",
                expected: states.nrows() * d,
                actual: noise.len(),
            });
        }
        let tape = self.actor.forward_tape(states)?;
        let out = tape.output();
        let b = states.nrows();
        let mut log_std = Array2::zeros((b, d));
        let mut live = Array2::zeros((b, d));
        let mut squashed = Array2::zeros((b, d));
        let mut actions = Array2::zeros((b, d));
        let mut log_prob = Array1::zeros(b);
        for r in 0..b {
            let mut lp = 0.0;
            for i in 0..d {
                let raw = out[[r, d + i]];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                live[[r, i]] = if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) { 1.0 } else { 0.0 };
                log_std[[r, i]] = ls;
                let eps = noise[[r, i]];
                let u = out[[r, i]] + ls.exp() * eps;
                let t = u.tanh();
                squashed[[r, i]] = t;
                let (c, h) = self.center_half(i);
                actions[[r, i]] = c + h * t;
                lp += -0.5 * eps * eps - ls - HALF_LN_2PI - log_one_minus_tanh_sq(u) - h.ln();
            }
            log_prob[r] = lp;
        }
        Ok(PolicySample {
            tape,
            noise,
            log_std,
            log_std_live: live,
            squashed,
            actions,
            log_prob,
        })
    }
}
