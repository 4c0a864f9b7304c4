use serde::{Deserialize, Serialize};

use super::{GradientBundle, Mlp};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for a flat parameter vector, with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn for_net(net: &Mlp) -> Self {
        Self::new(net.num_params())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Applies one update to `params` given matching `grads`.
    pub fn update<'a, P, G>(&mut self, params: P, grads: G, lr: f64) -> Result<()>
    where
        P: Iterator<Item = &'a mut f64>,
        G: Iterator<Item = f64> + Clone,
    {
        if grads.clone().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut count = 0;
        for (((p, g), m), v) in params.zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            count += 1;
        }
        debug_assert_eq!(count, self.m.len(), "adam state does not match parameters");
        Ok(())
    }

    pub fn step_net(&mut self, net: &mut Mlp, grads: &GradientBundle, lr: f64) -> Result<()> {
        if !grads.matches(net) || self.m.len() != net.num_params() {
            return Err(Error::DimensionMismatch {
                context: "adam step",
                expected: net.num_params(),
                actual: self.m.len(),
            });
        }
        self.update(net.params_mut(), grads.iter(), lr)
    }

    pub fn step_scalar(&mut self, param: &mut f64, grad: f64, lr: f64) -> Result<()> {
        self.update(std::iter::once(param), std::iter::once(grad), lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_from_fresh_state_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng);
        let before = net.clone();
        let mut adam = AdamState::for_net(&net);
        let zero = GradientBundle::zeros_like(&net);
        adam.step_net(&mut net, &zero, 0.1).unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut adam = AdamState::new(1);
        let mut p = 0.0;
        adam.step_scalar(&mut p, 2.0, 0.01).unwrap();
        let (m1, v1) = (adam.first_moment()[0], adam.second_moment()[0]);
        adam.step_scalar(&mut p, 0.0, 0.01).unwrap();
        assert!((adam.first_moment()[0] - 0.9 * m1).abs() < 1e-15);
        assert!((adam.second_moment()[0] - 0.999 * v1).abs() < 1e-15);
    }

    #[test]
    fn first_step_matches_hand_trace() {
        // m = 0.1 g, v = 0.001 g^2; m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
        let g = 0.25;
        let lr = 0.003;
        let mut adam = AdamState::new(1);
        let mut p = 1.0;
        adam.step_scalar(&mut p, g, lr).unwrap();
        let expected = 1.0 - lr * g / (g.abs() + 1e-8);
        assert!((p - expected).abs() < 1e-15, "{p} vs {expected}");
        assert!((adam.first_moment()[0] - 0.1 * g).abs() < 1e-15);
        assert!((adam.second_moment()[0] - 0.001 * g * g).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut adam = AdamState::new(1);
        let mut p = 0.0;
        assert!(matches!(adam.step_scalar(&mut p, f64::NAN, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 4, 1], Activation::Relu, Activation::Identity, &mut rng);
        let grads = net.grad(&[0.1, 0.2, 0.3], &[1.0]).unwrap();
        let run = || {
            let mut n = net.clone();
            let mut a = AdamState::for_net(&n);
            for _ in 0..3 {
                a.step_net(&mut n, &grads, 1e-3).unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }
}
