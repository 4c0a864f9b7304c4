//! Learning the trajectory return `R(tau) = R_ind(z_ind(tau))` from labelled
//! trajectory pairs.
//!
//! Each ensemble member is trained on the same labelled pairs with a
//! Bradley-Terry style distance loss plus a penalty that anchors returns to
//! their values at the start of the round. The two gradients are balanced
//! either by gradient-norm rescaling (GN) or by stopping the round early (ES).

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicomp::{sample_pair_indices, Comparator, ComparisonTriple};
use crate::nn::{combine_gn, layer_widths, should_early_stop, Activation, AdamState, GradientBundle, Mlp};
use crate::testkit::{TestOutcome, TestStats, TrajectoryId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Balancing {
    #[serde(rename = "GN")]
    GradientNorm,
    #[serde(rename = "ES")]
    EarlyStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    pub update_num: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub penalty_coef: f64,
    pub balancing: Balancing,
    pub es_multiple: f64,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        Self {
            update_num: 50,
            batch_size: 128,
            lr: 3e-4,
            penalty_coef: 0.1,
            balancing: Balancing::EarlyStop,
            es_multiple: 10.0,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Estimated probability that the first trajectory is closer to the
/// all-passing set: `exp(r1) / (exp(r1) + exp(r2))`.
pub fn p_hat(r1: f64, r2: f64) -> f64 {
    sigmoid(r1 - r2)
}

/// Ensemble of return networks mapping an indicative-test vector to a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnEnsemble {
    members: Vec<Mlp>,
    optimizers: Vec<AdamState>,
}

impl ReturnEnsemble {
    /// Members get independent initialisations with a zeroed output layer,
    /// so every initial return is exactly 0.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, depth: usize, size: usize, rng: &mut R) -> Self {
        let widths = layer_widths(inputs, hidden, depth, 1);
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

    pub fn member_returns(&self, indicative: &[f64]) -> Result<Vec<f64>> {
        self.members.iter().map(|m| Ok(m.forward(indicative)?[0])).collect()
    }

    /// Ensemble-mean return of one outcome.
    pub fn return_of(&self, outcome: &TestOutcome) -> Result<f64> {
        let values = self.member_returns(&outcome.indicative)?;
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }

    fn design_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<Array2<f64>> {
        let n = self.input_dim();
        let mut x = Array2::zeros((rows.len(), n));
        for (r, values) in rows.enumerate() {
            if values.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "indicative vector",
                    expected: n,
                    actual: values.len(),
                });
            }
            x.row_mut(r).iter_mut().zip(values).for_each(|(s, v)| *s = *v);
        }
        Ok(x)
    }

    /// Per-member returns for many outcomes: `result[member][row]`.
    pub fn member_returns_batch(&self, outcomes: &[&TestOutcome]) -> Result<Vec<Vec<f64>>> {
        let x = self.design_matrix(outcomes.iter().map(|o| o.indicative.as_slice()))?;
        self.members
            .iter()
            .map(|m| Ok(m.forward_batch(x.view())?.column(0).to_vec()))
            .collect()
    }

    pub fn returns_batch(&self, outcomes: &[&TestOutcome]) -> Result<Vec<f64>> {
        let per_member = self.member_returns_batch(outcomes)?;
        let e = per_member.len() as f64;
        Ok((0..outcomes.len())
            .map(|r| per_member.iter().map(|m| m[r]).sum::<f64>() / e)
            .collect())
    }

    /// One Adam step per member with the given per-member gradients.
    pub fn apply(&mut self, grads: &[GradientBundle], lr: f64) -> Result<()> {
        for ((net, opt), g) in self.members.iter_mut().zip(self.optimizers.iter_mut()).zip(grads) {
            opt.step_net(net, g, lr)?;
        }
        Ok(())
    }
}

/// Returns captured before an update round, per member, keyed by trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReturnSnapshot {
    values: HashMap<TrajectoryId, Vec<f64>>,
}

impl ReturnSnapshot {
    pub fn capture(ens: &ReturnEnsemble, outcomes: &[TestOutcome]) -> Result<Self> {
        let refs: Vec<&TestOutcome> = outcomes.iter().collect();
        let per_member = ens.member_returns_batch(&refs)?;
        let values = outcomes
            .iter()
            .enumerate()
            .map(|(r, o)| (o.trajectory_id, per_member.iter().map(|m| m[r]).collect()))
            .collect();
        Ok(Self { values })
    }

    pub fn insert(&mut self, id: TrajectoryId, member_values: Vec<f64>) {
        self.values.insert(id, member_values);
    }

    pub fn member_values(&self, id: TrajectoryId) -> Option<&[f64]> {
        self.values.get(&id).map(Vec::as_slice)
    }

    /// Ensemble-mean snapshot return.
    pub fn value(&self, id: TrajectoryId) -> Option<f64> {
        self.values.get(&id).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scalar loss (mean over ensemble members) and its gradient for each member.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Vec<GradientBundle>,
}

impl LossAndGrad {
    /// All member gradients as one vector over the full parameter family.
    pub fn joined(&self) -> GradientBundle {
        GradientBundle::concat(self.grads.clone())
    }
}

fn pair_matrix(ens: &ReturnEnsemble, batch: &[ComparisonTriple]) -> Result<Array2<f64>> {
    ens.design_matrix(
        batch
            .iter()
            .map(|t| t.first.indicative.as_slice())
            .chain(batch.iter().map(|t| t.second.indicative.as_slice()))
            .collect::<Vec<_>>()
            .into_iter(),
    )
}

/// Distance loss, averaged over pairs:
/// `-mean[mu log p + (1 - mu) log(1 - p)]` with `p = p_hat(R(tau1), R(tau2))`.
pub fn loss_dis(batch: &[ComparisonTriple], ens: &ReturnEnsemble) -> Result<LossAndGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let e = ens.len() as f64;
    let x = pair_matrix(ens, batch)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(ens.len());
    for member in &ens.members {
        let tape = member.forward_tape(x.view())?;
        let out = tape.output();
        let mut upstream = Array2::zeros((2 * n, 1));
        for (k, triple) in batch.iter().enumerate() {
            let mu = triple.mu.value();
            let d = out[[k, 0]] - out[[n + k, 0]];
            loss += (mu * softplus(-d) + (1.0 - mu) * softplus(d)) / (n as f64 * e);
            let g = (sigmoid(d) - mu) / (n as f64 * e);
            upstream[[k, 0]] = g;
            upstream[[n + k, 0]] = -g;
        }
        grads.push(member.backward(&tape, upstream.view())?.0);
    }
    Ok(LossAndGrad { loss, grads })
}

/// Return-change penalty, averaged over pairs:
/// `coef * mean_pairs sum_i (R(tau_i) - R_snapshot(tau_i))^2`.
pub fn loss_penalty(
    batch: &[ComparisonTriple],
    ens: &ReturnEnsemble,
    snapshot: &ReturnSnapshot,
    coef: f64,
) -> Result<LossAndGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let e = ens.len() as f64;
    let ids: Vec<TrajectoryId> = batch
        .iter()
        .map(|t| t.first.trajectory_id)
        .chain(batch.iter().map(|t| t.second.trajectory_id))
        .collect();
    let anchors = ids
        .iter()
        .map(|&id| snapshot.member_values(id).ok_or(Error::MissingSnapshot(id)))
        .collect::<Result<Vec<_>>>()?;
    if anchors.iter().any(|a| a.len() != ens.len()) {
        return Err(Error::DimensionMismatch {
            context: "snapshot members",
            expected: ens.len(),
            actual: anchors.iter().map(|a| a.len()).find(|&l| l != ens.len()).unwrap_or(0),
        });
    }
    let x = pair_matrix(ens, batch)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(ens.len());
    for (m, member) in ens.members.iter().enumerate() {
        let tape = member.forward_tape(x.view())?;
        let out = tape.output();
        let mut upstream = Array2::zeros((2 * n, 1));
        for (row, anchor) in anchors.iter().enumerate() {
            let diff = out[[row, 0]] - anchor[m];
            loss += coef * diff * diff / (n as f64 * e);
            upstream[[row, 0]] = 2.0 * coef * diff / (n as f64 * e);
        }
        grads.push(member.backward(&tape, upstream.view())?.0);
    }
    Ok(LossAndGrad { loss, grads })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnRoundReport {
    /// Gradient steps evaluated, including one that triggered an early stop.
    pub steps: usize,
    pub updates_applied: usize,
    pub es_stopped: bool,
    pub loss_dis: f64,
    pub loss_penalty: f64,
    pub grad_norm_dis: f64,
    pub grad_norm_pen: f64,
}

/// One return-learning round over the trajectory buffer: snapshot the
/// current returns, then train against freshly computed labels.
pub fn update_round<R: Rng + ?Sized>(
    ens: &mut ReturnEnsemble,
    outcomes: &[TestOutcome],
    stats: &TestStats,
    config: &ReturnConfig,
    rng: &mut R,
) -> Result<ReturnRoundReport> {
    if outcomes.len() < 2 {
        return Err(Error::NotEnoughTrajectories {
            needed: 2,
            have: outcomes.len(),
        });
    }
    let snapshot = ReturnSnapshot::capture(ens, outcomes)?;
    let comparator = Comparator::new(stats);
    train_against_snapshot(ens, outcomes, &comparator, &snapshot, config, rng)
}

/// The gradient loop of [`update_round`] with an explicit comparator and snapshot.
pub fn train_against_snapshot<R: Rng + ?Sized>(
    ens: &mut ReturnEnsemble,
    outcomes: &[TestOutcome],
    comparator: &Comparator,
    snapshot: &ReturnSnapshot,
    config: &ReturnConfig,
    rng: &mut R,
) -> Result<ReturnRoundReport> {
    let mut report = ReturnRoundReport::default();
    let layers = ens.members[0].num_layers();
    for _ in 0..config.update_num {
        let pairs = sample_pair_indices(outcomes.len(), config.batch_size, rng)?;
        let batch = pairs
            .into_iter()
            .map(|(i, j)| comparator.label(&outcomes[i], &outcomes[j]))
            .collect::<Result<Vec<_>>>()?;
        let dis = loss_dis(&batch, ens)?;
        let pen = loss_penalty(&batch, ens, snapshot, config.penalty_coef)?;
        let g_dis = dis.joined();
        let g_pen = pen.joined();
        report.steps += 1;
        report.loss_dis = dis.loss;
        report.loss_penalty = pen.loss;
        report.grad_norm_dis = g_dis.norm();
        report.grad_norm_pen = g_pen.norm();
        if !(dis.loss.is_finite() && pen.loss.is_finite()) {
            return Err(Error::NonFinite("return loss".into()));
        }
        let combined = match config.balancing {
            Balancing::GradientNorm => combine_gn(&g_dis, &g_pen),
            Balancing::EarlyStop => {
                if should_early_stop(&g_dis, &g_pen, config.es_multiple) {
                    report.es_stopped = true;
                    break;
                }
                let mut sum = g_dis;
                sum.add_scaled(&g_pen, 1.0);
                sum
            }
        };
        ens.apply(&combined.split(layers), config.lr)?;
        report.updates_applied += 1;
    }
    Ok(report)
}
