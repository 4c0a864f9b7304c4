//! Exact checks of the maximum-entropy improvement guarantees on enumerable
//! tabular problems.
//!
//! `rho(tau)` is the distance from a trajectory to the set of trajectories
//! passing every pass-fail test. The Wasserstein distance from a trajectory
//! distribution to a point mass on that set reduces to `E[rho^p]^(1/p)`.

use std::collections::{HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{GridChain, GridChainConfig, MAX_HORIZON, MAX_STATES};
use crate::error::{Error, Result};
use crate::lexicomp::{Comparator, Mu};
use crate::maxent::{reweight, ExactPolicy, TabularTrajectory, TrajectoryDistribution};
use crate::testkit::{TestOutcome, TestSuite, Trajectory, TrajectoryId};

pub const LEMMA1_TOLERANCE: f64 = 1e-9;
pub const THEOREM1_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryMetric {
    /// Number of time steps at which the state sequences differ.
    #[default]
    HammingStates,
    /// Mean Euclidean distance between states at equal time steps.
    MeanStateDistance,
}

impl TrajectoryMetric {
    pub fn tabular(self, a: &TabularTrajectory, b: &TabularTrajectory) -> Result<f64> {
        self.states(&a.states, &b.states)
    }

    pub fn continuous(self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        if a.len() != b.len() || a.state_dim() != b.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "trajectory length for metric",
                expected: a.len(),
                actual: b.len(),
            });
        }
        let pairs = a.states().zip(b.states());
        Ok(match self {
            TrajectoryMetric::HammingStates => pairs.filter(|(x, y)| x != y).count() as f64,
            TrajectoryMetric::MeanStateDistance => {
                pairs
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                    .sum::<f64>()
                    / (a.len() + 1) as f64
            }
        })
    }
}

/// Enumerated trajectories that pass every pass-fail test, together with the
/// per-test passing sets they were intersected from.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSet {
    members: Vec<TabularTrajectory>,
    /// Distinct state sequences of `members`; both metrics only read states.
    member_states: Vec<Vec<usize>>,
    per_test: Vec<Vec<TabularTrajectory>>,
    candidates: Vec<TestOutcome>,
}

impl OptimalSet {
    /// Evaluates `suite` on every candidate without touching its statistics.
    pub fn from_suite(candidates: &[TabularTrajectory], suite: &TestSuite) -> Result<Self> {
        let outcomes = candidates
            .iter()
            .enumerate()
            .map(|(i, tau)| suite.evaluate_uncached(&tau.to_trajectory(TrajectoryId(i as u64))))
            .collect::<Result<Vec<_>>>()?;
        let members: Vec<TabularTrajectory> = candidates
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| o.passes_all())
            .map(|(t, _)| t.clone())
            .collect();
        let per_test = (0..suite.passfail_len())
            .map(|i| {
                candidates
                    .iter()
                    .zip(&outcomes)
                    .filter(|(_, o)| o.passfail[i])
                    .map(|(t, _)| t.clone())
                    .collect()
            })
            .collect();
        Ok(Self {
            member_states: distinct_states(&members),
            members,
            per_test,
            candidates: outcomes,
        })
    }

    pub fn from_members(members: Vec<TabularTrajectory>) -> Self {
        Self {
            per_test: vec![members.clone()],
            member_states: distinct_states(&members),
            members,
            candidates: Vec::new(),
        }
    }

    pub fn members(&self) -> &[TabularTrajectory] {
        &self.members
    }

    pub fn per_test(&self) -> &[Vec<TabularTrajectory>] {
        &self.per_test
    }

    /// Outcomes of the candidates in the order they were given.
    pub fn candidate_outcomes(&self) -> &[TestOutcome] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, tau: &TabularTrajectory) -> bool {
        self.members.contains(tau)
    }

    /// Recomputes the intersection of the per-test sets and compares it with
    /// the all-pass set.
    pub fn intersection_identity_holds(&self) -> bool {
        let Some((first, rest)) = self.per_test.split_first() else {
            return self.members.is_empty();
        };
        let others: Vec<HashSet<&TabularTrajectory>> = rest.iter().map(|s| s.iter().collect()).collect();
        let intersection: HashSet<&TabularTrajectory> =
            first.iter().filter(|t| others.iter().all(|s| s.contains(t))).collect();
        let members: HashSet<&TabularTrajectory> = self.members.iter().collect();
        intersection == members && members.len() == self.members.len()
    }
}

fn distinct_states(members: &[TabularTrajectory]) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    members
        .iter()
        .filter(|m| seen.insert(m.states.as_slice()))
        .map(|m| m.states.clone())
        .collect()
}

impl TrajectoryMetric {
    fn states(self, a: &[usize], b: &[usize]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "trajectory length for metric",
                expected: a.len(),
                actual: b.len(),
            });
        }
        let pairs = a.iter().zip(b);
        Ok(match self {
            TrajectoryMetric::HammingStates => pairs.filter(|(x, y)| x != y).count() as f64,
            TrajectoryMetric::MeanStateDistance => pairs.map(|(x, y)| x.abs_diff(*y) as f64).sum::<f64>() / a.len() as f64,
        })
    }
}

fn states_to_set(states: &[usize], set: &OptimalSet, metric: TrajectoryMetric) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyOptimalSet);
    }
    let mut best = f64::INFINITY;
    for member in &set.member_states {
        best = best.min(metric.states(states, member)?);
    }
    Ok(best)
}

/// `min` over the set of `metric(tau, member)`.
pub fn distance_to_set(tau: &TabularTrajectory, set: &OptimalSet, metric: TrajectoryMetric) -> Result<f64> {
    states_to_set(&tau.states, set, metric)
}

/// `rho` for every entry of a distribution, in its order. Trajectories
/// sharing a state sequence share one computation.
pub fn distances(dist: &TrajectoryDistribution, set: &OptimalSet, metric: TrajectoryMetric) -> Result<Vec<f64>> {
    rho_of_all(dist.entries().iter().map(|(tau, _)| tau), set, metric)
}

fn rho_of_all<'a>(
    taus: impl Iterator<Item = &'a TabularTrajectory>,
    set: &OptimalSet,
    metric: TrajectoryMetric,
) -> Result<Vec<f64>> {
    let mut memo: HashMap<&[usize], f64> = HashMap::new();
    taus.map(|tau| {
        if let Some(r) = memo.get(tau.states.as_slice()) {
            return Ok(*r);
        }
        let r = states_to_set(&tau.states, set, metric)?;
        memo.insert(&tau.states, r);
        Ok(r)
    })
    .collect()
}

fn check_normalised(dist: &TrajectoryDistribution) -> Result<()> {
    let mass = dist.total_mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("distribution has total mass {mass}")));
    }
    Ok(())
}

/// `W_p` between the distribution and a point mass on the set: `E[rho^p]^(1/p)`.
pub fn wasserstein_to_dirac(
    dist: &TrajectoryDistribution,
    set: &OptimalSet,
    metric: TrajectoryMetric,
    p: f64,
) -> Result<f64> {
    let rho = distances(dist, set, metric)?;
    wasserstein_from_distances(dist, &rho, p)
}

/// As [`wasserstein_to_dirac`] with precomputed distances.
pub fn wasserstein_from_distances(dist: &TrajectoryDistribution, rho: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("Wasserstein order must be >= 1, got {p}")));
    }
    check_normalised(dist)?;
    let moment: f64 = dist.entries().iter().zip(rho).map(|((_, q), r)| q * r.powf(p)).sum();
    Ok(moment.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub holds: bool,
    /// `(rho, P2(rho) / P1(rho))` for every bin with positive `P1` mass, by increasing `rho`.
    pub ratios: Vec<(f64, f64)>,
    /// Largest increase of the ratio between consecutive bins, 0 if none.
    pub max_violation: f64,
}

/// Bins the trajectories by exact `rho` and checks that the marginal ratio
/// `P2(rho) / P1(rho)` never increases with `rho`. An increase counts as a
/// violation when it exceeds the tolerance relative to `max(1, ratio)`.
pub fn check_lemma1(
    p1: &TrajectoryDistribution,
    p2: &TrajectoryDistribution,
    set: &OptimalSet,
    metric: TrajectoryMetric,
) -> Result<Lemma1Report> {
    if !p1.same_support(p2) {
        return Err(Error::SupportMismatch);
    }
    let rho = distances(p1, set, metric)?;
    let mut rows: Vec<(f64, f64, f64)> = rho
        .iter()
        .zip(p1.entries().iter().zip(p2.entries()))
        .map(|(r, ((_, a), (_, b)))| (*r, *a, *b))
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut bins: Vec<(f64, f64, f64)> = Vec::new();
    for (r, a, b) in rows {
        match bins.last_mut() {
            Some(last) if last.0 == r => {
                last.1 += a;
                last.2 += b;
            }
            _ => bins.push((r, a, b)),
        }
    }
    let ratios: Vec<(f64, f64)> = bins.into_iter().filter(|b| b.1 > 0.0).map(|(r, a, b)| (r, b / a)).collect();
    let mut max_violation: f64 = 0.0;
    let mut holds = true;
    for w in ratios.windows(2) {
        let increase = w[1].1 - w[0].1;
        max_violation = max_violation.max(increase);
        if increase > LEMMA1_TOLERANCE * w[0].1.max(1.0) {
            holds = false;
        }
    }
    Ok(Lemma1Report {
        holds,
        ratios,
        max_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem1Verdict {
    Holds,
    Violated,
    HypothesisNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub verdict: Theorem1Verdict,
    pub d1: f64,
    pub d2: f64,
    pub p: f64,
}

/// True when `R` is a non-increasing function of `rho` alone: equal distance
/// gives equal return and larger distance never gives larger return.
pub fn monotone_in_distance(rho: &[f64], returns: &[f64]) -> bool {
    let mut rows: Vec<(f64, f64)> = rho.iter().copied().zip(returns.iter().copied()).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    rows.windows(2).all(|w| if w[0].0 == w[1].0 { w[0].1 == w[1].1 } else { w[1].1 <= w[0].1 })
}

/// Soft-updates `pi1` with return `R` and compares the Wasserstein distances
/// to the optimal set before and after.
pub fn check_theorem1(
    env: &GridChain,
    pi1: &ExactPolicy,
    reward: impl Fn(&TabularTrajectory) -> f64,
    alpha: f64,
    set: &OptimalSet,
    metric: TrajectoryMetric,
    p: f64,
) -> Result<Theorem1Report> {
    let p1 = env.enumerate_trajectories(pi1)?;
    let returns: Vec<f64> = p1.entries().iter().map(|(tau, _)| reward(tau)).collect();
    let p2 = reweight(&p1, &returns, alpha)?;
    let rho = distances(&p1, set, metric)?;
    let d1 = wasserstein_from_distances(&p1, &rho, p)?;
    let d2 = wasserstein_from_distances(&p2, &rho, p)?;
    let verdict = if !monotone_in_distance(&rho, &returns) {
        Theorem1Verdict::HypothesisNotMet
    } else if d1 >= d2 - THEOREM1_TOLERANCE {
        Theorem1Verdict::Holds
    } else {
        Theorem1Verdict::Violated
    };
    Ok(Theorem1Report { verdict, d1, d2, p })
}

/// Exact label from true distances: the closer trajectory wins.
pub fn mu_reference(
    tau1: &TabularTrajectory,
    tau2: &TabularTrajectory,
    set: &OptimalSet,
    metric: TrajectoryMetric,
) -> Result<Mu> {
    let (r1, r2) = (distance_to_set(tau1, set, metric)?, distance_to_set(tau2, set, metric)?);
    Ok(if r1 < r2 {
        Mu::First
    } else if r1 > r2 {
        Mu::Second
    } else {
        Mu::Tie
    })
}

/// Fraction of pairs on which the lexicographic comparator agrees with
/// [`mu_reference`]. `pairs` index into `candidates` and `outcomes`.
pub fn comparator_agreement(
    candidates: &[TabularTrajectory],
    outcomes: &[TestOutcome],
    comparator: &Comparator,
    pairs: &[(usize, usize)],
    set: &OptimalSet,
    metric: TrajectoryMetric,
) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(1.0);
    }
    let rho = rho_of_all(candidates.iter(), set, metric)?;
    let mut agree = 0usize;
    for &(i, j) in pairs {
        let reference = if rho[i] < rho[j] {
            Mu::First
        } else if rho[i] > rho[j] {
            Mu::Second
        } else {
            Mu::Tie
        };
        if comparator.compare(&outcomes[i], &outcomes[j])? == reference {
            agree += 1;
        }
    }
    Ok(agree as f64 / pairs.len() as f64)
}

/// One randomised verification problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub env: GridChain,
    pub pi1: ExactPolicy,
    pub alpha: f64,
    pub metric: TrajectoryMetric,
    pub set: OptimalSet,
    pub p1: TrajectoryDistribution,
    pub rho: Vec<f64>,
    /// Return of every trajectory of `p1`, non-increasing in `rho`.
    pub returns: Vec<f64>,
    return_table: HashMap<TabularTrajectory, f64>,
    /// Whether the optimal set uses only `pf-goal` (longer horizons make
    /// `pf-no-revisit` unsatisfiable together with it).
    pub goal_only: bool,
}

impl Instance {
    /// Draws a chain, a full-support policy, a temperature and a return that
    /// is a random non-increasing step function of `rho`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let states = rng.random_range(3..=MAX_STATES.min(MAX_HORIZON + 1));
        let horizon = rng.random_range(states - 1..=MAX_HORIZON);
        let actions = rng.random_range(2..=3);
        let slip = if rng.random_bool(0.5) { 0.0 } else { [0.1, 0.25, 0.3, 0.5][rng.random_range(0..4)] };
        let env = GridChain::new(GridChainConfig {
            states,
            actions,
            horizon,
            slip,
        })?;
        let metric = if rng.random_bool(0.75) {
            TrajectoryMetric::HammingStates
        } else {
            TrajectoryMetric::MeanStateDistance
        };
        let pi1 = ExactPolicy::random(horizon, states, actions, rng);
        let alpha = 10f64.powf(rng.random_range(-1.0..=1.0));
        Self::build(env, pi1, alpha, metric, rng)
    }

    pub fn build<R: Rng + ?Sized>(
        env: GridChain,
        pi1: ExactPolicy,
        alpha: f64,
        metric: TrajectoryMetric,
        rng: &mut R,
    ) -> Result<Self> {
        let p1 = env.enumerate_trajectories(&pi1)?;
        let candidates: Vec<TabularTrajectory> = p1.entries().iter().map(|(t, _)| t.clone()).collect();
        let goal_only = env.config().horizon != env.num_states() - 1;
        let full = env.suite()?;
        let suite = if goal_only {
            TestSuite::new(vec![full.passfail_tests()[0].clone()], full.indicative_tests().to_vec())?
        } else {
            full
        };
        let set = OptimalSet::from_suite(&candidates, &suite)?;
        let rho = distances(&p1, &set, metric)?;
        let mut levels: Vec<f64> = rho.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut value = rng.random_range(-2.0..=2.0);
        let mut table = Vec::with_capacity(levels.len());
        for level in &levels {
            table.push((*level, value));
            if rng.random_bool(0.8) {
                value -= rng.random_range(0.0..=2.0);
            }
        }
        let returns: Vec<f64> = rho
            .iter()
            .map(|r| table.iter().find(|(l, _)| l == r).map(|(_, v)| *v).unwrap_or(0.0))
            .collect();
        let return_table = candidates.into_iter().zip(returns.iter().copied()).collect();
        Ok(Self {
            env,
            pi1,
            alpha,
            metric,
            set,
            p1,
            rho,
            returns,
            return_table,
            goal_only,
        })
    }

    pub fn return_of(&self, tau: &TabularTrajectory) -> f64 {
        self.return_table.get(tau).copied().unwrap_or(f64::NAN)
    }

    pub fn soft_updated(&self) -> Result<TrajectoryDistribution> {
        reweight(&self.p1, &self.returns, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVerdict {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub slip: f64,
    pub alpha: f64,
    pub metric: TrajectoryMetric,
    pub trajectories: usize,
    pub optimal: usize,
    pub lemma1: bool,
    pub theorem1_p1: Theorem1Report,
    pub theorem1_p2: Theorem1Report,
    pub agreement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Machine-readable result of a verification sweep. `d1` and `d2` are the
/// `p = 1` distances of the first instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub lemma1: Verdict,
    pub theorem1: Verdict,
    pub d1: f64,
    pub d2: f64,
    pub seed: u64,
    pub mean_agreement: f64,
    pub instances: Vec<InstanceVerdict>,
}

const MAX_AGREEMENT_PAIRS: usize = 20_000;

/// Runs the ratio-monotonicity check, the contraction check for p = 1 and
/// p = 2, and the comparator agreement statistic on one instance.
pub fn verify_instance<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<InstanceVerdict> {
    let p2 = inst.soft_updated()?;
    let lemma = check_lemma1(&inst.p1, &p2, &inst.set, inst.metric)?;
    let by_index = |tau: &TabularTrajectory| inst.return_of(tau);
    let t1 = check_theorem1(&inst.env, &inst.pi1, by_index, inst.alpha, &inst.set, inst.metric, 1.0)?;
    let t2 = check_theorem1(&inst.env, &inst.pi1, by_index, inst.alpha, &inst.set, inst.metric, 2.0)?;

    let candidates: Vec<TabularTrajectory> = inst.p1.entries().iter().map(|(t, _)| t.clone()).collect();
    let mut suite = inst.env.suite()?;
    let outcomes = candidates
        .iter()
        .enumerate()
        .map(|(i, t)| suite.evaluate(&t.to_trajectory(TrajectoryId(i as u64))))
        .collect::<Result<Vec<_>>>()?;
    let comparator = Comparator::new(suite.stats());
    let n = candidates.len();
    let pairs: Vec<(usize, usize)> = if n * (n - 1) / 2 <= MAX_AGREEMENT_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let idx: Vec<usize> = (0..n).collect();
        (0..MAX_AGREEMENT_PAIRS)
            .map(|_| {
                let two: Vec<&usize> = idx.choose_multiple(rng, 2).collect();
                (*two[0], *two[1])
            })
            .collect()
    };
    let agreement = comparator_agreement(&candidates, &outcomes, &comparator, &pairs, &inst.set, inst.metric)?;

    let c = inst.env.config();
    Ok(InstanceVerdict {
        states: c.states,
        actions: c.actions,
        horizon: c.horizon,
        slip: c.slip,
        alpha: inst.alpha,
        metric: inst.metric,
        trajectories: n,
        optimal: inst.set.len(),
        lemma1: lemma.holds,
        theorem1_p1: t1,
        theorem1_p2: t2,
        agreement,
    })
}

/// Verification sweep over `instances` randomised problems.
pub fn verify_theory<R: Rng + ?Sized>(instances: usize, seed: u64, rng: &mut R) -> Result<VerifyReport> {
    if instances == 0 {
        return Err(Error::InvalidArgument("need at least one instance".into()));
    }
    let mut verdicts = Vec::with_capacity(instances);
    for _ in 0..instances {
        let inst = Instance::random(rng)?;
        verdicts.push(verify_instance(&inst, rng)?);
    }
    let theorem_ok = |r: &Theorem1Report| r.verdict == Theorem1Verdict::Holds;
    Ok(VerifyReport {
        lemma1: verdicts.iter().all(|v| v.lemma1).into(),
        theorem1: verdicts.iter().all(|v| theorem_ok(&v.theorem1_p1) && theorem_ok(&v.theorem1_p2)).into(),
        d1: verdicts[0].theorem1_p1.d1,
        d2: verdicts[0].theorem1_p1.d2,
        seed,
        mean_agreement: verdicts.iter().map(|v| v.agreement).sum::<f64>() / instances as f64,
        instances: verdicts,
    })
}
