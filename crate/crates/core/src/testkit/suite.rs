use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::stats::{TestStats, DEFAULT_HISTORY_CAPACITY};
use super::trajectory::{Trajectory, TrajectoryId};
use crate::error::{Error, Result};

type Predicate = dyn Fn(&Trajectory) -> bool + Send + Sync;
type Functional = dyn Fn(&Trajectory) -> f64 + Send + Sync;

/// Binary requirement over a whole trajectory.
#[derive(Clone)]
pub struct PassFailTest {
    name: String,
    predicate: Arc<Predicate>,
}

impl PassFailTest {
    pub fn new(name: impl Into<String>, predicate: impl Fn(&Trajectory) -> bool + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            predicate: Arc::new(predicate),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn check(&self, traj: &Trajectory) -> bool {
        (self.predicate)(traj)
    }
}

impl fmt::Debug for PassFailTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("PassFailTest").field(&self.name).finish()
    }
}

/// Real-valued performance metric over a whole trajectory; larger is better.
#[derive(Clone)]
pub struct IndicativeTest {
    name: String,
    functional: Arc<Functional>,
}

impl IndicativeTest {
    pub fn new(name: impl Into<String>, functional: impl Fn(&Trajectory) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            functional: Arc::new(functional),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn measure(&self, traj: &Trajectory) -> f64 {
        (self.functional)(traj)
    }
}

impl fmt::Debug for IndicativeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("IndicativeTest").field(&self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub trajectory_id: TrajectoryId,
    pub passfail: Vec<bool>,
    pub indicative: Vec<f64>,
}

impl TestOutcome {
    pub fn pass_count(&self) -> usize {
        pass_count(&self.passfail)
    }

    pub fn passes_all(&self) -> bool {
        self.passfail.iter().all(|&b| b)
    }
}

pub fn pass_count(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

/// Ordered pass-fail and indicative tests plus the statistics and the
/// per-trajectory outcome cache.
///
/// The suite is single-owner: `evaluate` needs `&mut self`. Outcomes are
/// plain values, so comparisons over them can run anywhere.
#[derive(Debug, Clone)]
pub struct TestSuite {
    passfail: Vec<PassFailTest>,
    indicative: Vec<IndicativeTest>,
    stats: TestStats,
    cache: HashMap<TrajectoryId, TestOutcome>,
    segment_compatible: bool,
}

impl TestSuite {
    pub fn new(passfail: Vec<PassFailTest>, indicative: Vec<IndicativeTest>) -> Result<Self> {
        Self::with_history_capacity(passfail, indicative, DEFAULT_HISTORY_CAPACITY)
    }

    pub fn with_history_capacity(
        passfail: Vec<PassFailTest>,
        indicative: Vec<IndicativeTest>,
        capacity: usize,
    ) -> Result<Self> {
        if passfail.is_empty() || indicative.is_empty() {
            return Err(Error::InvalidArgument(
                "a test suite needs at least one pass-fail and one indicative test".into(),
            ));
        }
        if capacity == 0 {
            return Err(Error::InvalidArgument("history capacity must be positive".into()));
        }
        let mut names = HashSet::new();
        for name in passfail.iter().map(|t| t.name()).chain(indicative.iter().map(|t| t.name())) {
            if !names.insert(name) {
                return Err(Error::InvalidArgument(format!("duplicate test name `{name}`")));
            }
        }
        let stats = TestStats::new(passfail.len(), indicative.len(), capacity);
        Ok(Self {
            passfail,
            indicative,
            stats,
            cache: HashMap::new(),
            segment_compatible: false,
        })
    }

    /// Declares that every test is meaningful on episode segments.
    pub fn segment_compatible(mut self, yes: bool) -> Self {
        self.segment_compatible = yes;
        self
    }

    pub fn is_segment_compatible(&self) -> bool {
        self.segment_compatible
    }

    pub fn passfail_tests(&self) -> &[PassFailTest] {
        &self.passfail
    }

    pub fn indicative_tests(&self) -> &[IndicativeTest] {
        &self.indicative
    }

    pub fn passfail_len(&self) -> usize {
        self.passfail.len()
    }

    pub fn indicative_len(&self) -> usize {
        self.indicative.len()
    }

    pub fn stats(&self) -> &TestStats {
        &self.stats
    }

    /// Replaces the running statistics, e.g. when restoring a checkpoint.
    pub fn restore_stats(&mut self, stats: TestStats) -> Result<()> {
        if stats.passfail_len() != self.passfail.len() || stats.indicative_len() != self.indicative.len() {
            return Err(Error::DimensionMismatch {
                context: "test stats",
                expected: self.passfail.len() + self.indicative.len(),
                actual: stats.passfail_len() + stats.indicative_len(),
            });
        }
        self.stats = stats;
        Ok(())
    }

    /// Memoized evaluation. The first call for a trajectory id runs every
    /// test and records the result into the statistics; later calls return
    /// the cached outcome untouched.
    pub fn evaluate(&mut self, traj: &Trajectory) -> Result<TestOutcome> {
        if let Some(hit) = self.cache.get(&traj.id()) {
            return Ok(hit.clone());
        }
        let outcome = self.evaluate_uncached(traj)?;
        self.stats.record(&outcome.passfail, &outcome.indicative);
        self.cache.insert(traj.id(), outcome.clone());
        Ok(outcome)
    }

    /// Runs the tests without consulting or touching cache and statistics.
    pub fn evaluate_uncached(&self, traj: &Trajectory) -> Result<TestOutcome> {
        let passfail = self.passfail.iter().map(|t| t.check(traj)).collect();
        let indicative = self
            .indicative
            .iter()
            .map(|t| {
                let value = t.measure(traj);
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::NonFiniteTest {
                        name: t.name().to_owned(),
                        value,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TestOutcome {
            trajectory_id: traj.id(),
            passfail,
            indicative,
        })
    }

    pub fn cached(&self, id: TrajectoryId) -> Option<&TestOutcome> {
        self.cache.get(&id)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    /// Drops a cached outcome (statistics keep the recorded values).
    pub fn forget(&mut self, id: TrajectoryId) {
        self.cache.remove(&id);
    }

    /// Cached outcomes sorted by trajectory id.
    pub fn cached_outcomes(&self) -> Vec<TestOutcome> {
        let mut out: Vec<_> = self.cache.values().cloned().collect();
        out.sort_by_key(|o| o.trajectory_id);
        out
    }

    pub fn restore_cache(&mut self, outcomes: Vec<TestOutcome>) {
        self.cache = outcomes.into_iter().map(|o| (o.trajectory_id, o)).collect();
    }
}
