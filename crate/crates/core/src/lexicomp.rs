//! Lexicographic trajectory comparison.
//!
//! Labels a pair of test outcomes with the probability that the first
//! trajectory is closer to the set of all-passing trajectories. Criteria are
//! consulted in priority order and the first one that discriminates decides:
//! all-pass tie, pass count, individual pass-fail tests from hardest to
//! easiest, then indicative tests from least to most optimized.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testkit::{TestOutcome, TestStats};

/// Comparison label: `First` is mu = 1, `Tie` is 0.5 and `Second` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mu {
    First,
    Tie,
    Second,
}

impl Mu {
    pub fn value(self) -> f64 {
        match self {
            Mu::First => 1.0,
            Mu::Tie => 0.5,
            Mu::Second => 0.0,
        }
    }

    pub fn flip(self) -> Mu {
        match self {
            Mu::First => Mu::Second,
            Mu::Tie => Mu::Tie,
            Mu::Second => Mu::First,
        }
    }

    fn from_ordering(ord: Ordering) -> Mu {
        match ord {
            Ordering::Greater => Mu::First,
            Ordering::Equal => Mu::Tie,
            Ordering::Less => Mu::Second,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTriple {
    pub first: TestOutcome,
    pub second: TestOutcome,
    pub mu: Mu,
}

/// Pass-fail test indices by ascending historical pass rate, ties by index.
pub fn order_passfail(stats: &TestStats) -> Vec<usize> {
    let rates = stats.pass_rates();
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
    order
}

/// Indicative test indices by descending skewness of their history, ties by index.
pub fn order_indicative(stats: &TestStats) -> Vec<usize> {
    let skews = stats.skewnesses();
    let mut order: Vec<usize> = (0..skews.len()).collect();
    order.sort_by(|&a, &b| skews[b].total_cmp(&skews[a]));
    order
}

/// Comparator with the test orderings frozen from a stats snapshot, so a
/// whole batch can be labelled without re-sorting.
#[derive(Debug, Clone)]
pub struct Comparator {
    passfail_order: Vec<usize>,
    indicative_order: Vec<usize>,
}

impl Comparator {
    pub fn new(stats: &TestStats) -> Self {
        Self {
            passfail_order: order_passfail(stats),
            indicative_order: order_indicative(stats),
        }
    }

    pub fn passfail_order(&self) -> &[usize] {
        &self.passfail_order
    }

    pub fn indicative_order(&self) -> &[usize] {
        &self.indicative_order
    }

    pub fn compare(&self, o1: &TestOutcome, o2: &TestOutcome) -> Result<Mu> {
        let m = self.passfail_order.len();
        let n = self.indicative_order.len();
        for o in [o1, o2] {
            if o.passfail.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "pass-fail results",
                    expected: m,
                    actual: o.passfail.len(),
                });
            }
            if o.indicative.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "indicative results",
                    expected: n,
                    actual: o.indicative.len(),
                });
            }
        }

        let (c1, c2) = (o1.pass_count(), o2.pass_count());
        if c1 == m && c2 == m {
            return Ok(Mu::Tie);
        }
        if c1 != c2 {
            return Ok(Mu::from_ordering(c1.cmp(&c2)));
        }
        for &k in &self.passfail_order {
            if o1.passfail[k] != o2.passfail[k] {
                return Ok(Mu::from_ordering(o1.passfail[k].cmp(&o2.passfail[k])));
            }
        }
        for &l in &self.indicative_order {
            let (a, b) = (o1.indicative[l], o2.indicative[l]);
            if a > b {
                return Ok(Mu::First);
            }
            if a < b {
                return Ok(Mu::Second);
            }
        }
        Ok(Mu::Tie)
    }

    pub fn label(&self, first: &TestOutcome, second: &TestOutcome) -> Result<ComparisonTriple> {
        let mu = self.compare(first, second)?;
        Ok(ComparisonTriple {
            first: first.clone(),
            second: second.clone(),
            mu,
        })
    }
}

/// One-shot comparison; sorts the tests from `stats` on every call.
pub fn compare(o1: &TestOutcome, o2: &TestOutcome, stats: &TestStats) -> Result<Mu> {
    if stats.passfail_len() != o1.passfail.len() || stats.indicative_len() != o1.indicative.len() {
        return Err(Error::DimensionMismatch {
            context: "outcome vs stats",
            expected: stats.passfail_len() + stats.indicative_len(),
            actual: o1.passfail.len() + o1.indicative.len(),
        });
    }
    Comparator::new(stats).compare(o1, o2)
}

/// Draws `count` index pairs with distinct members; pairs are independent.
pub fn sample_pair_indices<R: Rng + ?Sized>(len: usize, count: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if len < 2 {
        return Err(Error::NotEnoughTrajectories { needed: 2, have: len });
    }
    Ok((0..count)
        .map(|_| {
            let i = rng.random_range(0..len);
            let mut j = rng.random_range(0..len - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect())
}

pub fn sample_pairs<'a, T, R: Rng + ?Sized>(buffer: &'a [T], count: usize, rng: &mut R) -> Result<Vec<(&'a T, &'a T)>> {
    Ok(sample_pair_indices(buffer.len(), count, rng)?
        .into_iter()
        .map(|(i, j)| (&buffer[i], &buffer[j]))
        .collect())
}
