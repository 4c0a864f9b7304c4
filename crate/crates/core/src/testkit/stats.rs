use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const DEFAULT_HISTORY_CAPACITY: usize = 10_000;

/// Running statistics over every trajectory a suite has evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStats {
    evaluations: Vec<u64>,
    passes: Vec<u64>,
    histories: Vec<VecDeque<f64>>,
    capacity: usize,
}

impl TestStats {
    pub fn new(passfail: usize, indicative: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            evaluations: vec![0; passfail],
            passes: vec![0; passfail],
            histories: vec![VecDeque::new(); indicative],
            capacity,
        }
    }

    pub fn passfail_len(&self) -> usize {
        self.evaluations.len()
    }

    pub fn indicative_len(&self) -> usize {
        self.histories.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn evaluations(&self, test: usize) -> u64 {
        self.evaluations[test]
    }

    pub fn passes(&self, test: usize) -> u64 {
        self.passes[test]
    }

    pub fn history(&self, test: usize) -> &VecDeque<f64> {
        &self.histories[test]
    }

    pub fn record(&mut self, passfail: &[bool], indicative: &[f64]) {
        debug_assert_eq!(passfail.len(), self.evaluations.len());
        debug_assert_eq!(indicative.len(), self.histories.len());
        for (i, &bit) in passfail.iter().enumerate() {
            self.evaluations[i] += 1;
            self.passes[i] += u64::from(bit);
        }
        for (hist, &v) in self.histories.iter_mut().zip(indicative) {
            if hist.len() == self.capacity {
                hist.pop_front();
            }
            hist.push_back(v);
        }
    }

    /// Historical pass rate; an unevaluated test reports 0.5.
    pub fn pass_rate(&self, test: usize) -> f64 {
        match self.evaluations[test] {
            0 => 0.5,
            n => self.passes[test] as f64 / n as f64,
        }
    }

    pub fn pass_rates(&self) -> Vec<f64> {
        (0..self.passfail_len()).map(|i| self.pass_rate(i)).collect()
    }

    pub fn skewness(&self, test: usize) -> f64 {
        let hist = &self.histories[test];
        let (a, b) = hist.as_slices();
        skewness_iter(a.iter().chain(b).copied(), hist.len())
    }

    pub fn skewnesses(&self) -> Vec<f64> {
        (0..self.indicative_len()).map(|j| self.skewness(j)).collect()
    }
}

const MIN_VARIANCE: f64 = 1e-12;

/// Fisher-Pearson sample skewness `m3 / m2^(3/2)` using biased central moments.
///
/// Returns 0 for fewer than three values or a variance below `1e-12`.
pub fn skewness(values: &[f64]) -> f64 {
    skewness_iter(values.iter().copied(), values.len())
}

fn skewness_iter<I>(values: I, len: usize) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    if len < 3 {
        return 0.0;
    }
    let n = len as f64;
    let mean = values.clone().sum::<f64>() / n;
    let (m2, m3) = values.fold((0.0, 0.0), |(m2, m3), v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 < MIN_VARIANCE {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}
