//! Test-driven reinforcement learning.
//!
//! Task objectives are written as pass-fail and indicative test functions over
//! whole trajectories. Pairs of trajectories are labelled by a lexicographic
//! comparison of their test outcomes, a trajectory-return network is fitted
//! to those labels, the return is decomposed into a per-step reward, and a
//! soft actor-critic optimizes the policy against it. The [`oracle`] module
//! checks the maximum-entropy improvement guarantees by exact enumeration on
//! small tabular problems.

pub mod envs;
pub mod error;
pub mod harness;
pub mod lexicomp;
pub mod maxent;
pub mod nn;
pub mod oracle;
pub mod return_learner;
pub mod reward_learner;
pub mod testkit;

pub use error::{Error, Result};
pub use lexicomp::{compare, Comparator, ComparisonTriple, Mu};
pub use testkit::{TestOutcome, TestStats, TestSuite, Trajectory, TrajectoryId, Transition};
