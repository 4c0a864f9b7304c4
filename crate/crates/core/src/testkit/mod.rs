//! Trajectories, test functions and memoized test-suite evaluation.

mod stats;
mod suite;
mod trajectory;

pub use stats::{skewness, TestStats, DEFAULT_HISTORY_CAPACITY};
pub use suite::{pass_count, IndicativeTest, PassFailTest, TestOutcome, TestSuite};
pub use trajectory::{Trajectory, TrajectoryId, Transition};
