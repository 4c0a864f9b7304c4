//! Run configuration, seeding, the training loop, metrics, checkpoints and
//! the entry points behind the command-line tool.

mod checkpoint;
mod config;
mod evaluate;
mod metrics;
mod run;
mod seeding;
mod train;

pub use checkpoint::load_actor;
pub use config::RunConfig;
pub use evaluate::{evaluate, EvalReport, NamedValue};
pub use metrics::{header, LastLosses, MetricsLog, MetricsRow};
pub use run::{compare, default_out_root, default_run_dir, export_csv, render_verify, train, verify, RunSummary, OUT_ENV};
pub use seeding::{stream, Stream, Streams};
pub use train::Trainer;
