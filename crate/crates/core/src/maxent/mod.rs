//! Maximum-entropy policy optimization.

pub mod exact;
mod policy;
mod replay;
mod sac;
mod warmup;

pub use exact::{reweight, soft_update_exact, ExactPolicy, TabularTrajectory, TrajectoryDistribution};
pub use policy::{GaussianPolicy, PolicySample, LOG_STD_MAX, LOG_STD_MIN};
pub use replay::{ReplayBatch, ReplayBuffer};
pub use sac::{actor_loss_and_grad, critic_loss_and_grad, critic_targets, sac_update, SacConfig, SacReport, SoftCritic};
pub use warmup::{warmup, WarmupData};
