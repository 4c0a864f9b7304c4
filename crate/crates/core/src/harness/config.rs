use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::maxent::SacConfig;
use crate::return_learner::{Balancing, ReturnConfig};
use crate::reward_learner::RewardConfig;

/// Everything a training run needs. Unknown keys are rejected; omitted keys
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub seed: u64,
    pub total_iterations: usize,

    pub discount: f64,
    pub hidden: usize,
    pub depth: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub batch_size: usize,
    pub critic_tau: f64,
    pub init_alpha: f64,
    pub auto_alpha: bool,
    pub gradient_steps: usize,
    pub replay_capacity: usize,

    pub unsupervised_steps: usize,
    pub trajectory_max_num: usize,
    pub segment_size: usize,

    pub ret_lr: f64,
    pub ret_ensemble: usize,
    pub ret_batch_size: usize,
    pub ret_update_num: usize,
    pub ret_update_interval: usize,
    pub ret_hidden: usize,
    pub ret_depth: usize,
    pub change_penalty: f64,
    pub strategy: Balancing,
    pub es_multiple: f64,

    pub rew_lr: f64,
    pub rew_ensemble: usize,
    pub rew_batch_size: usize,
    pub rew_update_num: usize,
    pub rew_update_interval: usize,
    pub rew_hidden: usize,
    pub rew_depth: usize,

    pub history_capacity: usize,
    pub log_interval: usize,
    /// Completed episodes averaged in the rolling CSV columns.
    pub rolling_window: usize,
    pub eval_episodes: usize,
    /// 0 saves only the final checkpoint.
    pub checkpoint_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            seed: 0,
            total_iterations: 100_000,
            discount: 0.99,
            hidden: 1024,
            depth: 2,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            alpha_lr: 1e-4,
            batch_size: 1024,
            critic_tau: 0.005,
            init_alpha: 0.1,
            auto_alpha: true,
            gradient_steps: 1,
            replay_capacity: 1_000_000,
            unsupervised_steps: 9000,
            trajectory_max_num: 100,
            segment_size: 50,
            ret_lr: 3e-4,
            ret_ensemble: 3,
            ret_batch_size: 128,
            ret_update_num: 50,
            ret_update_interval: 5000,
            ret_hidden: 256,
            ret_depth: 3,
            change_penalty: 0.1,
            strategy: Balancing::EarlyStop,
            es_multiple: 10.0,
            rew_lr: 3e-4,
            rew_ensemble: 3,
            rew_batch_size: 128,
            rew_update_num: 50,
            rew_update_interval: 5000,
            rew_hidden: 256,
            rew_depth: 3,
            history_capacity: crate::testkit::DEFAULT_HISTORY_CAPACITY,
            log_interval: 1000,
            rolling_window: 10,
            eval_episodes: 50,
            checkpoint_interval: 0,
        }
    }
}

impl RunConfig {
    /// Parses JSON, naming the offending key on failure, then validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            key: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: path.display().to_string(),
            message: format!("cannot read config file: {e}"),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let positive_f = [
            ("discount", self.discount),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_lr", self.alpha_lr),
            ("critic_tau", self.critic_tau),
            ("init_alpha", self.init_alpha),
            ("ret_lr", self.ret_lr),
            ("rew_lr", self.rew_lr),
            ("es_multiple", self.es_multiple),
        ];
        for (key, v) in positive_f {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config {
                    key: key.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if self.discount > 1.0 || self.critic_tau > 1.0 {
            let key = if self.discount > 1.0 { "discount" } else { "critic_tau" };
            return Err(Error::Config {
                key: key.into(),
                message: "must not exceed 1".into(),
            });
        }
        if !(self.change_penalty.is_finite() && self.change_penalty >= 0.0) {
            return Err(Error::Config {
                key: "change_penalty".into(),
                message: format!("must be non-negative, got {}", self.change_penalty),
            });
        }
        let positive_u = [
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("trajectory_max_num", self.trajectory_max_num),
            ("segment_size", self.segment_size),
            ("ret_ensemble", self.ret_ensemble),
            ("ret_batch_size", self.ret_batch_size),
            ("ret_update_interval", self.ret_update_interval),
            ("ret_hidden", self.ret_hidden),
            ("rew_ensemble", self.rew_ensemble),
            ("rew_batch_size", self.rew_batch_size),
            ("rew_update_interval", self.rew_update_interval),
            ("rew_hidden", self.rew_hidden),
            ("history_capacity", self.history_capacity),
            ("log_interval", self.log_interval),
            ("rolling_window", self.rolling_window),
        ];
        for (key, v) in positive_u {
            if v == 0 {
                return Err(Error::Config {
                    key: key.into(),
                    message: "must be positive".into(),
                });
            }
        }
        // building the environment validates its overrides
        self.env.build()?;
        Ok(())
    }

    pub fn sac(&self) -> SacConfig {
        SacConfig {
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            alpha_lr: self.alpha_lr,
        }
    }

    pub fn return_config(&self) -> ReturnConfig {
        ReturnConfig {
            update_num: self.ret_update_num,
            batch_size: self.ret_batch_size,
            lr: self.ret_lr,
            penalty_coef: self.change_penalty,
            balancing: self.strategy,
            es_multiple: self.es_multiple,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            update_num: self.rew_update_num,
            batch_size: self.rew_batch_size,
            lr: self.rew_lr,
        }
    }
}
