//! Checkpoint directory layout:
//!
//! ```text
//! actor.mlp q1.mlp q2.mlp q1_target.mlp q2_target.mlp
//! return-<m>.mlp reward-<m>.mlp      one per ensemble member
//! stats.json                         test statistics and outcome cache
//! rng.json                           every random stream
//! state.json                         optimizers, buffers, loop counters
//! ```

use std::collections::VecDeque;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{GaussianPolicy, ReplayBuffer, SoftCritic};
use crate::nn::{format, AdamState, Mlp};
use crate::return_learner::ReturnEnsemble;
use crate::reward_learner::RewardEnsemble;
use crate::testkit::{TestOutcome, TestStats, Trajectory, Transition};

use super::config::RunConfig;
use super::metrics::LastLosses;
use super::seeding::Streams;
use super::train::{build_suite, Trainer};

#[derive(Serialize, Deserialize)]
struct StatsFile {
    stats: TestStats,
    outcomes: Vec<TestOutcome>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    config: RunConfig,
    iteration: usize,
    episodes: usize,
    next_id: u64,
    state: Vec<f64>,
    episode: Vec<Transition>,
    env: Vec<f64>,
    log_alpha: f64,
    target_entropy: f64,
    actor_opt: AdamState,
    alpha_opt: AdamState,
    q1_opt: AdamState,
    q2_opt: AdamState,
    return_opts: Vec<AdamState>,
    reward_opts: Vec<AdamState>,
    replay: ReplayBuffer,
    trajectories: Vec<Trajectory>,
    recent: Vec<TestOutcome>,
    last: LastLosses,
}

fn artifact_error(name: &str, message: impl ToString) -> Error {
    Error::Checkpoint {
        artifact: name.to_string(),
        message: message.to_string(),
    }
}

fn save_net(dir: &Path, name: &str, net: &Mlp) -> Result<()> {
    format::save(net, &dir.join(name)).map_err(|e| artifact_error(name, e))
}

fn load_net(dir: &Path, name: &str) -> Result<Mlp> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(artifact_error(name, format!("missing from {}", dir.display())));
    }
    format::load(&path).map_err(|e| artifact_error(name, e))
}

fn save_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| artifact_error(name, e))?;
    std::fs::write(dir.join(name), text).map_err(|e| artifact_error(name, e))
}

fn load_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(artifact_error(name, format!("missing from {}", dir.display())));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| artifact_error(name, e))?;
    serde_json::from_str(&text).map_err(|e| artifact_error(name, e))
}

/// Only the actor, for rolling out a trained policy.
pub fn load_actor(dir: &Path) -> Result<Mlp> {
    load_net(dir, "actor.mlp")
}

impl Trainer {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_net(dir, "actor.mlp", &self.policy.actor)?;
        save_net(dir, "q1.mlp", &self.critic.q1)?;
        save_net(dir, "q2.mlp", &self.critic.q2)?;
        save_net(dir, "q1_target.mlp", &self.critic.q1_target)?;
        save_net(dir, "q2_target.mlp", &self.critic.q2_target)?;
        for (m, net) in self.returns.members().iter().enumerate() {
            save_net(dir, &format!("return-{m}.mlp"), net)?;
        }
        for (m, net) in self.rewards.members().iter().enumerate() {
            save_net(dir, &format!("reward-{m}.mlp"), net)?;
        }
        save_json(
            dir,
            "stats.json",
            &StatsFile {
                stats: self.suite.stats().clone(),
                outcomes: self.suite.cached_outcomes(),
            },
        )?;
        save_json(dir, "rng.json", &self.streams)?;
        save_json(
            dir,
            "state.json",
            &StateFile {
                config: self.config.clone(),
                iteration: self.iteration,
                episodes: self.episodes,
                next_id: self.next_id,
                state: self.state.clone(),
                episode: self.episode.clone(),
                env: self.env.snapshot(),
                log_alpha: self.policy.log_alpha,
                target_entropy: self.policy.target_entropy,
                actor_opt: self.policy.actor_opt.clone(),
                alpha_opt: self.policy.alpha_opt.clone(),
                q1_opt: self.critic.q1_opt.clone(),
                q2_opt: self.critic.q2_opt.clone(),
                return_opts: self.returns.optimizers().to_vec(),
                reward_opts: self.rewards.optimizers().to_vec(),
                replay: self.replay.clone(),
                trajectories: self.trajectories.iter().cloned().collect(),
                recent: self.recent.iter().cloned().collect(),
                last: self.last,
            },
        )
    }

    /// Restores a trainer that continues exactly as the saved one would have.
    pub fn load(dir: &Path) -> Result<Self> {
        let s: StateFile = load_json(dir, "state.json")?;
        let stats: StatsFile = load_json(dir, "stats.json")?;
        let streams: Streams = load_json(dir, "rng.json")?;
        let config = s.config;
        let mut env = config.env.build()?;
        env.restore(&s.env).map_err(|e| artifact_error("state.json", e))?;
        let mut suite = build_suite(&config)?;
        suite.restore_stats(stats.stats).map_err(|e| artifact_error("stats.json", e))?;
        suite.restore_cache(stats.outcomes);

        let mut policy = GaussianPolicy::from_actor(
            load_net(dir, "actor.mlp")?,
            env.action_low(),
            env.action_high(),
            config.init_alpha,
        );
        policy.actor_opt = s.actor_opt;
        policy.alpha_opt = s.alpha_opt;
        policy.log_alpha = s.log_alpha;
        policy.target_entropy = s.target_entropy;
        policy.auto_alpha = config.auto_alpha;

        let critic = SoftCritic {
            q1: load_net(dir, "q1.mlp")?,
            q2: load_net(dir, "q2.mlp")?,
            q1_target: load_net(dir, "q1_target.mlp")?,
            q2_target: load_net(dir, "q2_target.mlp")?,
            q1_opt: s.q1_opt,
            q2_opt: s.q2_opt,
            gamma: config.discount,
            tau: config.critic_tau,
        };
        let returns = ReturnEnsemble::from_members(
            (0..config.ret_ensemble)
                .map(|m| load_net(dir, &format!("return-{m}.mlp")))
                .collect::<Result<_>>()?,
        )?
        .with_optimizers(s.return_opts)
        .map_err(|e| artifact_error("state.json", e))?;
        let rewards = RewardEnsemble::from_members(
            (0..config.rew_ensemble)
                .map(|m| load_net(dir, &format!("reward-{m}.mlp")))
                .collect::<Result<_>>()?,
        )?
        .with_optimizers(s.reward_opts)
        .map_err(|e| artifact_error("state.json", e))?;

        Ok(Self {
            env,
            suite,
            policy,
            critic,
            returns,
            rewards,
            replay: s.replay,
            trajectories: VecDeque::from(s.trajectories),
            recent: VecDeque::from(s.recent),
            streams,
            iteration: s.iteration,
            episodes: s.episodes,
            next_id: s.next_id,
            state: s.state,
            episode: s.episode,
            last: s.last,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvConfig, PointMassConfig};

    fn tiny() -> RunConfig {
        RunConfig {
            env: EnvConfig::PointMassReach(PointMassConfig {
                horizon: 20,
                start_jitter: 0.1,
                ..PointMassConfig::default()
            }),
            hidden: 8,
            batch_size: 16,
            unsupervised_steps: 50,
            trajectory_max_num: 4,
            ret_hidden: 8,
            ret_depth: 1,
            ret_batch_size: 8,
            ret_update_num: 3,
            ret_update_interval: 30,
            rew_hidden: 8,
            rew_depth: 1,
            rew_batch_size: 4,
            rew_update_num: 3,
            rew_update_interval: 30,
            log_interval: 10,
            ..RunConfig::default()
        }
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    }

    #[test]
    fn restore_continues_bit_identically() {
        let tmp = tempfile::tempdir().unwrap();
        let mut a = Trainer::new(tiny()).unwrap();
        for _ in 0..37 {
            a.step().unwrap();
        }
        a.save(&tmp.path().join("mid")).unwrap();
        let mut b = Trainer::load(&tmp.path().join("mid")).unwrap();
        for _ in 0..30 {
            let (ra, rb) = (a.step().unwrap(), b.step().unwrap());
            assert_eq!(ra, rb);
        }
        a.save(&tmp.path().join("a")).unwrap();
        b.save(&tmp.path().join("b")).unwrap();
        assert_eq!(dir_bytes(&tmp.path().join("a")), dir_bytes(&tmp.path().join("b")));
    }

    #[test]
    fn stats_round_trip_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let mut a = Trainer::new(tiny()).unwrap();
        for _ in 0..45 {
            a.step().unwrap();
        }
        a.save(tmp.path()).unwrap();
        let b = Trainer::load(tmp.path()).unwrap();
        let (sa, sb) = (a.suite().stats(), b.suite().stats());
        for i in 0..sa.passfail_len() {
            assert_eq!(sa.passes(i), sb.passes(i));
            assert_eq!(sa.evaluations(i), sb.evaluations(i));
        }
        assert_eq!(sa, sb);
    }

    #[test]
    fn missing_artifact_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        Trainer::new(tiny()).unwrap().save(tmp.path()).unwrap();
        std::fs::remove_file(tmp.path().join("q2_target.mlp")).unwrap();
        let err = Trainer::load(tmp.path()).err().unwrap();
        assert!(matches!(&err, Error::Checkpoint { artifact, .. } if artifact == "q2_target.mlp"), "{err}");
        std::fs::remove_file(tmp.path().join("rng.json")).unwrap();
        let err = Trainer::load(tmp.path()).err().unwrap();
        assert!(err.to_string().contains("rng.json"));
    }
}
