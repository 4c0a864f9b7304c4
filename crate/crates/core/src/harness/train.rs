use std::collections::VecDeque;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::maxent::{sac_update, warmup, GaussianPolicy, ReplayBuffer, SoftCritic};
use crate::return_learner::{self, ReturnEnsemble};
use crate::reward_learner::{self, RewardEnsemble};
use crate::testkit::{TestOutcome, TestStats, TestSuite, Trajectory, TrajectoryId, Transition};

use super::config::RunConfig;
use super::metrics::{LastLosses, MetricsRow};
use super::seeding::Streams;

/// Complete training state. One [`Trainer::step`] is one environment step of
/// the main loop plus whatever updates are due at that iteration.
pub struct Trainer {
    pub(crate) config: RunConfig,
    pub(crate) env: Box<dyn Environment + Send>,
    pub(crate) suite: TestSuite,
    pub(crate) policy: GaussianPolicy,
    pub(crate) critic: SoftCritic,
    pub(crate) returns: ReturnEnsemble,
    pub(crate) rewards: RewardEnsemble,
    pub(crate) replay: ReplayBuffer,
    /// Bounded FIFO of trajectories used for return and reward learning.
    pub(crate) trajectories: VecDeque<Trajectory>,
    /// Whole-episode outcomes for the rolling CSV columns.
    pub(crate) recent: VecDeque<TestOutcome>,
    pub(crate) streams: Streams,
    pub(crate) iteration: usize,
    pub(crate) episodes: usize,
    pub(crate) next_id: u64,
    pub(crate) state: Vec<f64>,
    pub(crate) episode: Vec<Transition>,
    pub(crate) last: LastLosses,
}

pub(crate) fn build_suite(config: &RunConfig) -> Result<TestSuite> {
    let mut suite = config.env.suite()?;
    let stats = TestStats::new(suite.passfail_len(), suite.indicative_len(), config.history_capacity);
    suite.restore_stats(stats)?;
    Ok(suite)
}

impl Trainer {
    /// Initialises every network from the `init` stream, then runs the
    /// random-action warm-up and stores its experience.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut env = config.env.build()?;
        let suite = build_suite(&config)?;
        let mut streams = Streams::new(config.seed);
        let (ds, da) = (env.state_dim(), env.action_dim());
        let mut policy = GaussianPolicy::new(
            ds,
            env.action_low(),
            env.action_high(),
            config.hidden,
            config.depth,
            config.init_alpha,
            &mut streams.init,
        );
        policy.auto_alpha = config.auto_alpha;
        let critic = SoftCritic::new(
            ds,
            da,
            config.hidden,
            config.depth,
            config.discount,
            config.critic_tau,
            &mut streams.init,
        );
        let returns = ReturnEnsemble::new(
            suite.indicative_len(),
            config.ret_hidden,
            config.ret_depth,
            config.ret_ensemble,
            &mut streams.init,
        );
        let rewards = RewardEnsemble::new(
            ds,
            da,
            config.rew_hidden,
            config.rew_depth,
            config.rew_ensemble,
            &mut streams.init,
        );
        let replay = ReplayBuffer::new(config.replay_capacity, ds, da);
        let data = warmup(env.as_mut(), config.unsupervised_steps, 0, &mut streams.warmup)?;
        let state = env.reset(&mut streams.env);
        let mut trainer = Self {
            env,
            suite,
            policy,
            critic,
            returns,
            rewards,
            replay,
            trajectories: VecDeque::with_capacity(config.trajectory_max_num + 1),
            recent: VecDeque::with_capacity(config.rolling_window + 1),
            streams,
            iteration: 0,
            episodes: 0,
            next_id: data.trajectories.len() as u64,
            state,
            episode: Vec::new(),
            last: LastLosses::default(),
            config,
        };
        for (tr, &terminal) in data.transitions.iter().zip(&data.terminals) {
            let r = trainer.rewards.reward_of(&tr.state, &tr.action)?;
            trainer.replay.push(&tr.state, &tr.action, &tr.next_state, r, terminal)?;
        }
        for traj in data.trajectories {
            trainer.admit(traj)?;
        }
        trainer.last.alpha = trainer.policy.alpha();
        Ok(trainer)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn suite(&self) -> &TestSuite {
        &self.suite
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn trajectories(&self) -> &VecDeque<Trajectory> {
        &self.trajectories
    }

    pub fn last_losses(&self) -> &LastLosses {
        &self.last
    }

    /// Evaluates a finished episode and appends it (or its segments, when the
    /// suite allows them) to the trajectory buffer, evicting the oldest.
    fn admit(&mut self, traj: Trajectory) -> Result<()> {
        let pieces = if self.suite.is_segment_compatible() && traj.len() > self.config.segment_size {
            let pieces = traj.segments(self.config.segment_size, self.next_id);
            self.next_id += pieces.len() as u64;
            self.recent.push_back(self.suite.evaluate_uncached(&traj)?);
            pieces
        } else {
            let outcome = self.suite.evaluate(&traj)?;
            self.recent.push_back(outcome);
            vec![traj]
        };
        if self.recent.len() > self.config.rolling_window {
            self.recent.pop_front();
        }
        for piece in pieces {
            self.suite.evaluate(&piece)?;
            self.trajectories.push_back(piece);
            if self.trajectories.len() > self.config.trajectory_max_num {
                let old = self.trajectories.pop_front().expect("buffer is non-empty");
                self.suite.forget(old.id());
            }
        }
        Ok(())
    }

    fn buffer_outcomes(&self) -> Result<Vec<TestOutcome>> {
        self.trajectories
            .iter()
            .map(|t| self.suite.cached(t.id()).cloned().ok_or(Error::MissingReturn(t.id())))
            .collect()
    }

    /// One iteration. Returns a CSV row when the iteration is due for logging.
    pub fn step(&mut self) -> Result<Option<MetricsRow>> {
        self.iteration += 1;
        let it = self.iteration;

        let action = self.policy.act(&self.state, true, &mut self.streams.policy)?;
        let step = self.env.step(&action, &mut self.streams.env)?;
        if step.next_state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("environment state at iteration {it}")));
        }
        let r = self.rewards.reward_of(&self.state, &action)?;
        self.replay.push(&self.state, &action, &step.next_state, r, step.terminal)?;
        let state = std::mem::replace(&mut self.state, step.next_state.clone());
        self.episode.push(Transition::new(state, action, step.next_state, step.done));
        if step.done {
            let traj = Trajectory::new(TrajectoryId(self.next_id), std::mem::take(&mut self.episode))?;
            self.next_id += 1;
            self.episodes += 1;
            self.admit(traj)?;
            self.state = self.env.reset(&mut self.streams.env);
        }

        if it.is_multiple_of(self.config.ret_update_interval) && self.trajectories.len() >= 2 {
            let outcomes = self.buffer_outcomes()?;
            let report = return_learner::update_round(
                &mut self.returns,
                &outcomes,
                self.suite.stats(),
                &self.config.return_config(),
                &mut self.streams.pairs,
            )?;
            self.last.loss_dis = report.loss_dis;
            self.last.loss_penalty = report.loss_penalty;
            self.last.grad_norm_dis = report.grad_norm_dis;
            self.last.grad_norm_pen = report.grad_norm_pen;
            self.last.es_stopped = report.es_stopped;
        }
        if it.is_multiple_of(self.config.rew_update_interval) && !self.trajectories.is_empty() {
            let (suite, returns) = (&self.suite, &self.returns);
            let buffer: Vec<Trajectory> = self.trajectories.iter().cloned().collect();
            let report = reward_learner::update_round(
                &mut self.rewards,
                &buffer,
                |t| returns.return_of(suite.cached(t.id()).ok_or(Error::MissingReturn(t.id()))?),
                &self.config.reward_config(),
                &mut self.streams.reward,
            )?;
            self.last.loss_reward = report.final_loss;
            reward_learner::relabel(&mut self.replay, &self.rewards)?;
        }

        if self.replay.len() >= self.config.batch_size {
            let sac = self.config.sac();
            for _ in 0..self.config.gradient_steps {
                let batch = self.replay.sample(self.config.batch_size, &mut self.streams.sac)?;
                let report = sac_update(&mut self.policy, &mut self.critic, &batch, &sac, &mut self.streams.sac)?;
                self.last.actor_loss = report.actor_loss;
                self.last.critic_loss = report.critic_loss;
            }
        }
        self.last.alpha = self.policy.alpha();

        Ok(it.is_multiple_of(self.config.log_interval).then(|| self.row()))
    }

    /// Rolling averages over the most recent whole episodes.
    pub fn row(&self) -> MetricsRow {
        let n = self.recent.len();
        let mean = |f: &dyn Fn(&TestOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                self.recent.iter().map(f).sum::<f64>() / n as f64
            }
        };
        MetricsRow {
            iteration: self.iteration,
            episodes: self.episodes,
            pass_rates: (0..self.suite.passfail_len())
                .map(|i| mean(&|o| f64::from(u8::from(o.passfail[i]))))
                .collect(),
            all_pass_rate: mean(&|o| f64::from(u8::from(o.passes_all()))),
            indicative_means: (0..self.suite.indicative_len()).map(|i| mean(&|o| o.indicative[i])).collect(),
            losses: self.last,
        }
    }
}
