//! DQN and DRQN agents trained on one-step TD targets from experience replay.
//!
//! There is no target network: the same parameters produce the bootstrap
//! target and receive the update. Recurrent agents are trained with trace
//! length one, replaying the hidden states recorded while acting.

mod episode;
mod her;
mod replay;
mod schedule;

pub use episode::{run_episode, Controller, Decision, EpisodeRecord, Exploration};
pub use her::her_relabel;
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{encode_into, Action, EnvError, Observation, PhaseDiagram};
use crate::neural::{adam_update, AdamConfig, AdamState, Architecture, NetworkParams, NeuralError};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("hindsight relabelling needs goal-augmented observations")]
    NotGoalAugmented,
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("batch is empty")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Dqn,
    Drqn,
}

/// Network kind plus whether hindsight relabelling is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub her: bool,
}

impl AgentSpec {
    pub const ALL: [AgentSpec; 4] = [
        AgentSpec {
            kind: AgentKind::Dqn,
            her: false,
        },
        AgentSpec {
            kind: AgentKind::Drqn,
            her: false,
        },
        AgentSpec {
            kind: AgentKind::Dqn,
            her: true,
        },
        AgentSpec {
            kind: AgentKind::Drqn,
            her: true,
        },
    ];

    pub fn name(&self) -> &'static str {
        match (self.kind, self.her) {
            (AgentKind::Dqn, false) => "dqn",
            (AgentKind::Drqn, false) => "drqn",
            (AgentKind::Dqn, true) => "dqn-her",
            (AgentKind::Drqn, true) => "drqn-her",
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentSpec {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['+', '_'], "-");
        AgentSpec::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| AgentError::Config(format!("unknown agent '{s}'")))
    }
}

/// Hyperparameters shared by every agent kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub batch_size: usize,
    pub dense_hidden: usize,
    pub gru_hidden: usize,
    pub buffer_capacity: usize,
    /// Transitions gathered before the first gradient step.
    pub warmup: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub her_fraction: f64,
    /// Global-norm gradient clipping; off unless set.
    pub grad_clip: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.95,
            batch_size: 127,
            dense_hidden: 48,
            gru_hidden: 128,
            buffer_capacity: 100_000,
            warmup: 1_000,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_decay: 1e-5,
            epsilon_min: 0.01,
            her_fraction: 0.05,
            grad_clip: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail("batch size must be in 1..=buffer_capacity");
        }
        if self.dense_hidden == 0 || self.gru_hidden == 0 {
            return fail("hidden widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.her_fraction) {
            return fail("her_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_min)
            || self.epsilon_decay < 0.0
        {
            return fail("epsilon schedule out of range");
        }
        if matches!(self.grad_clip, Some(c) if c <= 0.0) {
            return fail("grad_clip must be positive");
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule::new(self.epsilon_start, self.epsilon_decay, self.epsilon_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub spec: AgentSpec,
    pub hyper: Hyperparams,
}

impl AgentConfig {
    pub fn new(spec: AgentSpec) -> Self {
        AgentConfig {
            spec,
            hyper: Hyperparams::default(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        let input = Observation::feature_len(self.spec.her);
        match self.spec.kind {
            AgentKind::Dqn => Architecture::Mlp {
                input,
                hidden: self.hyper.dense_hidden,
                output: Action::COUNT,
            },
            AgentKind::Drqn => Architecture::Gru {
                input,
                hidden: self.hyper.gru_hidden,
                output: Action::COUNT,
            },
        }
    }
}

/// Outcome of [`Agent::store_and_maybe_train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainStats {
    Skipped { buffer_len: usize },
    Trained { loss: f64, buffer_len: usize },
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

fn encode(obs: &Observation, diagram: &PhaseDiagram) -> Vec<f64> {
    let mut x = Vec::with_capacity(4);
    encode_into(obs, diagram, &mut x);
    x
}

fn check_finite(q: &[f64]) -> Result<(), AgentError> {
    if q.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AgentError::Divergence(format!("non-finite Q-values {q:?}")))
    }
}

/// `r` for goal terminations, `r + gamma * max_a Q(s', a)` otherwise.
/// Recurrent networks read `Q(s', .)` from the stored `h_post`.
pub fn td_targets(
    batch: &[Transition],
    params: &NetworkParams,
    gamma: f64,
    diagram: &PhaseDiagram,
) -> Result<Vec<f64>, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let x = encode(&t.next_obs, diagram);
            let f = params.forward(&x, t.h_post.as_deref())?;
            check_finite(&f.q)?;
            Ok(t.reward + gamma * f.q[argmax(&f.q)])
        })
        .collect()
}

/// Mean squared TD error and its gradient w.r.t. the parameters, targets
/// held constant.
pub fn td_loss_and_gradient(
    batch: &[Transition],
    targets: &[f64],
    params: &NetworkParams,
    diagram: &PhaseDiagram,
) -> Result<(f64, Vec<f64>), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let x = encode(&t.obs, diagram);
        let f = params.forward(&x, t.h_pre.as_deref())?;
        let a = t.action.index();
        let err = f.q[a] - y;
        loss += err * err;
        let mut dq = [0.0; Action::COUNT];
        dq[a] = 2.0 * err / n;
        params.backward_into(&f.cache, &dq, &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// Value-based agent with its own network, optimizer and replay buffer.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    diagram: Arc<PhaseDiagram>,
    params: NetworkParams,
    adam: AdamState,
    buffer: ReplayBuffer,
    hidden: Option<Arc<[f64]>>,
    updates: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        diagram: Arc<PhaseDiagram>,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        config.hyper.validate()?;
        let params = NetworkParams::init(config.architecture(), rng);
        Agent::with_params(config, diagram, params)
    }

    pub fn with_params(
        config: AgentConfig,
        diagram: Arc<PhaseDiagram>,
        params: NetworkParams,
    ) -> Result<Self, AgentError> {
        config.hyper.validate()?;
        if params.arch() != config.architecture() {
            return Err(AgentError::Config(format!(
                "parameters have architecture {:?}, config wants {:?}",
                params.arch(),
                config.architecture()
            )));
        }
        let adam = AdamState::new(
            params.len(),
            AdamConfig {
                learning_rate: config.hyper.learning_rate,
                ..AdamConfig::default()
            },
        );
        Ok(Agent {
            buffer: ReplayBuffer::new(config.hyper.buffer_capacity),
            config,
            diagram,
            params,
            adam,
            hidden: None,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn is_recurrent(&self) -> bool {
        self.config.spec.kind == AgentKind::Drqn
    }

    pub fn goal_augmented(&self) -> bool {
        self.config.spec.her
    }

    /// Number of gradient steps taken so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn hidden(&self) -> Option<&[f64]> {
        self.hidden.as_deref()
    }

    /// Clear the acting hidden state (zero vector for recurrent agents).
    pub fn reset_hidden(&mut self) {
        self.hidden = if self.is_recurrent() {
            Some(vec![0.0; self.config.hyper.gru_hidden].into())
        } else {
            None
        };
    }

    pub fn encode(&self, obs: &Observation) -> Vec<f64> {
        encode(obs, &self.diagram)
    }

    /// Q-values for `obs` given an explicit hidden state; returns the next
    /// hidden state for recurrent agents.
    pub fn q_values(
        &self,
        obs: &Observation,
        hidden: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>), AgentError> {
        let f = self.params.forward(&self.encode(obs), hidden)?;
        check_finite(&f.q)?;
        Ok((f.q, f.hidden))
    }

    /// Epsilon-greedy choice. Recurrent agents always run the network so the
    /// acting hidden state advances even on random steps.
    pub fn select_action<R: Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Action, AgentError> {
        Ok(self.decide(obs, epsilon, rng)?.action)
    }

    fn decide<R: Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Decision, AgentError> {
        let explore = rng.gen::<f64>() < epsilon;
        let random = explore.then(|| Action::ALL[rng.gen_range(0..Action::COUNT)]);
        if self.is_recurrent() {
            if self.hidden.is_none() {
                self.reset_hidden();
            }
            let h_pre = self.hidden.clone();
            let (q, h_next) = self.q_values(obs, h_pre.as_deref())?;
            let h_post: Arc<[f64]> = h_next.expect("recurrent forward yields a hidden state").into();
            self.hidden = Some(h_post.clone());
            Ok(Decision {
                action: random.unwrap_or(Action::ALL[argmax(&q)]),
                h_pre,
                h_post: Some(h_post),
            })
        } else {
            let action = match random {
                Some(a) => a,
                None => Action::ALL[argmax(&self.q_values(obs, None)?.0)],
            };
            Ok(Decision {
                action,
                h_pre: None,
                h_post: None,
            })
        }
    }

    /// One gradient step on `batch`; returns the pre-update loss.
    pub fn train_on_batch(&mut self, batch: &[Transition]) -> Result<f64, AgentError> {
        let targets = td_targets(batch, &self.params, self.config.hyper.gamma, &self.diagram)?;
        let (loss, mut grads) = td_loss_and_gradient(batch, &targets, &self.params, &self.diagram)?;
        if !loss.is_finite() {
            return Err(AgentError::Divergence(format!("loss {loss}")));
        }
        if let Some(max_norm) = self.config.hyper.grad_clip {
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > max_norm {
                let scale = max_norm / norm;
                grads.iter_mut().for_each(|g| *g *= scale);
            }
        }
        adam_update(self.params.as_mut_slice(), &grads, &mut self.adam)?;
        self.updates += 1;
        Ok(loss)
    }

    /// Append an episode (relabelled first when HER is on) and take exactly
    /// one gradient step once the buffer has passed the warm-up size.
    pub fn store_and_maybe_train<R: Rng + ?Sized>(
        &mut self,
        episode: Vec<Transition>,
        rng: &mut R,
    ) -> Result<TrainStats, AgentError> {
        let episode = if self.config.spec.her {
            her_relabel(episode, self.config.hyper.her_fraction, rng)?
        } else {
            episode
        };
        self.buffer.extend(episode);
        let needed = self.config.hyper.warmup.max(self.config.hyper.batch_size);
        if self.buffer.len() < needed {
            return Ok(TrainStats::Skipped {
                buffer_len: self.buffer.len(),
            });
        }
        let batch = self.buffer.sample(self.config.hyper.batch_size, rng);
        let loss = self.train_on_batch(&batch)?;
        Ok(TrainStats::Trained {
            loss,
            buffer_len: self.buffer.len(),
        })
    }
}

impl Controller for Agent {
    fn begin_episode(&mut self) {
        self.reset_hidden();
    }

    fn act<R: Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Decision, AgentError> {
        self.decide(obs, epsilon, rng)
    }
}
