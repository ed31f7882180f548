use std::sync::Arc;

use rand::Rng;

use super::{AgentError, EpsilonSchedule, Transition};
use crate::env::{Action, Environment, Observation};

/// A chosen action plus the recurrent states around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub h_pre: Option<Arc<[f64]>>,
    pub h_post: Option<Arc<[f64]>>,
}

impl Decision {
    pub fn plain(action: Action) -> Self {
        Decision {
            action,
            h_pre: None,
            h_post: None,
        }
    }
}

/// Anything that can drive an episode.
pub trait Controller {
    fn begin_episode(&mut self);

    fn act<R: Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Decision, AgentError>;
}

pub enum Exploration<'a> {
    /// Training: epsilon follows the schedule, which advances once per step,
    /// and transitions are recorded.
    Train(&'a mut EpsilonSchedule),
    /// Evaluation with a fixed epsilon; nothing is recorded.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Actions taken, including the one that entered the goal.
    pub steps: usize,
    pub success: bool,
    pub truncated: bool,
    pub transitions: Vec<Transition>,
}

/// Reset `env`, then act until the goal or `step_cap`.
pub fn run_episode<C, R>(
    controller: &mut C,
    env: &mut Environment,
    mut exploration: Exploration<'_>,
    step_cap: usize,
    rng: &mut R,
) -> Result<EpisodeRecord, AgentError>
where
    C: Controller,
    R: Rng + ?Sized,
{
    env.set_step_cap(step_cap)?;
    let mut obs = env.reset();
    controller.begin_episode();
    let goal = env.scenario().goal;
    let recording = matches!(exploration, Exploration::Train(_));
    let mut transitions = Vec::new();
    loop {
        let epsilon = match &exploration {
            Exploration::Train(s) => s.value(),
            Exploration::Fixed(e) => *e,
        };
        let decision = controller.act(&obs, epsilon, rng)?;
        let result = env.step(decision.action)?;
        if let Exploration::Train(s) = &mut exploration {
            s.advance();
        }
        if recording {
            transitions.push(Transition {
                obs,
                action: decision.action,
                reward: result.reward,
                next_obs: result.observation,
                done: result.done,
                goal,
                h_pre: decision.h_pre,
                h_post: decision.h_post,
            });
        }
        obs = result.observation;
        if result.finished() {
            return Ok(EpisodeRecord {
                steps: env.steps(),
                success: result.done,
                truncated: result.truncated,
                transitions,
            });
        }
    }
}
