use rand::Rng;

use super::{AgentError, Transition};

/// Relabel failed transitions as successes toward the state they reached.
///
/// Each zero-reward transition is picked independently with probability
/// `fraction`. A picked transition gets reward 1, `done = true` and goal
/// `next_obs`'s position; the goal fields inside both observations are
/// rewritten to match. Everything else passes through untouched.
pub fn her_relabel<R: Rng + ?Sized>(
    episode: Vec<Transition>,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<Transition>, AgentError> {
    if episode.iter().any(|t| t.obs.goal.is_none() || t.next_obs.goal.is_none()) {
        return Err(AgentError::NotGoalAugmented);
    }
    Ok(episode
        .into_iter()
        .map(|mut t| {
            if t.reward == 0.0 && rng.gen_bool(fraction) {
                let achieved = t.next_obs.position();
                t.reward = 1.0;
                t.done = true;
                t.goal = achieved;
                t.obs.goal = Some(achieved);
                t.next_obs.goal = Some(achieved);
            }
            t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Observation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn failed(i: usize) -> Transition {
        let g = (30, 10);
        Transition {
            obs: Observation { t: i % 31, p: 3, goal: Some(g) },
            action: Action::QPlus,
            reward: 0.0,
            next_obs: Observation { t: i % 31 + 1, p: 3, goal: Some(g) },
            done: false,
            goal: g,
            h_pre: None,
            h_post: None,
        }
    }

    #[test]
    fn relabelled_tuple_targets_achieved_state() {
        let out = her_relabel(vec![failed(4)], 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let t = &out[0];
        assert_eq!(t.reward, 1.0);
        assert!(t.done);
        assert_eq!(t.goal, (5, 3));
        assert_eq!(t.obs.goal, Some((5, 3)));
        assert_eq!(t.next_obs.goal, Some((5, 3)));
        assert_eq!(t.obs.position(), (4, 3));
    }

    #[test]
    fn successes_are_never_touched() {
        let mut t = failed(2);
        t.reward = 1.0;
        t.done = true;
        let out = her_relabel(vec![t.clone()], 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out[0], t);
    }

    #[test]
    fn requires_goal_augmentation() {
        let mut t = failed(1);
        t.obs.goal = None;
        assert_eq!(
            her_relabel(vec![t], 0.05, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(AgentError::NotGoalAugmented)
        );
    }

    #[test]
    fn relabel_fraction_is_binomial() {
        let episode: Vec<_> = (0..10_000).map(failed).collect();
        let out = her_relabel(episode, 0.05, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        let n = out.iter().filter(|t| t.reward == 1.0).count() as f64;
        let sigma = (10_000.0f64 * 0.05 * 0.95).sqrt();
        assert!((n - 500.0).abs() <= 3.0 * sigma, "relabelled {n}");
    }
}
