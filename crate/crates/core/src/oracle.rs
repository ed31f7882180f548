//! Exact solvers used to validate geometry and measure optimality gaps.
//!
//! Search runs over [`AugmentedState`] (position plus priming flag), which is
//! fully observable, so the semi-Markov process becomes an ordinary graph.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, EnvError, EnvState, LatentFlag, Mode, PhaseDiagram, ScenarioConfig};

/// Position plus latent flag.
pub type AugmentedState = EnvState;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("goal {goal:?} of scenario '{scenario}' is unreachable in {mode} mode")]
    Unreachable {
        scenario: String,
        goal: (usize, usize),
        mode: Mode,
    },
    #[error("scenario '{scenario}' should cross {expected} boundaries but its optimal path crosses {found}")]
    CrossingMismatch {
        scenario: String,
        expected: usize,
        found: usize,
    },
}

fn state_index(diagram: &PhaseDiagram, s: AugmentedState) -> usize {
    (s.p * diagram.width() + s.t) * 3 + s.flag.index()
}

fn state_from_index(diagram: &PhaseDiagram, i: usize) -> AugmentedState {
    let flag = LatentFlag::ALL[i % 3];
    let cell = i / 3;
    AugmentedState {
        t: cell % diagram.width(),
        p: cell / diagram.width(),
        flag,
    }
}

/// BFS distances from `start` to every augmented state (`None` = unreachable).
/// Indexing is `(p * width + t) * 3 + flag`.
pub fn bfs_distances(diagram: &PhaseDiagram, mode: Mode, start: (usize, usize)) -> Vec<Option<usize>> {
    let mut dist = vec![None; diagram.num_cells() * 3];
    let s0 = AugmentedState::at(start.0, start.1);
    dist[state_index(diagram, s0)] = Some(0);
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        let d = dist[state_index(diagram, s)].unwrap();
        for a in Action::ALL {
            let n = diagram.transition(mode, s, a);
            let k = state_index(diagram, n);
            if dist[k].is_none() {
                dist[k] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Minimum actions to enter `goal` from `start` (flag clear).
pub fn shortest_distance(
    diagram: &PhaseDiagram,
    mode: Mode,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<usize> {
    let dist = bfs_distances(diagram, mode, start);
    LatentFlag::ALL
        .iter()
        .filter_map(|&flag| {
            dist[state_index(
                diagram,
                AugmentedState {
                    t: goal.0,
                    p: goal.1,
                    flag,
                },
            )]
        })
        .min()
}

pub fn optimal_steps(diagram: &PhaseDiagram, scenario: &ScenarioConfig) -> Result<usize, OracleError> {
    scenario.validate(diagram)?;
    shortest_distance(diagram, scenario.mode, scenario.start, scenario.goal).ok_or_else(|| {
        OracleError::Unreachable {
            scenario: scenario.name.clone(),
            goal: scenario.goal,
            mode: scenario.mode,
        }
    })
}

pub fn manhattan_lower_bound(scenario: &ScenarioConfig) -> usize {
    scenario.start.0.abs_diff(scenario.goal.0) + scenario.start.1.abs_diff(scenario.goal.1)
}

/// Forward BFS from the start, then a pass over the BFS layers keeping the
/// fewest crossing moves per state; the path is read back through parents.
fn shortest_path_with(
    diagram: &PhaseDiagram,
    scenario: &ScenarioConfig,
) -> Result<(Vec<Action>, usize), OracleError> {
    scenario.validate(diagram)?;
    let mode = scenario.mode;
    let dist = bfs_distances(diagram, mode, scenario.start);
    let n = dist.len();

    // Fewest crossing moves among shortest paths, layer by layer.
    let mut order: Vec<usize> = (0..n).filter(|&i| dist[i].is_some()).collect();
    order.sort_by_key(|&i| dist[i]);
    let mut crossings = vec![usize::MAX; n];
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; n];
    let start = state_index(diagram, AugmentedState::at(scenario.start.0, scenario.start.1));
    crossings[start] = 0;
    for &i in &order {
        if crossings[i] == usize::MAX {
            continue;
        }
        let s = state_from_index(diagram, i);
        for a in Action::ALL {
            let next = diagram.transition(mode, s, a);
            let j = state_index(diagram, next);
            if dist[j] != dist[i].map(|d| d + 1) {
                continue;
            }
            let c = crossings[i] + usize::from(diagram.is_crossing_move(s, a));
            if c < crossings[j] {
                crossings[j] = c;
                parent[j] = Some((i, a));
            }
        }
    }

    let goal = LatentFlag::ALL
        .iter()
        .map(|&flag| {
            state_index(
                diagram,
                AugmentedState {
                    t: scenario.goal.0,
                    p: scenario.goal.1,
                    flag,
                },
            )
        })
        .filter(|&k| dist[k].is_some())
        .min_by_key(|&k| (dist[k], crossings[k]))
        .ok_or_else(|| OracleError::Unreachable {
            scenario: scenario.name.clone(),
            goal: scenario.goal,
            mode,
        })?;

    let mut actions = Vec::new();
    let mut k = goal;
    while let Some((prev, a)) = parent[k] {
        actions.push(a);
        k = prev;
    }
    actions.reverse();
    Ok((actions, crossings[goal]))
}

/// One shortest action sequence (fewest boundary crossings among ties).
pub fn optimal_path(diagram: &PhaseDiagram, scenario: &ScenarioConfig) -> Result<Vec<Action>, OracleError> {
    shortest_path_with(diagram, scenario).map(|(p, _)| p)
}

/// Boundary crossings on the best semi-Markov path, whatever `scenario.mode`
/// says (in Markov mode crossings cost nothing, so the count would be
/// arbitrary).
pub fn boundary_crossings(diagram: &PhaseDiagram, scenario: &ScenarioConfig) -> Result<usize, OracleError> {
    shortest_path_with(diagram, &scenario.with_mode(Mode::SemiMarkov)).map(|(_, c)| c)
}

/// Optimality gap of an agent against the BFS value.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub scenario: String,
    pub mode: Mode,
    pub optimal_steps: usize,
    pub agent_mean_steps: f64,
    pub ratio: f64,
}

impl OptimalityReport {
    pub fn new(
        diagram: &PhaseDiagram,
        scenario: &ScenarioConfig,
        agent_mean_steps: f64,
    ) -> Result<Self, OracleError> {
        let optimal = optimal_steps(diagram, scenario)?;
        Ok(OptimalityReport {
            scenario: scenario.name.clone(),
            mode: scenario.mode,
            optimal_steps: optimal,
            agent_mean_steps,
            ratio: agent_mean_steps / optimal as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Per-episode action cap during training and the greedy rollout.
    pub step_cap: usize,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            episodes: 2_000,
            alpha: 0.1,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            step_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularOutcome {
    /// Length of the greedy rollout from the start, `None` if it hit the cap.
    pub greedy_steps: Option<usize>,
    pub training_steps: usize,
    pub q: Vec<[f64; 4]>,
}

fn greedy(q: &[f64; 4]) -> Action {
    let mut best = 0;
    for a in 1..4 {
        if q[a] > q[best] {
            best = a;
        }
    }
    Action::ALL[best]
}

/// Tabular Q-learning over the fully observable augmented state.
/// Epsilon decays linearly per episode from `epsilon_start` to `epsilon_end`.
pub fn tabular_q_learning<R: Rng + ?Sized>(
    diagram: &PhaseDiagram,
    scenario: &ScenarioConfig,
    config: &TabularConfig,
    rng: &mut R,
) -> Result<TabularOutcome, OracleError> {
    scenario.validate(diagram)?;
    let mode = scenario.mode;
    let mut q = vec![[0.0f64; 4]; diagram.num_cells() * 3];
    let start = AugmentedState::at(scenario.start.0, scenario.start.1);
    let mut training_steps = 0;

    for episode in 0..config.episodes {
        let frac = if config.episodes > 1 {
            episode as f64 / (config.episodes - 1) as f64
        } else {
            1.0
        };
        let eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
        let mut s = start;
        for _ in 0..config.step_cap {
            let si = state_index(diagram, s);
            let a = if rng.gen::<f64>() < eps {
                Action::ALL[rng.gen_range(0..4)]
            } else {
                greedy(&q[si])
            };
            let n = diagram.transition(mode, s, a);
            training_steps += 1;
            let reached = n.position() == scenario.goal;
            let target = if reached {
                1.0
            } else {
                let next = &q[state_index(diagram, n)];
                config.gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            let cell = &mut q[si][a.index()];
            *cell += config.alpha * (target - *cell);
            if reached {
                break;
            }
            s = n;
        }
    }

    let mut s = start;
    let mut greedy_steps = None;
    for step in 1..=config.step_cap {
        s = diagram.transition(mode, s, greedy(&q[state_index(diagram, s)]));
        if s.position() == scenario.goal {
            greedy_steps = Some(step);
            break;
        }
    }
    Ok(TabularOutcome {
        greedy_steps,
        training_steps,
        q,
    })
}

/// Per-scenario reachability and crossing summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub markov_steps: usize,
    pub semi_markov_steps: usize,
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub scenarios: Vec<ScenarioReport>,
}

impl ValidationReport {
    pub fn crossings(&self, name: &str) -> Option<usize> {
        self.scenarios.iter().find(|s| s.name == name).map(|s| s.crossings)
    }
}

/// Expected crossing count for the named difficulty levels.
pub fn expected_crossings(name: &str) -> Option<usize> {
    match name {
        "easy" => Some(0),
        "mod" => Some(1),
        "hard" => Some(2),
        _ => None,
    }
}

/// Check every scenario is reachable in both modes and that the named
/// difficulty levels cross the expected number of boundaries.
pub fn validate_diagram(
    diagram: &PhaseDiagram,
    scenarios: &[ScenarioConfig],
) -> Result<ValidationReport, OracleError> {
    let mut out = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let markov_steps = optimal_steps(diagram, &sc.with_mode(Mode::Markov))?;
        let semi_markov_steps = optimal_steps(diagram, &sc.with_mode(Mode::SemiMarkov))?;
        let crossings = boundary_crossings(diagram, sc)?;
        if let Some(expected) = expected_crossings(&sc.name) {
            if expected != crossings {
                return Err(OracleError::CrossingMismatch {
                    scenario: sc.name.clone(),
                    expected,
                    found: crossings,
                });
            }
        }
        out.push(ScenarioReport {
            name: sc.name.clone(),
            markov_steps,
            semi_markov_steps,
            crossings,
        });
    }
    Ok(ValidationReport { scenarios: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{default_scenarios, scaled_scenarios, BoundarySegment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(name: &str, mode: Mode) -> ScenarioConfig {
        default_scenarios(mode).into_iter().find(|s| s.name == name).unwrap()
    }

    #[test]
    fn default_optimal_steps() {
        let d = PhaseDiagram::default_geometry();
        let cases = [("hard", 40, 42), ("mod", 18, 19), ("easy", 6, 6)];
        for (name, markov, semi) in cases {
            assert_eq!(optimal_steps(&d, &scenario(name, Mode::Markov)).unwrap(), markov, "{name}");
            assert_eq!(optimal_steps(&d, &scenario(name, Mode::SemiMarkov)).unwrap(), semi, "{name}");
        }
    }

    #[test]
    fn manhattan_bound() {
        assert_eq!(manhattan_lower_bound(&scenario("hard", Mode::Markov)), 40);
        let same = ScenarioConfig::new("x", (4, 4), (4, 4), Mode::Markov);
        assert_eq!(manhattan_lower_bound(&same), 0);
    }

    #[test]
    fn adjacent_cells_take_one_step() {
        let d = PhaseDiagram::default_geometry();
        let sc = ScenarioConfig::new("adj", (3, 3), (3, 4), Mode::SemiMarkov);
        assert_eq!(optimal_steps(&d, &sc).unwrap(), 1);
    }

    #[test]
    fn optimal_path_replays_to_goal() {
        let d = PhaseDiagram::default_geometry();
        let sc = scenario("hard", Mode::SemiMarkov);
        let path = optimal_path(&d, &sc).unwrap();
        assert_eq!(path.len(), 42);
        let mut s = AugmentedState::at(sc.start.0, sc.start.1);
        for a in path {
            s = d.transition(sc.mode, s, a);
        }
        assert_eq!(s.position(), sc.goal);
    }

    #[test]
    fn default_validation_report() {
        let d = PhaseDiagram::default_geometry();
        let report = validate_diagram(&d, &default_scenarios(Mode::SemiMarkov)).unwrap();
        assert_eq!(report.crossings("hard"), Some(2));
        assert_eq!(report.crossings("mod"), Some(1));
        assert_eq!(report.crossings("easy"), Some(0));
        let scaled = PhaseDiagram::scaled_geometry();
        let report = validate_diagram(&scaled, &scaled_scenarios(Mode::SemiMarkov)).unwrap();
        let steps: Vec<_> = report
            .scenarios
            .iter()
            .map(|s| (s.markov_steps, s.semi_markov_steps, s.crossings))
            .collect();
        assert_eq!(steps, vec![(3, 3, 0), (9, 10, 1), (20, 22, 2)]);
    }

    #[test]
    fn removing_the_goal_side_column_keeps_easy_at_zero() {
        let d = PhaseDiagram::new(32, 32, vec![BoundarySegment::vertical(12, 0, 31)]).unwrap();
        let sc = scenario("easy", Mode::SemiMarkov);
        assert_eq!(boundary_crossings(&d, &sc).unwrap(), 0);
    }

    #[test]
    fn goal_outside_grid_is_rejected() {
        let d = PhaseDiagram::default_geometry();
        let sc = ScenarioConfig::new("easy", (1, 1), (40, 1), Mode::Markov);
        assert!(matches!(
            validate_diagram(&d, &[sc]),
            Err(OracleError::Env(EnvError::OutOfRange { .. }))
        ));
    }

    #[test]
    fn mislabelled_scenario_is_rejected() {
        let d = PhaseDiagram::default_geometry();
        let sc = ScenarioConfig::new("easy", (2, 22), (30, 10), Mode::SemiMarkov);
        assert_eq!(
            validate_diagram(&d, &[sc]),
            Err(OracleError::CrossingMismatch {
                scenario: "easy".into(),
                expected: 0,
                found: 2
            })
        );
    }

    #[test]
    fn tabular_learns_easy() {
        let d = PhaseDiagram::default_geometry();
        let sc = scenario("easy", Mode::SemiMarkov);
        let cfg = TabularConfig {
            episodes: 300,
            ..TabularConfig::default()
        };
        let out = tabular_q_learning(&d, &sc, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.greedy_steps, Some(6));
    }

    #[test]
    fn tabular_with_zero_discount_terminates() {
        let d = PhaseDiagram::scaled_geometry();
        let sc = scaled_scenarios(Mode::SemiMarkov).pop().unwrap();
        let cfg = TabularConfig {
            episodes: 20,
            gamma: 0.0,
            step_cap: 500,
            ..TabularConfig::default()
        };
        let out = tabular_q_learning(&d, &sc, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(out.training_steps <= 20 * 500);
    }
}
