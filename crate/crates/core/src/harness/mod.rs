//! Experiment orchestration: train each (agent, scenario, mode, seed) run,
//! evaluate every `eval_interval` episodes, aggregate over seeds and write
//! CSV files.

mod output;
mod stats;

pub use output::{read_raw_csv, write_aggregate_csv, write_raw_csv, write_results, AGGREGATE_HEADER, RAW_HEADER};
pub use stats::{mean, median, sample_stddev, sign_test_p};

use std::sync::Arc;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::agents::{run_episode, Agent, AgentConfig, AgentError, AgentSpec, Exploration, Hyperparams};
use crate::env::{Environment, Mode, PhaseDiagram, ScenarioConfig, DEFAULT_STEP_CAP};
use crate::neural::NetworkParams;
use crate::oracle::{validate_diagram, OracleError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Training and evaluation schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub episodes: usize,
    pub eval_interval: usize,
    pub eval_epsilon: f64,
    pub eval_step_cap: usize,
    pub train_step_cap: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            episodes: 20_000,
            eval_interval: 50,
            eval_epsilon: 0.2,
            eval_step_cap: DEFAULT_STEP_CAP,
            train_step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.episodes == 0 {
            return fail("episodes must be positive".into());
        }
        if self.eval_interval == 0 || !self.episodes.is_multiple_of(self.eval_interval) {
            return fail(format!(
                "eval interval {} must divide the episode budget {}",
                self.eval_interval, self.episodes
            ));
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return fail("eval epsilon must lie in [0, 1]".into());
        }
        if self.eval_step_cap == 0 || self.train_step_cap == 0 {
            return fail("step caps must be positive".into());
        }
        Ok(())
    }

    pub fn eval_points(&self) -> usize {
        self.episodes / self.eval_interval
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub diagram: Arc<PhaseDiagram>,
    /// Start/goal pairs; the mode field is overridden by `modes`.
    pub scenarios: Vec<ScenarioConfig>,
    pub agents: Vec<AgentSpec>,
    pub modes: Vec<Mode>,
    pub hyper: Hyperparams,
    pub protocol: Protocol,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            diagram: Arc::new(PhaseDiagram::default_geometry()),
            scenarios: crate::env::default_scenarios(Mode::SemiMarkov),
            agents: AgentSpec::ALL.to_vec(),
            modes: Mode::ALL.to_vec(),
            hyper: Hyperparams::default(),
            protocol: Protocol::default(),
            seeds: (0..30).collect(),
            base_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.protocol.validate()?;
        self.hyper.validate()?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(HarnessError::Config("seed list has duplicates".into()));
        }
        if self.agents.is_empty() || self.scenarios.is_empty() || self.modes.is_empty() {
            return Err(HarnessError::Config(
                "agents, scenarios and modes must be non-empty".into(),
            ));
        }
        validate_diagram(&self.diagram, &self.scenarios)?;
        Ok(())
    }

    /// Every run key in canonical order.
    pub fn runs(&self) -> Vec<RunKey> {
        let mut out = Vec::new();
        for agent in &self.agents {
            for mode in &self.modes {
                for sc in &self.scenarios {
                    for &seed in &self.seeds {
                        out.push(RunKey {
                            agent: *agent,
                            mode: *mode,
                            scenario: sc.name.clone(),
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub agent: AgentSpec,
    pub mode: Mode,
    pub scenario: String,
    pub seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-run seed: FNV-1a over `"{base}|{agent}|{scenario}|{mode}|{seed}"`,
/// finished with a SplitMix64 round. Stable across platforms and releases.
pub fn derive_seed(base: u64, agent: &str, scenario: &str, mode: Mode, seed: u64) -> u64 {
    let key = format!("{base}|{agent}|{scenario}|{mode}|{seed}");
    let h = key
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME));
    splitmix64(h)
}

/// Seed of the evaluation stream after `episode` training episodes.
pub fn eval_seed(run_seed: u64, episode: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(episode as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalPoint {
    pub seed: u64,
    /// Training episodes completed before this evaluation.
    pub episode: usize,
    /// Steps taken; the eval cap when the goal was not reached.
    pub steps: usize,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub key: RunKey,
    pub points: Vec<EvalPoint>,
}

/// Evaluate one greedy-ish episode with its own RNG stream.
pub fn evaluate(
    agent: &mut Agent,
    env: &mut Environment,
    protocol: &Protocol,
    seed: u64,
    run_seed: u64,
    episode: usize,
) -> Result<EvalPoint, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed(run_seed, episode));
    let rec = run_episode(
        agent,
        env,
        Exploration::Fixed(protocol.eval_epsilon),
        protocol.eval_step_cap,
        &mut rng,
    )?;
    Ok(EvalPoint {
        seed,
        episode,
        steps: if rec.success { rec.steps } else { protocol.eval_step_cap },
        success: rec.success,
    })
}

/// Train one run from scratch. `on_eval` sees the agent right after each
/// evaluation (used for checkpointing).
pub fn train_run_with<F>(
    diagram: Arc<PhaseDiagram>,
    scenario: &ScenarioConfig,
    config: AgentConfig,
    protocol: &Protocol,
    seed: u64,
    run_seed: u64,
    mut on_eval: F,
) -> Result<Vec<EvalPoint>, AgentError>
where
    F: FnMut(&EvalPoint, &NetworkParams),
{
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let mut agent = Agent::new(config, diagram.clone(), &mut rng)?;
    let mut env = Environment::new(diagram.clone(), scenario.clone())?.with_goal_augmentation(config.spec.her);
    let mut eval_env = env.clone();
    let mut schedule = config.hyper.epsilon_schedule();
    let mut points = Vec::with_capacity(protocol.eval_points());
    for episode in 1..=protocol.episodes {
        let rec = run_episode(
            &mut agent,
            &mut env,
            Exploration::Train(&mut schedule),
            protocol.train_step_cap,
            &mut rng,
        )?;
        agent.store_and_maybe_train(rec.transitions, &mut rng)?;
        if episode % protocol.eval_interval == 0 {
            let point = evaluate(&mut agent, &mut eval_env, protocol, seed, run_seed, episode)?;
            on_eval(&point, agent.params());
            points.push(point);
        }
    }
    Ok(points)
}

pub fn train_run(
    diagram: Arc<PhaseDiagram>,
    scenario: &ScenarioConfig,
    config: AgentConfig,
    protocol: &Protocol,
    seed: u64,
    run_seed: u64,
) -> Result<Vec<EvalPoint>, AgentError> {
    train_run_with(diagram, scenario, config, protocol, seed, run_seed, |_, _| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_steps: f64,
    pub stddev: f64,
    pub n_seeds: usize,
}

/// Seed-averaged learning curve for one (agent, mode, scenario).
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub agent: AgentSpec,
    pub mode: Mode,
    pub scenario: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub key: RunKey,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    pub runs: Vec<RunResult>,
    pub curves: Vec<LearningCurve>,
    pub failures: Vec<RunFailure>,
}

fn scenario_named<'a>(config: &'a ExperimentConfig, name: &str) -> &'a ScenarioConfig {
    config
        .scenarios
        .iter()
        .find(|s| s.name == name)
        .expect("run keys come from the scenario list")
}

/// Run every (agent, mode, scenario, seed) combination. Runs are independent
/// and executed in parallel; results are returned in canonical order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults, HarnessError> {
    config.validate()?;
    let outcomes: Vec<(RunKey, Result<Vec<EvalPoint>, AgentError>)> = config
        .runs()
        .into_par_iter()
        .map(|key| {
            let scenario = scenario_named(config, &key.scenario).with_mode(key.mode);
            let agent_cfg = AgentConfig {
                spec: key.agent,
                hyper: config.hyper,
            };
            let run_seed = derive_seed(config.base_seed, key.agent.name(), &key.scenario, key.mode, key.seed);
            let res = train_run(
                config.diagram.clone(),
                &scenario,
                agent_cfg,
                &config.protocol,
                key.seed,
                run_seed,
            );
            (key, res)
        })
        .collect();

    let mut results = ExperimentResults::default();
    for (key, res) in outcomes {
        match res {
            Ok(points) => results.runs.push(RunResult { key, points }),
            Err(e) => {
                warn!(
                    "run {}/{}/{} seed {} excluded: {e}",
                    key.agent, key.mode, key.scenario, key.seed
                );
                results.failures.push(RunFailure {
                    key,
                    error: e.to_string(),
                });
            }
        }
    }
    results.curves = aggregate(config, &results.runs);
    Ok(results)
}

/// Mean and sample standard deviation of steps over seeds at every eval
/// point. Curves with no surviving seeds are omitted.
pub fn aggregate(config: &ExperimentConfig, runs: &[RunResult]) -> Vec<LearningCurve> {
    let mut curves = Vec::new();
    for agent in &config.agents {
        for mode in &config.modes {
            for sc in &config.scenarios {
                let group: Vec<&RunResult> = runs
                    .iter()
                    .filter(|r| r.key.agent == *agent && r.key.mode == *mode && r.key.scenario == sc.name)
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let n_points = group[0].points.len();
                let points = (0..n_points)
                    .map(|i| {
                        let steps: Vec<f64> = group.iter().map(|r| r.points[i].steps as f64).collect();
                        CurvePoint {
                            episode: group[0].points[i].episode,
                            mean_steps: mean(&steps),
                            stddev: sample_stddev(&steps),
                            n_seeds: steps.len(),
                        }
                    })
                    .collect();
                curves.push(LearningCurve {
                    agent: *agent,
                    mode: *mode,
                    scenario: sc.name.clone(),
                    points,
                });
            }
        }
    }
    curves
}
