//! Phase-change grid environment.
//!
//! The agent moves a material around a discretised temperature/pressure
//! grid. Inside a phase every action moves one cell. Boundary cells sit on
//! a coexistence line; leaving one along the line's crossing axis costs an
//! extra "priming" action whose effect is hidden from the observation, which
//! makes the process semi-Markov.
//!
//! Crossing rules at a boundary cell (direction -> required ordered pair):
//!
//! | direction | prime | cross |
//! |-----------|-------|-------|
//! | +P        | Q+    | W+    |
//! | -P        | Q-    | W-    |
//! | +T        | W+    | Q+    |
//! | -T        | W-    | Q-    |
//!
//! At a vertical boundary (fixed `t`) the W actions prime and the Q actions
//! cross; at a horizontal boundary (fixed `p`) the roles swap. Priming never
//! moves the agent. A crossing action without the matching flag leaves the
//! position unchanged and clears the flag.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("grid must be at least 2x2, got {width}x{height}")]
    GridTooSmall { width: usize, height: usize },
    #[error("boundary segment {index} is invalid: {reason}")]
    BadSegment { index: usize, reason: String },
    #[error("boundary segments {first} and {second} overlap at ({t}, {p})")]
    OverlappingSegments {
        first: usize,
        second: usize,
        t: usize,
        p: usize,
    },
    #[error("cell ({t}, {p}) is outside the {width}x{height} grid")]
    OutOfRange {
        t: usize,
        p: usize,
        width: usize,
        height: usize,
    },
    #[error("scenario '{0}' has identical start and goal")]
    StartIsGoal(String),
    #[error("step cap must be positive")]
    ZeroStepCap,
    #[error("environment has not been reset")]
    NotReset,
    #[error("episode already terminated; call reset first")]
    EpisodeTerminated,
    #[error("unknown {kind} '{value}'")]
    Unknown { kind: &'static str, value: String },
}

/// Discrete action; the integer encoding follows a0..a3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    /// Remove heat.
    QMinus = 0,
    /// Add heat.
    QPlus = 1,
    /// Negative work.
    WMinus = 2,
    /// Positive work.
    WPlus = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::QMinus, Action::QPlus, Action::WMinus, Action::WPlus];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// True for the heat actions, which move along the temperature axis.
    pub fn is_heat(self) -> bool {
        matches!(self, Action::QMinus | Action::QPlus)
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Action::QPlus | Action::WPlus)
    }

    /// Unit displacement `(dt, dp)` of the action inside a phase.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::QMinus => (-1, 0),
            Action::QPlus => (1, 0),
            Action::WMinus => (0, -1),
            Action::WPlus => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Fixed temperature column, crossed along the T axis.
    Vertical,
    /// Fixed pressure row, crossed along the P axis.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub orientation: Orientation,
    /// Column (vertical) or row (horizontal) the segment lies on.
    pub index: usize,
    /// Inclusive range along the other axis.
    pub span: (usize, usize),
}

impl BoundarySegment {
    pub fn vertical(t: usize, p_from: usize, p_to: usize) -> Self {
        BoundarySegment {
            orientation: Orientation::Vertical,
            index: t,
            span: (p_from, p_to),
        }
    }

    pub fn horizontal(p: usize, t_from: usize, t_to: usize) -> Self {
        BoundarySegment {
            orientation: Orientation::Horizontal,
            index: p,
            span: (t_from, t_to),
        }
    }

    /// Cells covered by the segment as `(t, p)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.span.0..=self.span.1).map(move |k| match self.orientation {
            Orientation::Vertical => (self.index, k),
            Orientation::Horizontal => (k, self.index),
        })
    }
}

/// Hidden priming state of a boundary cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum LatentFlag {
    #[default]
    None,
    PrimedPositive,
    PrimedNegative,
}

impl LatentFlag {
    pub const ALL: [LatentFlag; 3] = [
        LatentFlag::None,
        LatentFlag::PrimedPositive,
        LatentFlag::PrimedNegative,
    ];

    pub fn index(self) -> usize {
        match self {
            LatentFlag::None => 0,
            LatentFlag::PrimedPositive => 1,
            LatentFlag::PrimedNegative => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    SemiMarkov,
    Markov,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::SemiMarkov, Mode::Markov];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SemiMarkov => "semi",
            Mode::Markov => "markov",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "semi" | "semi-markov" | "semimarkov" => Ok(Mode::SemiMarkov),
            "markov" => Ok(Mode::Markov),
            _ => Err(EnvError::Unknown {
                kind: "mode",
                value: s.to_string(),
            }),
        }
    }
}

/// Latent environment state: position plus the hidden priming flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EnvState {
    pub t: usize,
    pub p: usize,
    pub flag: LatentFlag,
}

impl EnvState {
    pub fn at(t: usize, p: usize) -> Self {
        EnvState {
            t,
            p,
            flag: LatentFlag::None,
        }
    }

    pub fn position(&self) -> (usize, usize) {
        (self.t, self.p)
    }
}

/// Grid geometry plus boundary segments. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    width: usize,
    height: usize,
    boundaries: Vec<BoundarySegment>,
    cell_kind: Vec<Option<Orientation>>,
}

impl PhaseDiagram {
    pub fn new(
        width: usize,
        height: usize,
        boundaries: Vec<BoundarySegment>,
    ) -> Result<Self, EnvError> {
        if width < 2 || height < 2 {
            return Err(EnvError::GridTooSmall { width, height });
        }
        let mut cell_kind = vec![None; width * height];
        let mut owner = vec![usize::MAX; width * height];
        for (i, seg) in boundaries.iter().enumerate() {
            let (fixed_limit, span_limit) = match seg.orientation {
                Orientation::Vertical => (width, height),
                Orientation::Horizontal => (height, width),
            };
            if seg.index >= fixed_limit {
                return Err(EnvError::BadSegment {
                    index: i,
                    reason: format!("line {} outside 0..{}", seg.index, fixed_limit),
                });
            }
            if seg.span.0 > seg.span.1 {
                return Err(EnvError::BadSegment {
                    index: i,
                    reason: format!("empty span {}..={}", seg.span.0, seg.span.1),
                });
            }
            if seg.span.1 >= span_limit {
                return Err(EnvError::BadSegment {
                    index: i,
                    reason: format!("span end {} outside 0..{}", seg.span.1, span_limit),
                });
            }
            for (t, p) in seg.cells() {
                let k = p * width + t;
                if owner[k] != usize::MAX {
                    return Err(EnvError::OverlappingSegments {
                        first: owner[k],
                        second: i,
                        t,
                        p,
                    });
                }
                owner[k] = i;
                cell_kind[k] = Some(seg.orientation);
            }
        }
        Ok(PhaseDiagram {
            width,
            height,
            boundaries,
            cell_kind,
        })
    }

    /// 32x32 grid with full-height boundary columns at t=12 and t=22.
    pub fn default_geometry() -> Self {
        PhaseDiagram::new(
            32,
            32,
            vec![
                BoundarySegment::vertical(12, 0, 31),
                BoundarySegment::vertical(22, 0, 31),
            ],
        )
        .expect("default geometry is valid")
    }

    /// Half-scale 16x16 analogue of the default geometry (columns at t=6, t=11).
    pub fn scaled_geometry() -> Self {
        PhaseDiagram::new(
            16,
            16,
            vec![
                BoundarySegment::vertical(6, 0, 15),
                BoundarySegment::vertical(11, 0, 15),
            ],
        )
        .expect("scaled geometry is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn boundaries(&self) -> &[BoundarySegment] {
        &self.boundaries
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, t: usize, p: usize) -> bool {
        t < self.width && p < self.height
    }

    pub fn check_cell(&self, t: usize, p: usize) -> Result<(), EnvError> {
        if self.contains(t, p) {
            Ok(())
        } else {
            Err(EnvError::OutOfRange {
                t,
                p,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Orientation of the boundary through `(t, p)`, if any.
    pub fn boundary_at(&self, t: usize, p: usize) -> Option<Orientation> {
        if !self.contains(t, p) {
            return None;
        }
        self.cell_kind[p * self.width + t]
    }

    pub fn is_boundary(&self, t: usize, p: usize) -> bool {
        self.boundary_at(t, p).is_some()
    }

    /// Plain unit move with edge clamping.
    pub fn unit_move(&self, t: usize, p: usize, action: Action) -> (usize, usize) {
        let (dt, dp) = action.delta();
        let nt = (t as i64 + dt).clamp(0, self.width as i64 - 1) as usize;
        let np = (p as i64 + dp).clamp(0, self.height as i64 - 1) as usize;
        (nt, np)
    }

    /// Deterministic transition function shared by the environment and the
    /// oracles.
    pub fn transition(&self, mode: Mode, state: EnvState, action: Action) -> EnvState {
        let orientation = match (mode, self.boundary_at(state.t, state.p)) {
            (Mode::SemiMarkov, Some(o)) => o,
            _ => {
                let (t, p) = self.unit_move(state.t, state.p, action);
                return EnvState::at(t, p);
            }
        };

        // Vertical boundaries are crossed by heat actions, horizontal ones by work.
        let crosses = match orientation {
            Orientation::Vertical => action.is_heat(),
            Orientation::Horizontal => !action.is_heat(),
        };
        if !crosses {
            let flag = if action.is_positive() {
                LatentFlag::PrimedPositive
            } else {
                LatentFlag::PrimedNegative
            };
            return EnvState { flag, ..state };
        }

        let primed = match state.flag {
            LatentFlag::PrimedPositive => action.is_positive(),
            LatentFlag::PrimedNegative => !action.is_positive(),
            LatentFlag::None => false,
        };
        if primed {
            let (t, p) = self.unit_move(state.t, state.p, action);
            EnvState::at(t, p)
        } else {
            EnvState::at(state.t, state.p)
        }
    }

    /// True when `action` from `state` would pass through the boundary
    /// `state` sits on (the move that costs a priming action in semi-Markov
    /// mode).
    pub fn is_crossing_move(&self, state: EnvState, action: Action) -> bool {
        match self.boundary_at(state.t, state.p) {
            Some(Orientation::Vertical) => {
                action.is_heat() && self.unit_move(state.t, state.p, action) != state.position()
            }
            Some(Orientation::Horizontal) => {
                !action.is_heat() && self.unit_move(state.t, state.p, action) != state.position()
            }
            None => false,
        }
    }
}

impl Default for PhaseDiagram {
    fn default() -> Self {
        PhaseDiagram::default_geometry()
    }
}

/// Start/goal pair plus dynamics mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub name: String,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub mode: Mode,
}

impl ScenarioConfig {
    pub fn new(name: impl Into<String>, start: (usize, usize), goal: (usize, usize), mode: Mode) -> Self {
        ScenarioConfig {
            name: name.into(),
            start,
            goal,
            mode,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        ScenarioConfig {
            mode,
            ..self.clone()
        }
    }

    pub fn validate(&self, diagram: &PhaseDiagram) -> Result<(), EnvError> {
        diagram.check_cell(self.start.0, self.start.1)?;
        diagram.check_cell(self.goal.0, self.goal.1)?;
        if self.start == self.goal {
            return Err(EnvError::StartIsGoal(self.name.clone()));
        }
        Ok(())
    }
}

pub const DEFAULT_GOAL: (usize, usize) = (30, 10);

/// The three default scenarios on [`PhaseDiagram::default_geometry`]:
/// hard crosses both boundaries, mod one, easy none.
pub fn default_scenarios(mode: Mode) -> Vec<ScenarioConfig> {
    vec![
        ScenarioConfig::new("easy", (26, 12), DEFAULT_GOAL, mode),
        ScenarioConfig::new("mod", (16, 14), DEFAULT_GOAL, mode),
        ScenarioConfig::new("hard", (2, 22), DEFAULT_GOAL, mode),
    ]
}

/// Scenarios for [`PhaseDiagram::scaled_geometry`] with the same crossing
/// structure as the defaults.
pub fn scaled_scenarios(mode: Mode) -> Vec<ScenarioConfig> {
    let goal = (15, 5);
    vec![
        ScenarioConfig::new("easy", (13, 6), goal, mode),
        ScenarioConfig::new("mod", (8, 7), goal, mode),
        ScenarioConfig::new("hard", (1, 11), goal, mode),
    ]
}

/// Visible projection of the state. Never carries the latent flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub t: usize,
    pub p: usize,
    pub goal: Option<(usize, usize)>,
}

impl Observation {
    pub fn position(&self) -> (usize, usize) {
        (self.t, self.p)
    }

    pub fn with_goal(self, goal: (usize, usize)) -> Self {
        Observation {
            goal: Some(goal),
            ..self
        }
    }

    pub fn feature_len(goal_augmented: bool) -> usize {
        if goal_augmented {
            4
        } else {
            2
        }
    }
}

/// Scale each coordinate to `[0, 1]` by its axis maximum; order is
/// `[t, p]` then `[goal_t, goal_p]` when present.
pub fn encode_observation(obs: &Observation, diagram: &PhaseDiagram) -> Vec<f64> {
    let mut out = Vec::with_capacity(4);
    encode_into(obs, diagram, &mut out);
    out
}

pub(crate) fn encode_into(obs: &Observation, diagram: &PhaseDiagram, out: &mut Vec<f64>) {
    let tmax = (diagram.width() - 1) as f64;
    let pmax = (diagram.height() - 1) as f64;
    out.push(obs.t as f64 / tmax);
    out.push(obs.p as f64 / pmax);
    if let Some((gt, gp)) = obs.goal {
        out.push(gt as f64 / tmax);
        out.push(gp as f64 / pmax);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Goal reached.
    pub done: bool,
    /// Step cap reached without reaching the goal.
    pub truncated: bool,
}

impl StepResult {
    pub fn finished(&self) -> bool {
        self.done || self.truncated
    }
}

pub const DEFAULT_STEP_CAP: usize = 10_000;

/// A single episode-stepping instance. Not synchronised; use one per thread.
#[derive(Debug, Clone)]
pub struct Environment {
    diagram: Arc<PhaseDiagram>,
    scenario: ScenarioConfig,
    state: EnvState,
    steps: usize,
    step_cap: usize,
    goal_augmented: bool,
    started: bool,
    finished: bool,
}

impl Environment {
    pub fn new(diagram: Arc<PhaseDiagram>, scenario: ScenarioConfig) -> Result<Self, EnvError> {
        scenario.validate(&diagram)?;
        Ok(Environment {
            state: EnvState::at(scenario.start.0, scenario.start.1),
            diagram,
            scenario,
            steps: 0,
            step_cap: DEFAULT_STEP_CAP,
            goal_augmented: false,
            started: false,
            finished: false,
        })
    }

    pub fn with_step_cap(mut self, cap: usize) -> Result<Self, EnvError> {
        if cap == 0 {
            return Err(EnvError::ZeroStepCap);
        }
        self.step_cap = cap;
        Ok(self)
    }

    pub fn with_goal_augmentation(mut self, on: bool) -> Self {
        self.goal_augmented = on;
        self
    }

    pub fn set_step_cap(&mut self, cap: usize) -> Result<(), EnvError> {
        if cap == 0 {
            return Err(EnvError::ZeroStepCap);
        }
        self.step_cap = cap;
        Ok(())
    }

    pub fn diagram(&self) -> &PhaseDiagram {
        &self.diagram
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn mode(&self) -> Mode {
        self.scenario.mode
    }

    pub fn goal_augmented(&self) -> bool {
        self.goal_augmented
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    pub fn reset(&mut self) -> Observation {
        self.state = EnvState::at(self.scenario.start.0, self.scenario.start.1);
        self.steps = 0;
        self.started = true;
        self.finished = false;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let obs = Observation {
            t: self.state.t,
            p: self.state.p,
            goal: None,
        };
        if self.goal_augmented {
            obs.with_goal(self.scenario.goal)
        } else {
            obs
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.finished {
            return Err(EnvError::EpisodeTerminated);
        }
        self.state = self.diagram.transition(self.scenario.mode, self.state, action);
        self.steps += 1;
        let done = self.state.position() == self.scenario.goal;
        let truncated = !done && self.steps >= self.step_cap;
        self.finished = done || truncated;
        Ok(StepResult {
            observation: self.observe(),
            reward: if done { 1.0 } else { 0.0 },
            done,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(name: &str, mode: Mode) -> Environment {
        let diagram = Arc::new(PhaseDiagram::default_geometry());
        let scenario = default_scenarios(mode)
            .into_iter()
            .find(|s| s.name == name)
            .unwrap();
        Environment::new(diagram, scenario).unwrap()
    }

    #[test]
    fn action_encoding_is_stable() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
        }
        assert_eq!(Action::from_index(4), None);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert_eq!(
            PhaseDiagram::new(1, 5, vec![]),
            Err(EnvError::GridTooSmall { width: 1, height: 5 })
        );
        assert!(matches!(
            PhaseDiagram::new(5, 5, vec![BoundarySegment::vertical(5, 0, 4)]),
            Err(EnvError::BadSegment { .. })
        ));
        assert!(matches!(
            PhaseDiagram::new(5, 5, vec![BoundarySegment::vertical(2, 3, 1)]),
            Err(EnvError::BadSegment { .. })
        ));
        assert!(matches!(
            PhaseDiagram::new(
                5,
                5,
                vec![
                    BoundarySegment::vertical(2, 0, 4),
                    BoundarySegment::horizontal(3, 0, 4)
                ]
            ),
            Err(EnvError::OverlappingSegments { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_scenarios() {
        let d = Arc::new(PhaseDiagram::default_geometry());
        let same = ScenarioConfig::new("x", (3, 3), (3, 3), Mode::Markov);
        assert!(matches!(
            Environment::new(d.clone(), same),
            Err(EnvError::StartIsGoal(_))
        ));
        let off = ScenarioConfig::new("x", (3, 40), (3, 3), Mode::Markov);
        assert!(matches!(
            Environment::new(d, off),
            Err(EnvError::OutOfRange { .. })
        ));
    }

    #[test]
    fn default_geometry_has_two_columns() {
        let d = PhaseDiagram::default_geometry();
        let cols: Vec<usize> = d.boundaries().iter().map(|b| b.index).collect();
        assert_eq!(cols, vec![12, 22]);
        assert!(d.is_boundary(12, 0) && d.is_boundary(22, 31));
        assert!(!d.is_boundary(13, 5));
    }

    #[test]
    fn reset_returns_start() {
        let mut e = env("easy", Mode::SemiMarkov);
        assert_eq!(e.reset().position(), (26, 12));
        let mut e = env("hard", Mode::SemiMarkov);
        assert_eq!(e.reset().position(), (2, 22));
        // leave a primed flag behind, then reset
        for _ in 0..10 {
            e.step(Action::QPlus).unwrap();
        }
        e.step(Action::WPlus).unwrap();
        assert_eq!(e.state().flag, LatentFlag::PrimedPositive);
        e.reset();
        assert_eq!(e.state().flag, LatentFlag::None);
        assert_eq!(e.steps(), 0);
    }

    #[test]
    fn step_before_reset_and_after_end_is_an_error() {
        let mut e = env("easy", Mode::Markov);
        assert_eq!(e.step(Action::QPlus), Err(EnvError::NotReset));
        e.reset();
        for a in [Action::QPlus, Action::QPlus, Action::QPlus, Action::QPlus, Action::WMinus] {
            assert!(!e.step(a).unwrap().done);
        }
        let last = e.step(Action::WMinus).unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 1.0);
        assert_eq!(e.step(Action::QPlus), Err(EnvError::EpisodeTerminated));
    }

    #[test]
    fn within_phase_and_edge_moves() {
        let d = PhaseDiagram::default_geometry();
        let s = d.transition(Mode::SemiMarkov, EnvState::at(5, 5), Action::QPlus);
        assert_eq!(s, EnvState::at(6, 5));
        let s = d.transition(Mode::SemiMarkov, EnvState::at(0, 0), Action::QMinus);
        assert_eq!(s, EnvState::at(0, 0));
        let s = d.transition(Mode::Markov, EnvState::at(31, 31), Action::WPlus);
        assert_eq!(s, EnvState::at(31, 31));
    }

    #[test]
    fn horizontal_boundary_follows_heat_then_work() {
        let d = PhaseDiagram::new(8, 8, vec![BoundarySegment::horizontal(4, 0, 7)]).unwrap();
        let s0 = EnvState::at(3, 4);
        let s1 = d.transition(Mode::SemiMarkov, s0, Action::QPlus);
        assert_eq!(s1.position(), (3, 4));
        assert_eq!(s1.flag, LatentFlag::PrimedPositive);
        let s2 = d.transition(Mode::SemiMarkov, s1, Action::WPlus);
        assert_eq!(s2, EnvState::at(3, 5));
    }

    #[test]
    fn unprimed_crossing_clears_flag() {
        let d = PhaseDiagram::default_geometry();
        let primed = EnvState {
            t: 12,
            p: 5,
            flag: LatentFlag::PrimedNegative,
        };
        let s = d.transition(Mode::SemiMarkov, primed, Action::QPlus);
        assert_eq!(s, EnvState::at(12, 5));
        let s = d.transition(Mode::SemiMarkov, primed, Action::QMinus);
        assert_eq!(s, EnvState::at(11, 5));
        // opposite-sign priming overwrites
        let s = d.transition(Mode::SemiMarkov, primed, Action::WPlus);
        assert_eq!(s.flag, LatentFlag::PrimedPositive);
    }

    #[test]
    fn markov_boundary_moves_in_one_step() {
        let d = PhaseDiagram::default_geometry();
        let s = d.transition(Mode::Markov, EnvState::at(12, 7), Action::QPlus);
        assert_eq!(s, EnvState::at(13, 7));
    }

    #[test]
    fn observation_hides_priming() {
        let mut e = env("hard", Mode::SemiMarkov);
        e.reset();
        for _ in 0..10 {
            e.step(Action::QPlus).unwrap();
        }
        let before = e.observe();
        let after = e.step(Action::WPlus).unwrap().observation;
        assert_eq!(before, after);
        assert_eq!(e.state().flag, LatentFlag::PrimedPositive);
    }

    #[test]
    fn goal_augmented_observation() {
        let e = env("hard", Mode::SemiMarkov).with_goal_augmentation(true);
        let mut e = e;
        let obs = e.reset();
        assert_eq!(obs.goal, Some((30, 10)));
        assert_eq!(obs.position(), (2, 22));
        let x = encode_observation(&obs, e.diagram());
        assert_eq!(x, vec![2.0 / 31.0, 22.0 / 31.0, 30.0 / 31.0, 10.0 / 31.0]);
    }

    #[test]
    fn encoding_endpoints() {
        let d = PhaseDiagram::default_geometry();
        let hi = Observation { t: 31, p: 31, goal: None };
        let lo = Observation { t: 0, p: 0, goal: None };
        assert_eq!(encode_observation(&hi, &d), vec![1.0, 1.0]);
        assert_eq!(encode_observation(&lo, &d), vec![0.0, 0.0]);
    }

    #[test]
    fn truncation_at_cap() {
        let mut e = env("hard", Mode::Markov).with_step_cap(3).unwrap();
        e.reset();
        let r1 = e.step(Action::QMinus).unwrap();
        let r2 = e.step(Action::QMinus).unwrap();
        let r3 = e.step(Action::QMinus).unwrap();
        assert!(!r1.truncated && !r2.truncated);
        assert!(r3.truncated && !r3.done);
        assert_eq!(r3.reward, 0.0);
        assert_eq!(e.step(Action::QMinus), Err(EnvError::EpisodeTerminated));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("semi".parse::<Mode>().unwrap(), Mode::SemiMarkov);
        assert_eq!("Markov".parse::<Mode>().unwrap(), Mode::Markov);
        assert!("foo".parse::<Mode>().is_err());
    }
}
