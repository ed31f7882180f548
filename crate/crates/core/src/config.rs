//! TOML configuration files.
//!
//! One file may describe the diagram, the scenarios and the experiment; every
//! section is optional and falls back to the built-in defaults. Unknown keys
//! are rejected.
//!
//! ```toml
//! geometry = "default"          # or "scaled"; ignored when [grid] is present
//! mode = "semi"                 # mode for single-scenario commands
//! agents = ["dqn", "drqn-her"]
//! modes = ["semi", "markov"]
//! seeds = [0, 1, 2]             # or: seed_count = 30
//! base_seed = 0
//! output = "results"
//!
//! [grid]
//! width = 32
//! height = 32
//!
//! [[boundary]]
//! orientation = "vertical"      # or "horizontal"
//! index = 12
//! span = [0, 31]
//!
//! [[scenario]]
//! name = "hard"
//! start = [2, 22]               # [t, p]
//! goal = [30, 10]
//!
//! [protocol]
//! episodes = 20000
//! eval_interval = 50
//! eval_epsilon = 0.2
//! eval_step_cap = 10000
//! train_step_cap = 10000
//!
//! [agent]
//! learning_rate = 0.001
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::agents::{AgentSpec, Hyperparams};
use crate::env::{default_scenarios, scaled_scenarios, BoundarySegment, Mode, PhaseDiagram, ScenarioConfig};
use crate::harness::{ExperimentConfig, Protocol};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub geometry: Option<String>,
    pub mode: Option<String>,
    pub agents: Option<Vec<String>>,
    pub modes: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub seed_count: Option<u64>,
    pub base_seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub boundary: Vec<BoundarySegment>,
    #[serde(default)]
    pub scenario: Vec<ScenarioSection>,
    pub protocol: Option<ProtocolSection>,
    #[serde(default)]
    pub agent: Hyperparams,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub episodes: Option<usize>,
    pub eval_interval: Option<usize>,
    pub eval_epsilon: Option<f64>,
    pub eval_step_cap: Option<usize>,
    pub train_step_cap: Option<usize>,
}

/// Everything a command needs, resolved against the defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub mode: Mode,
    pub output: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn parse_mode(s: &str) -> Result<Mode, ConfigError> {
    s.parse().map_err(|_| invalid(format!("unknown mode '{s}'")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mode = match &self.mode {
            Some(m) => parse_mode(m)?,
            None => Mode::SemiMarkov,
        };
        let (diagram, builtin) = match (&self.grid, self.geometry.as_deref()) {
            (Some(g), _) => {
                let d = PhaseDiagram::new(g.width, g.height, self.boundary.clone())
                    .map_err(|e| invalid(e.to_string()))?;
                (d, Vec::new())
            }
            (None, None | Some("default")) => (PhaseDiagram::default_geometry(), default_scenarios(mode)),
            (None, Some("scaled")) => (PhaseDiagram::scaled_geometry(), scaled_scenarios(mode)),
            (None, Some(other)) => return Err(invalid(format!("unknown geometry '{other}'"))),
        };
        if self.grid.is_none() && !self.boundary.is_empty() {
            return Err(invalid("[[boundary]] entries need a [grid] section"));
        }
        let scenarios = if self.scenario.is_empty() {
            builtin
        } else {
            self.scenario
                .iter()
                .map(|s| ScenarioConfig::new(s.name.clone(), s.start, s.goal, mode))
                .collect()
        };
        if scenarios.is_empty() {
            return Err(invalid("a custom grid needs at least one [[scenario]]"));
        }
        for s in &scenarios {
            s.validate(&diagram).map_err(|e| invalid(format!("scenario '{}': {e}", s.name)))?;
        }

        let mut exp = ExperimentConfig {
            diagram: Arc::new(diagram),
            scenarios,
            hyper: self.agent,
            ..ExperimentConfig::default()
        };
        if let Some(agents) = &self.agents {
            exp.agents = agents
                .iter()
                .map(|a| a.parse::<AgentSpec>().map_err(|e| invalid(e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if let Some(modes) = &self.modes {
            exp.modes = modes.iter().map(|m| parse_mode(m)).collect::<Result<_, _>>()?;
        }
        match (&self.seeds, self.seed_count) {
            (Some(_), Some(_)) => return Err(invalid("give either seeds or seed_count, not both")),
            (Some(s), None) => exp.seeds = s.clone(),
            (None, Some(n)) => exp.seeds = (0..n).collect(),
            (None, None) => {}
        }
        if let Some(b) = self.base_seed {
            exp.base_seed = b;
        }
        if let Some(p) = self.protocol {
            let d = Protocol::default();
            exp.protocol = Protocol {
                episodes: p.episodes.unwrap_or(d.episodes),
                eval_interval: p.eval_interval.unwrap_or(d.eval_interval),
                eval_epsilon: p.eval_epsilon.unwrap_or(d.eval_epsilon),
                eval_step_cap: p.eval_step_cap.unwrap_or(d.eval_step_cap),
                train_step_cap: p.train_step_cap.unwrap_or(d.train_step_cap),
            };
        }
        Ok(Resolved {
            experiment: exp,
            mode,
            output: self.output.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let r = ConfigFile::parse("").unwrap().resolve().unwrap();
        assert_eq!(r.experiment.diagram.width(), 32);
        assert_eq!(r.experiment.scenarios.len(), 3);
        assert_eq!(r.experiment.seeds.len(), 30);
        assert_eq!(r.experiment.protocol, Protocol::default());
        assert_eq!(r.mode, Mode::SemiMarkov);
    }

    #[test]
    fn custom_grid() {
        let text = r#"
            mode = "markov"
            seed_count = 2
            [grid]
            width = 8
            height = 6
            [[boundary]]
            orientation = "horizontal"
            index = 3
            span = [0, 7]
            [[scenario]]
            name = "cross"
            start = [1, 1]
            goal = [1, 5]
            [protocol]
            episodes = 100
            [agent]
            learning_rate = 0.01
        "#;
        let r = ConfigFile::parse(text).unwrap().resolve().unwrap();
        let e = &r.experiment;
        assert_eq!((e.diagram.width(), e.diagram.height()), (8, 6));
        assert!(e.diagram.is_boundary(4, 3));
        assert_eq!(e.scenarios[0].mode, Mode::Markov);
        assert_eq!(e.seeds, vec![0, 1]);
        assert_eq!(e.protocol.episodes, 100);
        assert_eq!(e.protocol.eval_interval, 50);
        assert_eq!(e.hyper.learning_rate, 0.01);
        assert_eq!(e.hyper.batch_size, Hyperparams::default().batch_size);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ConfigFile::parse("colour = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(ConfigFile::parse("[agent]\nlr = 1.0"), Err(ConfigError::Parse(_))));
        assert!(matches!(ConfigFile::parse("[protocol]\nepisodez = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn bad_values_rejected() {
        for text in [
            "geometry = \"huge\"",
            "mode = \"quantum\"",
            "agents = [\"ppo\"]",
            "seeds = [1]\nseed_count = 3",
            "[[boundary]]\norientation = \"vertical\"\nindex = 1\nspan = [0, 3]",
            "[grid]\nwidth = 4\nheight = 4",
            "[[scenario]]\nname = \"off\"\nstart = [40, 0]\ngoal = [1, 1]",
        ] {
            let r = ConfigFile::parse(text).and_then(|c| c.resolve());
            assert!(r.is_err(), "{text}");
        }
    }

    #[test]
    fn scaled_geometry_by_name() {
        let r = ConfigFile::parse("geometry = \"scaled\"").unwrap().resolve().unwrap();
        assert_eq!(r.experiment.diagram.width(), 16);
        assert_eq!(r.experiment.scenarios[2].start, (1, 11));
    }
}
