//! CSV outputs.
//!
//! Raw: `agent,mode,scenario,seed,episode,steps,success`, one row per
//! evaluation episode, sorted by (agent, mode, scenario, seed, episode).
//!
//! Aggregate: `agent,mode,scenario,episode,mean_steps,stddev,n_seeds`, one
//! row per evaluation point of each learning curve; `stddev` is the sample
//! standard deviation over seeds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentResults, HarnessError, LearningCurve, RunResult};

pub const RAW_HEADER: [&str; 7] = ["agent", "mode", "scenario", "seed", "episode", "steps", "success"];
pub const AGGREGATE_HEADER: [&str; 7] = [
    "agent",
    "mode",
    "scenario",
    "episode",
    "mean_steps",
    "stddev",
    "n_seeds",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawRow {
    pub agent: String,
    pub mode: String,
    pub scenario: String,
    pub seed: u64,
    pub episode: usize,
    pub steps: usize,
    pub success: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn raw_rows(runs: &[RunResult]) -> Vec<RawRow> {
    let mut rows: Vec<RawRow> = runs
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| RawRow {
                agent: r.key.agent.name().to_string(),
                mode: r.key.mode.name().to_string(),
                scenario: r.key.scenario.clone(),
                seed: p.seed,
                episode: p.episode,
                steps: p.steps,
                success: p.success,
            })
        })
        .collect();
    rows.sort();
    rows
}

pub fn write_raw_csv(runs: &[RunResult], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RAW_HEADER)?;
    for row in raw_rows(runs) {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_aggregate_csv(curves: &[LearningCurve], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    let mut sorted: Vec<&LearningCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| {
        (a.agent.name(), a.mode.name(), &a.scenario).cmp(&(b.agent.name(), b.mode.name(), &b.scenario))
    });
    for c in sorted {
        for p in &c.points {
            w.write_record([
                c.agent.name().to_string(),
                c.mode.name().to_string(),
                c.scenario.clone(),
                p.episode.to_string(),
                p.mean_steps.to_string(),
                p.stddev.to_string(),
                p.n_seeds.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Write `raw.csv` and `aggregate.csv` into `dir`, creating it if needed.
pub fn write_results(results: &ExperimentResults, dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let raw = dir.join("raw.csv");
    let agg = dir.join("aggregate.csv");
    write_raw_csv(&results.runs, &raw)?;
    write_aggregate_csv(&results.curves, &agg)?;
    Ok((raw, agg))
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RAW_HEADER {
        return Err(HarnessError::Config(format!("unexpected raw header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentSpec;
    use crate::env::Mode;
    use crate::harness::{CurvePoint, EvalPoint, RunKey};

    fn run(agent: &str, seed: u64, steps: &[usize]) -> RunResult {
        RunResult {
            key: RunKey {
                agent: agent.parse::<AgentSpec>().unwrap(),
                mode: Mode::Markov,
                scenario: "easy".into(),
                seed,
            },
            points: steps
                .iter()
                .enumerate()
                .map(|(i, &s)| EvalPoint {
                    seed,
                    episode: (i + 1) * 50,
                    steps: s,
                    success: s < 10_000,
                })
                .collect(),
        }
    }

    #[test]
    fn raw_csv_layout_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        write_raw_csv(&[run("drqn", 1, &[9, 7]), run("dqn", 2, &[10_000, 6])], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "agent,mode,scenario,seed,episode,steps,success");
        assert_eq!(lines[1], "dqn,markov,easy,2,50,10000,false");
        assert_eq!(lines[4], "drqn,markov,easy,1,100,7,true");
        let back = read_raw_csv(&path).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[3].steps, 7);
    }

    #[test]
    fn aggregate_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let curve = LearningCurve {
            agent: "dqn".parse().unwrap(),
            mode: Mode::SemiMarkov,
            scenario: "hard".into(),
            points: vec![CurvePoint {
                episode: 50,
                mean_steps: 12.5,
                stddev: 0.5,
                n_seeds: 2,
            }],
        };
        write_aggregate_csv(&[curve], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "agent,mode,scenario,episode,mean_steps,stddev,n_seeds\ndqn,semi,hard,50,12.5,0.5,2\n"
        );
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("raw.csv");
        assert!(matches!(
            write_raw_csv(&[], &path),
            Err(HarnessError::Io { .. })
        ));
    }
}
