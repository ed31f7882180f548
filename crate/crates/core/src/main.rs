use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phase_rl::agents::{AgentConfig, AgentSpec};
use phase_rl::config::{ConfigFile, Resolved};
use phase_rl::env::{Mode, Observation, ScenarioConfig};
use phase_rl::harness::{
    aggregate, derive_seed, run_experiment, train_run_with, write_aggregate_csv, write_raw_csv, write_results, RunKey,
    RunResult,
};
use phase_rl::neural::{gradient_suite, save_checkpoint, Architecture};
use phase_rl::oracle::{optimal_steps, validate_diagram};

/// Environment variable that overrides the default output directory.
const OUT_DIR_VAR: &str = "PHASE_RL_OUT_DIR";

#[derive(Parser)]
#[command(name = "phase-rl", version, about = "Phase-change navigation with DQN/DRQN agents")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Override the number of training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Explicit comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on one scenario and write its evaluation rows.
    Train {
        #[arg(long)]
        agent: AgentSpec,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[command(flatten)]
        run: RunArgs,
        /// Raw CSV path (default: <out dir>/train.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save network parameters after every evaluation into this directory.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Run the full agent x mode x scenario x seed matrix.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory for raw.csv and aggregate.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print optimal step counts.
    Oracle {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Check reachability and crossing counts of every scenario.
    Validate,
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn resolve(path: Option<&Path>) -> Result<Resolved> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    Ok(file.resolve()?)
}

fn out_dir(flag: Option<PathBuf>, resolved: &Resolved) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .or_else(|| resolved.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn apply_run_args(r: &mut Resolved, run: RunArgs) {
    let p = &mut r.experiment.protocol;
    if let Some(e) = run.episodes {
        p.episodes = e;
    }
    if let Some(n) = run.seeds {
        r.experiment.seeds = (0..n).collect();
    }
    if let Some(list) = run.seed_list {
        r.experiment.seeds = list;
    }
}

fn find_scenario<'a>(r: &'a Resolved, name: &str) -> Result<&'a ScenarioConfig> {
    match r.experiment.scenarios.iter().find(|s| s.name == name) {
        Some(s) => Ok(s),
        None => {
            let known: Vec<&str> = r.experiment.scenarios.iter().map(|s| s.name.as_str()).collect();
            bail!("unknown scenario '{name}' (known: {})", known.join(", "))
        }
    }
}

fn train(
    mut r: Resolved,
    agent: AgentSpec,
    scenario: &str,
    mode: Option<Mode>,
    run: RunArgs,
    out: Option<PathBuf>,
    checkpoint_dir: Option<PathBuf>,
) -> Result<()> {
    apply_run_args(&mut r, run);
    let mode = mode.unwrap_or(r.mode);
    let sc = find_scenario(&r, scenario)?.with_mode(mode);
    let exp = &mut r.experiment;
    exp.agents = vec![agent];
    exp.modes = vec![mode];
    exp.scenarios = vec![sc.clone()];
    exp.validate()?;
    let path = match out {
        Some(p) => p,
        None => out_dir(None, &r).join("train.csv"),
    };
    let exp = &r.experiment;
    if let Some(dir) = &checkpoint_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut runs = Vec::new();
    for &seed in &exp.seeds {
        let run_seed = derive_seed(exp.base_seed, agent.name(), &sc.name, mode, seed);
        let mut save_err = None;
        let points = train_run_with(
            exp.diagram.clone(),
            &sc,
            AgentConfig {
                spec: agent,
                hyper: exp.hyper,
            },
            &exp.protocol,
            seed,
            run_seed,
            |point, params| {
                if let (Some(dir), None) = (&checkpoint_dir, &save_err) {
                    let name = format!("{agent}-{mode}-{}-seed{seed}-ep{}.ckpt", sc.name, point.episode);
                    if let Err(e) = save_checkpoint(params, &dir.join(name)) {
                        save_err = Some(e);
                    }
                }
            },
        )?;
        if let Some(e) = save_err {
            return Err(e.into());
        }
        if let Some(last) = points.last() {
            info!("seed {seed}: final evaluation {} steps", last.steps);
        }
        runs.push(RunResult {
            key: RunKey {
                agent,
                mode,
                scenario: sc.name.clone(),
                seed,
            },
            points,
        });
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_raw_csv(&runs, &path)?;
    if runs.len() > 1 {
        let agg = path.with_extension("aggregate.csv");
        write_aggregate_csv(&aggregate(exp, &runs), &agg)?;
    }
    println!("{}", path.display());
    Ok(())
}

fn sweep(mut r: Resolved, run: RunArgs, out: Option<PathBuf>) -> Result<()> {
    apply_run_args(&mut r, run);
    // validate before touching the filesystem
    r.experiment.validate()?;
    let dir = out_dir(out, &r);
    let results = run_experiment(&r.experiment)?;
    let (raw, agg) = write_results(&results, &dir)?;
    println!("{}\n{}", raw.display(), agg.display());
    if !results.failures.is_empty() {
        bail!("{} run(s) failed and were excluded", results.failures.len());
    }
    Ok(())
}

fn oracle(r: Resolved, scenario: Option<String>, mode: Option<Mode>) -> Result<()> {
    let d = &r.experiment.diagram;
    match scenario {
        Some(name) => {
            let sc = find_scenario(&r, &name)?.with_mode(mode.unwrap_or(r.mode));
            println!("{}", optimal_steps(d, &sc)?);
        }
        None => {
            let modes = mode.map(|m| vec![m]).unwrap_or_else(|| Mode::ALL.to_vec());
            println!("scenario,mode,optimal_steps");
            for sc in &r.experiment.scenarios {
                for &m in &modes {
                    println!("{},{m},{}", sc.name, optimal_steps(d, &sc.with_mode(m))?);
                }
            }
        }
    }
    Ok(())
}

fn validate(r: Resolved) -> Result<()> {
    let report = validate_diagram(&r.experiment.diagram, &r.experiment.scenarios)?;
    println!("scenario,markov_steps,semi_steps,crossings");
    for s in report.scenarios {
        println!("{},{},{},{}", s.name, s.markov_steps, s.semi_markov_steps, s.crossings);
    }
    Ok(())
}

fn gradcheck(r: Resolved, instances: usize, seed: u64) -> Result<()> {
    const TOLERANCE: f64 = 1e-4;
    if instances == 0 {
        bail!("instances must be positive");
    }
    let hyper = r.experiment.hyper;
    let input = Observation::feature_len(false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    for arch in [
        Architecture::Mlp {
            input,
            hidden: hyper.dense_hidden,
            output: 4,
        },
        Architecture::Gru {
            input,
            hidden: hyper.gru_hidden,
            output: 4,
        },
    ] {
        let err = gradient_suite(arch, instances, &mut rng)?;
        let pass = err < TOLERANCE;
        ok &= pass;
        println!(
            "{} {}: max relative error {err:.3e} over {instances} instances",
            if pass { "PASS" } else { "FAIL" },
            arch.name()
        );
    }
    if !ok {
        bail!("gradient check exceeded {TOLERANCE:e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = resolve(cli.config.as_deref()).and_then(|r| match cli.command {
        Command::Train {
            agent,
            scenario,
            mode,
            run,
            out,
            checkpoint_dir,
        } => train(r, agent, &scenario, mode, run, out, checkpoint_dir),
        Command::Sweep { run, out } => sweep(r, run, out),
        Command::Oracle { scenario, mode } => oracle(r, scenario, mode),
        Command::Validate => validate(r),
        Command::Gradcheck { instances, seed } => gradcheck(r, instances, seed),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
