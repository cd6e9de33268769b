//! Command-line front end.
//!
//! Every verb reads its table from an optional TOML file (`--config`),
//! applies flag overrides, writes its artifacts to the output directory and
//! maps the result onto an exit code.

pub mod commands;
pub mod config;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dynamics::PlantKind;
use crate::Error;
use commands::Outcome;
use config::{ControllerKind, FileConfig, StepSpec, TrainMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DUALSCALE_OUT";

#[derive(Debug, Parser)]
#[command(name = "dualscale", version, about = "Train, homogenize and verify pendulum-type controllers")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with one table per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $DUALSCALE_OUT, then the config, then ./out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a DDPG policy on the nominal or randomised pendulum.
    Train(TrainArgs),
    /// Roll out a controller, optionally homogenized or adaptive.
    Simulate(SimulateArgs),
    /// Check homogeneity of a scenario grid against the nominal response.
    Verify(VerifyArgs),
    /// Run the online-estimation scenario with the adaptive controller.
    Estimate(EstimateArgs),
    /// Search for a transform with genetic programming.
    Homogenize(HomogenizeArgs),
    /// Compare a homogenized policy with a domain-randomised one.
    Compare(CompareArgs),
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

fn parse_step(s: &str) -> Result<StepSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_plant(s: &str) -> Result<PlantKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_plant)]
    pub plant: Option<PlantKind>,
    #[arg(long, value_enum)]
    pub mode: Option<TrainMode>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub l_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub m_range: Option<Vec<f64>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Width of the first hidden layers; the second ones get 3/4 of it (400 gives 400/300).
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_plant)]
    pub plant: Option<PlantKind>,
    #[arg(long, value_enum)]
    pub controller: Option<ControllerKind>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long = "M")]
    pub big_m: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub transform: Option<bool>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub adaptive: Option<bool>,
    /// Length step `value@time`; repeatable.
    #[arg(long, value_parser = parse_step)]
    pub l_step: Vec<StepSpec>,
    /// Mass step `value@time`; repeatable.
    #[arg(long, value_parser = parse_step)]
    pub m_step: Vec<StepSpec>,
    /// Initial state in nominal coordinates.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub saturation: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_plant)]
    pub plant: Option<PlantKind>,
    #[arg(long, value_enum)]
    pub controller: Option<ControllerKind>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Grid cell `m,l` (pendulum) or `M,m,l` (vehicle/load); repeatable.
    #[arg(long)]
    pub cell: Vec<String>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub transform: Option<bool>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub t_final: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub controller: Option<ControllerKind>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, value_parser = parse_step)]
    pub l_step: Vec<StepSpec>,
    #[arg(long, value_parser = parse_step)]
    pub m_step: Vec<StepSpec>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HomogenizeArgs {
    #[arg(long, value_parser = parse_plant)]
    pub plant: Option<PlantKind>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub tournament: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub dr_policy: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub l_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub m_range: Option<Vec<f64>>,
    /// Points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub t_final: Option<f64>,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::UnsupportedParameter(_) | Error::Config(_) | Error::Json(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn pair(v: Vec<f64>) -> [f64; 2] {
    [v[0], v[1]]
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn output_dir(cli_out: Option<PathBuf>, cfg: &FileConfig) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Resolves the configuration and runs one command.
pub fn execute(cli: Cli) -> Result<Outcome, Error> {
    let mut cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let out = output_dir(cli.out, &cfg);
    let seed = cli.seed.or(cfg.seed);
    match cli.command {
        Command::Train(a) => {
            let s = &mut cfg.train;
            set(&mut s.plant, a.plant);
            set(&mut s.mode, a.mode);
            set(&mut s.l_range, a.l_range.map(pair));
            set(&mut s.m_range, a.m_range.map(pair));
            set(&mut s.ddpg.episodes, a.episodes);
            set(&mut s.ddpg.seed, seed);
            if let Some(w) = a.width {
                s.ddpg.actor_hidden = [w, w * 3 / 4];
                s.ddpg.critic_hidden = w;
                s.ddpg.critic_joint = w * 3 / 4;
            }
            commands::train(s, &out)
        }
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(&mut s.plant, a.plant);
            set(&mut s.controller, a.controller);
            s.policy = a.policy.or(s.policy.take());
            s.params.big_m = a.big_m.or(s.params.big_m);
            s.params.m = a.m.or(s.params.m);
            s.params.l = a.l.or(s.params.l);
            s.params.g = a.g.or(s.params.g);
            set(&mut s.transform, a.transform);
            set(&mut s.adaptive, a.adaptive);
            if !a.l_step.is_empty() {
                s.l_steps = a.l_step;
            }
            if !a.m_step.is_empty() {
                s.m_steps = a.m_step;
            }
            s.x0 = a.x0.or(s.x0.take());
            set(&mut s.t_final, a.t_final);
            set(&mut s.control_period, a.period);
            s.saturation = a.saturation.or(s.saturation);
            commands::simulate(s, &out)
        }
        Command::Verify(a) => {
            let s = &mut cfg.verify;
            set(&mut s.plant, a.plant);
            set(&mut s.controller, a.controller);
            s.policy = a.policy.or(s.policy.take());
            if !a.cell.is_empty() {
                s.cells = a
                    .cell
                    .iter()
                    .map(|c| {
                        c.split(',')
                            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("cell `{c}` is not numeric"))))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
            }
            set(&mut s.transform, a.transform);
            set(&mut s.tol, a.tol);
            s.x0 = a.x0.or(s.x0.take());
            set(&mut s.t_final, a.t_final);
            commands::verify(s, &out)
        }
        Command::Estimate(a) => {
            let s = &mut cfg.estimate;
            set(&mut s.controller, a.controller);
            s.policy = a.policy.or(s.policy.take());
            if !a.l_step.is_empty() {
                s.l_steps = a.l_step;
            }
            if !a.m_step.is_empty() {
                s.m_steps = a.m_step;
            }
            set(&mut s.adaptive.lambda, a.lambda);
            set(&mut s.t_final, a.t_final);
            commands::estimate(s, &out)
        }
        Command::Homogenize(a) => {
            let s = &mut cfg.homogenize;
            set(&mut s.plant, a.plant);
            s.population = a.population.or(s.population);
            s.generations = a.generations.or(s.generations);
            s.max_depth = a.max_depth.or(s.max_depth);
            s.tournament = a.tournament.or(s.tournament);
            commands::homogenize(s, seed, &out)
        }
        Command::Compare(a) => {
            let s = &mut cfg.compare;
            s.policy = a.policy.or(s.policy.take());
            s.dr_policy = a.dr_policy.or(s.dr_policy.take());
            set(&mut s.l_range, a.l_range.map(pair));
            set(&mut s.m_range, a.m_range.map(pair));
            set(&mut s.grid, a.grid);
            set(&mut s.t_final, a.t_final);
            commands::compare(s, &out)
        }
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(Outcome::Completed) => EXIT_OK,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
