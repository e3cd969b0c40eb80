use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfc::config::{Overrides, Preset, ScenarioConfig};
use mfc::report::{self, Command};
use mfc::{Error, Result};

/// Design, certify and simulate model-following controllers for the
/// hardening mass-spring-damper benchmark.
#[derive(Parser)]
#[command(name = "mfc", version)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Opts {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario used when no config file is given.
    #[arg(long, global = true, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Falsification RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator step [s].
    #[arg(long, global = true, allow_negative_numbers = true)]
    step: Option<f64>,
    /// Simulation horizon [s].
    #[arg(long, global = true, allow_negative_numbers = true)]
    horizon: Option<f64>,
    /// Monte-Carlo samples per certified set.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// JSON table overriding the reproduction tolerances.
    #[arg(long, global = true)]
    tolerance_profile: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gains, Lyapunov matrix and robustness bounds.
    Analyze,
    /// Equilibria of every loop and the set-point sweep.
    SteadyState,
    /// Region-of-attraction levels and boundary polylines.
    Roa,
    /// Closed-loop trajectories and metrics.
    Simulate,
    /// Monte-Carlo falsification of every certified set.
    Falsify,
    /// Everything above for a preset, compared against the reported figures.
    Reproduce {
        #[arg(value_parser = parse_preset)]
        scenario: Preset,
    },
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(opts: &Opts) -> Result<ScenarioConfig> {
    let cfg = match (&opts.config, opts.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(p)) => p.config(),
        (None, None) => {
            return Err(Error::Config {
                path: "config".into(),
                message: "pass --config <path> or --preset <scenario1|scenario2>".into(),
            });
        }
    };
    cfg.with_overrides(&Overrides {
        seed: opts.seed,
        step: opts.step,
        horizon: opts.horizon,
        samples: opts.samples,
    })
}

fn execute(cli: &Cli) -> Result<usize> {
    let mut opts = cli.opts.clone();
    let command = match &cli.command {
        Cmd::Analyze => Command::Analyze,
        Cmd::SteadyState => Command::SteadyState,
        Cmd::Roa => Command::Roa,
        Cmd::Simulate => Command::Simulate,
        Cmd::Falsify => Command::Falsify,
        Cmd::Reproduce { scenario } => {
            opts.preset = Some(*scenario);
            Command::Reproduce
        }
    };
    let cfg = load(&opts)?;
    let tolerances = match &cli.opts.tolerance_profile {
        Some(path) => report::load_tolerance_profile(path)?,
        None => report::default_tolerances(),
    };
    let outcome = report::run(command, &cfg, &cli.opts.out, &tolerances)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if let Some(summary) = &outcome.summary {
        for r in &summary.rows {
            let status = if r.pass { "pass" } else { "FAIL" };
            println!("{status:4}  {:<30} computed {:>12.6}  reference {:>12.6}", r.name, r.computed, r.reference);
        }
    }
    Ok(outcome.mismatches)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} summary row(s) outside tolerance");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
