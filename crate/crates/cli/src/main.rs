//! `pohozaev-lab`: runs one scenario per invocation from a TOML configuration and
//! writes CSV tables plus a JSON manifest into the output directory.
//!
//! Exit status: 0 on success, 2 on configuration or usage errors (nothing is
//! computed), 3 on numeric failures or failed assertions.

mod config;
mod output;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Mode, RunConfig, Scenario};
use output::OutputDir;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
    Assertion(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Numeric(m) => write!(f, "numeric failure: {m}"),
            Self::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) | Self::Numeric(_) | Self::Assertion(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pohozaev-lab", version, about = "Green functions, Pohožaev identities and blow-up constructions for Δu + hu = u⁵ in 3D")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Green functions and mass expansions at the configured sources.
    Green(RunArgs),
    /// Pohožaev identities for a zero, bubble or radial-solution field.
    Pohozaev(RunArgs),
    /// Radial shooting sweep for a positive solution.
    RadialSolve(RunArgs),
    /// Concentration points of a synthetic bubble sum.
    Extract(RunArgs),
    /// One member of the radial or two-bubble family and its residual potential.
    Construct(RunArgs),
    /// Residual norms of a family over a decreasing list of ε.
    Sweep(RunArgs),
    /// Merges sweep runs and fits the rate C/ln(1/ε).
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed; overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ε values; overrides the configured list.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Family for `construct` and `sweep`.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Manifests of sweep runs, or their output directories.
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn scenario_for(verb: &Verb, args: &RunArgs, cfg: &RunConfig) -> Result<Scenario, CliError> {
    Ok(match verb {
        Verb::Green(_) => Scenario::Green,
        Verb::Pohozaev(_) => Scenario::Pohozaev,
        Verb::RadialSolve(_) => Scenario::RadialSolve,
        Verb::Extract(_) => Scenario::Extract,
        Verb::Sweep(_) => Scenario::Sweep,
        Verb::Construct(_) => match (args.mode, cfg.scenario) {
            (Some(Mode::Radial), _) => Scenario::ConstructRadial,
            (Some(Mode::TwoBubble), _) => Scenario::ConstructTwoBubble,
            (None, Some(s @ (Scenario::ConstructRadial | Scenario::ConstructTwoBubble))) => s,
            _ => return Err(CliError::Config("construct needs --mode radial|two-bubble".into())),
        },
        Verb::Report(_) => unreachable!("report has no configuration"),
    })
}

fn verb_name(v: &Verb) -> &'static str {
    match v {
        Verb::Green(_) => "green",
        Verb::Pohozaev(_) => "pohozaev",
        Verb::RadialSolve(_) => "radial-solve",
        Verb::Extract(_) => "extract",
        Verb::Construct(_) => "construct",
        Verb::Sweep(_) => "sweep",
        Verb::Report(_) => "report",
    }
}

/// Loads the configuration and applies the command-line overrides.
fn prepare(verb: &Verb, args: &RunArgs) -> Result<(RunConfig, Scenario), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = &args.eps {
        cfg.sweep.eps = e.clone();
        cfg.construct.eps = e.first().copied();
    }
    if let Some(m) = args.mode {
        cfg.sweep.mode = Some(m);
    }
    if let Some(o) = &args.out {
        cfg.out = o.display().to_string();
    }
    let scenario = scenario_for(verb, args, &cfg)?;
    if matches!(verb, Verb::Construct(_)) && cfg.scenario.is_some() {
        cfg.scenario = Some(scenario);
    }
    cfg.validate(scenario)?;
    Ok((cfg, scenario))
}

fn execute(verb: &Verb, args: &RunArgs) -> Result<(), CliError> {
    let name = verb_name(verb);
    let (cfg, scenario) = match prepare(verb, args) {
        Ok(v) => v,
        Err(e) => {
            // record the failure when the output directory is known
            if let Some(dir) = &args.out {
                let echo = serde_json::json!({ "config_path": args.config.display().to_string() });
                if let Ok(out) = OutputDir::new(dir, name, echo) {
                    let r = Err(e);
                    out.finish(&r)?;
                    return r;
                }
            }
            return Err(e);
        }
    };
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let mut out = OutputDir::new(Path::new(&cfg.out), name, echo)?;
    let result = run::run(scenario, &cfg, &mut out);
    out.finish(&result)?;
    result
}

fn execute_report(args: &ReportArgs) -> Result<(), CliError> {
    let runs = args.manifests.iter().map(|p| report::load_sweep(p)).collect::<Result<Vec<_>, _>>()?;
    let echo = serde_json::json!({ "manifests": args.manifests.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() });
    let mut out = OutputDir::new(&args.out, "report", echo)?;
    let (csv, text) = report::consolidate(&runs);
    let result = out.write("report.csv", &csv).and_then(|_| out.write("report.txt", &text));
    print!("{text}");
    out.finish(&result)?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.verb {
        Verb::Report(a) => execute_report(a),
        v @ (Verb::Green(a) | Verb::Pohozaev(a) | Verb::RadialSolve(a) | Verb::Extract(a) | Verb::Construct(a) | Verb::Sweep(a)) => execute(v, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pohozaev-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
