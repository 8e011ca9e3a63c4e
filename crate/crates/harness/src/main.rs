use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use predrep_harness::agents::AgentRegistry;
use predrep_harness::config::{parse_seed_list, ExperimentConfig};
use predrep_harness::report::Format;
use predrep_harness::{ExperimentRegistry, HarnessError, Result};

#[derive(Parser)]
#[command(name = "predrep", version, about = "Predictive-representation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SR identities and gridworld SR maps.
    Sr(Common),
    /// GPI over successor-feature libraries.
    Sf(Common),
    /// Eigenoptions and landmark exploration.
    Explore(Common),
    /// Place fields, grid fields and track skew.
    Neuro(Common),
    /// Behavioural experiments comparing agents.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Revaluation,
    Multitask,
    Navigation,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// JSON config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds, e.g. `1,2,10..20`; replaces the config's seeds.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
    /// Exit with status 3 when any check fails.
    #[arg(long)]
    check: bool,
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(name: &str, common: &Common) -> Result<bool> {
    let experiments = ExperimentRegistry::standard();
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => experiments.get(name)?.default_config(),
    };
    if cfg.experiment != name {
        return Err(HarnessError::config(format!("config is for '{}', not '{name}'", cfg.experiment)));
    }
    if let Some(s) = &common.seed {
        cfg.seeds = parse_seed_list(s)?;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    let mut report = experiments.run(&cfg, &AgentRegistry::standard())?;
    report.stamp();
    let format = match common.format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    match &cfg.out {
        Some(dir) => {
            for path in report.write(dir, format)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => match format {
            Format::Json => emit(&(report.to_json()? + "\n")),
            Format::Csv => {
                for t in &report.tables {
                    emit(&t.to_csv(&[("table".into(), t.name.clone())]));
                }
            }
        },
    }
    for c in &report.checks {
        eprintln!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Sr(c) => ("sr", c),
        Command::Sf(c) => ("sf", c),
        Command::Explore(c) => ("explore", c),
        Command::Neuro(c) => ("neuro", c),
        Command::Experiment { name, common } => (
            match name {
                ExperimentName::Revaluation => "revaluation",
                ExperimentName::Multitask => "multitask",
                ExperimentName::Navigation => "navigation",
                ExperimentName::Replay => "replay",
            },
            common,
        ),
    };
    match run(name, common) {
        Ok(passed) if !passed && common.check => ExitCode::from(3),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
