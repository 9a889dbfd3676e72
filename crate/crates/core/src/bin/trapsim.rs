use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use trapsim::engine::{run, run_paired, SimError};
use trapsim::report::{report_table4, PairedRun, PairedSummary, RunSummary};
use trapsim::scenario::{load_scenario, parse_duration, ModeName, Scenario};
use trapsim::sweep::{sweep, GridAxis};

#[derive(Parser)]
#[command(name = "trapsim", version, about = "Energy-aware backscatter network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run(Common),
    /// Run the coordinated and baseline protocols on the same energy trace.
    Paired {
        #[command(flatten)]
        common: Common,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Run a parameter grid, `--grid key=v1,v2` per axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        grid: Vec<GridAxis>,
        /// Seeds per grid cell.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Print the comparison table from paired summary files.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, env = "TRAPSIM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    mode: Option<ModeName>,
    /// Simulated time, e.g. `60m`.
    #[arg(long, value_parser = parse_duration)]
    duration: Option<std::time::Duration>,
    /// Write the event trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the summary JSON here instead of stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Scenario(String),
    Invariant(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) => Failure::Scenario(e.to_string()),
            SimError::Invariant(_) => Failure::Invariant(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let mut s = load_scenario(&common.scenario).map_err(|e| Failure::Scenario(e.to_string()))?;
    if let Some(mode) = common.mode {
        s.mode = mode;
    }
    if let Some(d) = common.duration {
        s.duration = d;
    }
    s.validate().map_err(|e| Failure::Scenario(e.to_string()))?;
    Ok(s)
}

fn write(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))
}

fn emit_summary(common: &Common, json: &str) -> Result<(), Failure> {
    match &common.summary {
        Some(p) => write(p, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

/// `out.csv` becomes `out.<tag>.csv`.
fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn note(common: &Common, msg: String) {
    if !common.quiet {
        eprintln!("{msg}");
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let scenario = load(&common)?;
            let out = run(&scenario, common.seed)?;
            if let Some(p) = &common.trace {
                write(p, out.trace.to_csv_string().as_bytes())?;
            }
            let m = &out.metrics;
            note(
                &common,
                format!(
                    "{} seed {}: {} transmissions, {} delivered, {:.3} p/min",
                    m.mode, out.seed, m.tx_actions, m.successful_receptions, m.throughput_per_min
                ),
            );
            let mut json = serde_json::to_string_pretty(&RunSummary::new(&scenario.name, &out)).expect("summary");
            json.push('\n');
            emit_summary(&common, &json)
        }
        Command::Paired { common, seeds } => {
            let scenario = load(&common)?;
            let outs = (common.seed..common.seed.saturating_add(seeds.max(1)))
                .into_par_iter()
                .map(|seed| run_paired(&scenario, seed))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(p) = &common.trace {
                for o in &outs {
                    let suffix = if outs.len() > 1 { format!("-{}", o.trap.seed) } else { String::new() };
                    write(&tagged(p, &format!("trap{suffix}")), o.trap.trace.to_csv_string().as_bytes())?;
                    write(&tagged(p, &format!("baseline{suffix}")), o.baseline.trace.to_csv_string().as_bytes())?;
                }
            }
            let summary = PairedSummary {
                scenario: scenario.name.clone(),
                runs: outs.iter().map(PairedRun::from).collect(),
            };
            note(&common, report_table4(&summary.runs));
            emit_summary(&common, &summary.to_json())
        }
        Command::Sweep { common, grid, seeds } => {
            let scenario = load(&common)?;
            let table = sweep(&scenario, &grid, seeds)?;
            note(&common, table.render());
            emit_summary(&common, &table.to_json())
        }
        Command::Report { summaries } => {
            let mut runs = Vec::new();
            for p in &summaries {
                runs.extend(PairedSummary::load(p).map_err(Failure::Scenario)?.runs);
            }
            runs.sort_by_key(|r| r.seed);
            print!("{}", report_table4(&runs));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
