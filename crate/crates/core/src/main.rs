use clap::{Parser, Subcommand};
use csubbt::harness::{
    emit_report, load_scenarios, reactivity_csv, report_csv, run_batch, run_reactivity, run_scenario_file,
    ExecutorKind, HarnessError, DEFAULT_MAX_TICKS, REACTIVITY_EXECUTORS,
};
use csubbt::sim::Scenario;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "csubbt", version, about = "Run conditional-subtree executors on simulated pick scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario once and print its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Placement seed; defaults to the scenario's `seed_default`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "csubbt")]
        executor: ExecutorKind,
        /// Write the trace here and the event log to `<path>.events`.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_TICKS)]
        max_ticks: u64,
    },
    /// Run every scenario in a directory over consecutive seeds.
    Batch {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, default_value = "csubbt")]
        executor: ExecutorKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_TICKS)]
        max_ticks: u64,
    },
    /// Compare executors on stationary-base problems with 1..=targets cubes.
    Reactivity {
        #[arg(long, default_value_t = 5)]
        targets: usize,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            scenario,
            seed,
            executor,
            trace,
            max_ticks,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => Scenario::load(&scenario)?.seed_default,
            };
            let out = run_scenario_file(&scenario, seed, executor, max_ticks, trace.as_deref())?;
            print!("{}", report_csv(std::slice::from_ref(&out.report))?);
        }
        Command::Batch {
            scenarios,
            trials,
            seed_base,
            executor,
            out,
            max_ticks,
        } => {
            let scenarios = load_scenarios(&scenarios)?;
            let reports = run_batch(&scenarios, trials, seed_base, executor, max_ticks);
            let (table, csv) = emit_report(&reports)?;
            write(&out, &csv)?;
            print!("{table}");
        }
        Command::Reactivity { targets, trials, out } => {
            let (rows, _) = run_reactivity(targets, trials, &REACTIVITY_EXECUTORS)?;
            let csv = reactivity_csv(&rows)?;
            write(&out, &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}
