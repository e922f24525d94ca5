use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use clap::{Parser, Subcommand};
use leadcons::commands::{self, CommandOutput, SimulateOptions, SynthOptions};
use leadcons::{AppError, Scenario};

/// Leader-following consensus and distributed observers over switching
/// networks.
#[derive(Debug, Parser)]
#[command(name = "leadcons", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "leadcons-out")]
    out: PathBuf,
    /// Exit with status 1 when a certificate is not obtained.
    #[arg(long, global = true)]
    strict: bool,
    /// Also integrate with RK4 and report the deviation from the exact
    /// solution.
    #[arg(long = "cross-check", global = true)]
    cross_check: bool,
    /// Scenario files processed in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check connectivity windows, dwell time and plant rank conditions.
    Validate { scenarios: Vec<PathBuf> },
    /// Print the instability budget, margin and window product norms.
    Delta { scenarios: Vec<PathBuf> },
    /// Design K and/or L and the convergence certificate.
    Synth { scenarios: Vec<PathBuf> },
    /// Simulate, write CSV and SVG, and fit the decay rate.
    Simulate { scenarios: Vec<PathBuf> },
    /// Run the bundled eight-follower example end to end.
    ReproExample,
}

fn run_one(cli: &Cli, path: &Path) -> Result<CommandOutput, AppError> {
    let scenario = Scenario::load(path)?;
    match &cli.command {
        Command::Validate { .. } => Ok(commands::validate(&scenario)),
        Command::Delta { .. } => commands::delta(&scenario),
        Command::Synth { .. } => commands::synth(&scenario, &SynthOptions { out: cli.out.clone(), strict: cli.strict }),
        Command::Simulate { .. } => commands::simulate(
            &scenario,
            &SimulateOptions { out: cli.out.clone(), cross_check: cli.cross_check, error_plot: true },
        ),
        Command::ReproExample => unreachable!("handled without a scenario file"),
    }
}

fn report(result: Result<CommandOutput, AppError>, label: Option<&Path>) -> i32 {
    if let Some(p) = label {
        println!("== {}", p.display());
    }
    match result {
        Ok(out) => {
            print!("{}", out.text);
            out.status.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let paths = match &cli.command {
        Command::ReproExample => {
            let code = report(commands::repro_example(&cli.out), None);
            return ExitCode::from(code as u8);
        }
        Command::Validate { scenarios }
        | Command::Delta { scenarios }
        | Command::Synth { scenarios }
        | Command::Simulate { scenarios } => scenarios.clone(),
    };
    if paths.is_empty() {
        eprintln!("error: no scenario files given");
        return ExitCode::from(2);
    }

    // results are collected per index and printed in input order
    let jobs = cli.jobs.clamp(1, paths.len());
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Result<CommandOutput, AppError>>> = (0..paths.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        let Some(path) = paths.get(k) else { break };
                        done.push((k, run_one(&cli, path)));
                    }
                    done
                })
            })
            .collect();
        for w in workers {
            for (k, r) in w.join().expect("worker thread panicked") {
                results[k] = Some(r);
            }
        }
    });

    let label = paths.len() > 1;
    let mut code = 0;
    for (path, result) in paths.iter().zip(results) {
        let result = result.expect("every scenario was processed");
        code = code.max(report(result, label.then_some(path.as_path())));
    }
    ExitCode::from(code as u8)
}
