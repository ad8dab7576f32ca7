use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use extrastep_cli::commands::parse_axis_flag;
use extrastep_cli::{cmd_gen, cmd_report, cmd_run, cmd_sweep, cmd_verify, load_config, CliError, CliResult};

#[derive(Parser)]
#[command(name = "extrastep", version, about = "Extra-step solvers for variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured problem and print its parameters and constants.
    Gen {
        config: PathBuf,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one solver configuration and write its trace.
    Run {
        config: PathBuf,
        /// Trace path; overrides `output.trace`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every estimator × seed × step-multiplier combination.
    Sweep {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Check unbiasedness and the variance bounds of the configured estimators.
    Verify {
        config: PathBuf,
        /// Report CSV path; overrides `output.report`. Standard output if neither is set.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rebuild comparison.csv and aggregate.csv from a directory of traces.
    Report {
        dir: PathBuf,
        /// Budget axis: auto, full_calls, comp_calls, coords, bits, comms, local_steps or oracle.
        #[arg(long, default_value = "auto")]
        axis: String,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { config, out } => {
            let text = cmd_gen(&load_config(&config)?)?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| CliError::io(path.display().to_string(), e))?,
                None => print!("{text}"),
            }
        }
        Command::Run { config, out } => {
            let s = cmd_run(&load_config(&config)?, out.as_deref())?;
            println!("{} rows={} trace={}", s.line, s.rows, s.path.display());
        }
        Command::Sweep { config, dir } => {
            let s = cmd_sweep(&load_config(&config)?, dir.as_deref())?;
            for r in &s.runs {
                println!("{}", r.line);
            }
            println!(
                "{} traces, axis {}: {} {}",
                s.report.traces,
                s.report.axis.as_str(),
                s.report.comparison.display(),
                s.report.aggregate.display()
            );
        }
        Command::Verify { config, report } => {
            let c = load_config(&config)?;
            let outcome = cmd_verify(&c)?;
            print!("{}", outcome.summary());
            let csv = outcome.to_csv();
            match report.or_else(|| c.output.report.as_ref().map(PathBuf::from)) {
                Some(path) => std::fs::write(&path, csv).map_err(|e| CliError::io(path.display().to_string(), e))?,
                None => print!("{csv}"),
            }
            if !outcome.success() {
                return Err(CliError::Verification(
                    "a check failed or a negative control passed; see the report".into(),
                ));
            }
        }
        Command::Report { dir, axis } => {
            let s = cmd_report(&dir, parse_axis_flag(&axis)?)?;
            println!(
                "{} traces, axis {}: {} {}",
                s.traces,
                s.axis.as_str(),
                s.comparison.display(),
                s.aggregate.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
