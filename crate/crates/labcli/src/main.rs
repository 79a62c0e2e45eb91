//! `lab`: validate scenarios, run experiments and print reports.
//!
//! Exit codes: 0 when every criterion passes, 1 on a criterion failure,
//! 2 on a validation or solver error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fiblab_cli::report::Report;
use fiblab_cli::{converge, run_experiment, write_outputs, Experiment, Scenario, Verdict};

#[derive(Parser)]
#[command(name = "lab", version, about = "Run fibration gauge-theory experiments from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and list every violated invariant.
    Validate { config: PathBuf },
    /// Run one experiment and write its JSON report, CSV tables and plots.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        experiment: Experiment,
        /// Use this single fiber area instead of the scenario's list.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value = "lab-out")]
        out: PathBuf,
    },
    /// Rerun an experiment's error quantities at three dyadic resolutions and fit orders.
    Converge {
        config: PathBuf,
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, default_value = "lab-out")]
        out: PathBuf,
    },
    /// Pretty-print every report in a directory.
    Report { dir: PathBuf },
}

fn load(config: &Path) -> Result<Scenario> {
    let s = Scenario::load(config)?;
    Ok(s.validated()?)
}

fn emit(report: &Report, out: &Path, stem: &str) -> Result<Verdict> {
    let paths = write_outputs(report, out, stem)?;
    print!("{}", report.pretty());
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(report.verdict())
}

fn run(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::Validate { config } => {
            let s = Scenario::load(&config)?;
            let issues = s.validate();
            if issues.is_empty() {
                println!("{}: valid", config.display());
                Ok(Verdict::Pass)
            } else {
                for i in &issues {
                    eprintln!("{}: {i}", config.display());
                }
                Ok(Verdict::SolverError)
            }
        }
        Command::Run { config, experiment, t, out } => {
            let s = load(&config)?;
            let report = run_experiment(&s, experiment, t)?;
            emit(&report, &out, experiment.name())
        }
        Command::Converge { config, experiment, out } => {
            let s = load(&config)?;
            let report = converge(&s, experiment)?;
            emit(&report, &out, &format!("converge-{}", experiment.name()))
        }
        Command::Report { dir } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .with_context(|| format!("cannot list {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            if files.is_empty() {
                anyhow::bail!("no reports in {}", dir.display());
            }
            let mut verdict = Verdict::Pass;
            for f in files {
                let report = Report::read(&f)?;
                println!("== {}", f.display());
                print!("{}", report.pretty());
                verdict = match (verdict, report.verdict()) {
                    (Verdict::SolverError, _) | (_, Verdict::SolverError) => Verdict::SolverError,
                    (Verdict::CriterionFailure, _) | (_, Verdict::CriterionFailure) => Verdict::CriterionFailure,
                    _ => Verdict::Pass,
                };
            }
            Ok(verdict)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => ExitCode::from(v.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
