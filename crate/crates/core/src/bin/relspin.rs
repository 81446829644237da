//! `relspin` command-line interface.
//!
//! Exit codes: 0 pass, 1 scientific check failure or aborted run, 2 usage or
//! configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use relspin::app::{self, OperatorsOutcome, OPERATORS_SCHEMA};
use relspin::grid::write_field;
use relspin::operators::{operator_suite, PhysParams, MOMENTUM_SEED};
use relspin::scenario;
use relspin::{Error, Result};

#[derive(Parser)]
#[command(name = "relspin", version, about = "Relativistic spin-operator laboratory")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "RELSPIN_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the FW and Pryce operators are proper spin operators and
    /// that Σ/2 fails the free commutation exactly as predicted.
    CheckOperators {
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        /// Largest sampled |p| (units of m0·c).
        #[arg(long, default_value_t = 3.0, value_parser = positive)]
        pmax: f64,
        #[arg(long, default_value_t = MOMENTUM_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Verify the spin equations of motion for the scenario's Hamiltonian.
    VerifyDynamics {
        #[arg(long)]
        scenario: PathBuf,
        /// Run the grid-refinement study and classify each term.
        #[arg(long)]
        refine: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Propagate the initial state and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// CSV destination (overrides output.trajectory; default stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the scenario over a ladder of field strengths and write the spin
    /// divergence metrics as CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated |B0| values in the scenario's units.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        field_grid: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be finite and > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| Error::config("output", format!("cannot create {}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &impl serde::Serialize, path: Option<&Path>) -> Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Ok(true) on pass, Ok(false) on a scientific failure.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::CheckOperators { samples, pmax, seed, format } => {
            let suite = operator_suite(samples as usize, pmax, seed, &PhysParams::electron_scaled())?;
            let passed = suite.passed;
            match format {
                Format::Table => print!("{}", app::operators_table(&suite)),
                Format::Json => write_json(&OperatorsOutcome { schema: OPERATORS_SCHEMA, suite }, None)?,
            }
            Ok(passed)
        }
        Command::VerifyDynamics { scenario, refine, format } => {
            let resolved = scenario::load(&scenario)?;
            let outcome = app::verify_dynamics(&resolved, refine)?;
            if let Some(p) = &resolved.output.report {
                write_json(&outcome, Some(p))?;
            }
            match format {
                Format::Table => print!("{}", app::verify_table(&outcome)),
                Format::Json => write_json(&outcome, None)?,
            }
            for e in outcome.equations.iter().filter(|e| !e.passed()) {
                if !e.classification.is_acceptable() {
                    eprintln!(
                        "{}: {} mismatch; offending printed terms: {}",
                        e.equation.name(),
                        e.classification,
                        e.offending_terms.join(", ")
                    );
                }
                if !e.total_j_passed {
                    eprintln!("{}: total angular momentum identity failed ({:?})", e.equation.name(), e.total_j);
                }
            }
            Ok(outcome.passed)
        }
        Command::Simulate { scenario, output } => {
            let resolved = scenario::load(&scenario)?;
            let (traj, last) = app::simulate(&resolved)?;
            let dest = output.or_else(|| resolved.output.trajectory.clone());
            let mut w = open(dest.as_deref())?;
            traj.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = &resolved.output.final_state {
                let f = File::create(p).map_err(|e| Error::config("output.final_state", format!("cannot create {}: {e}", p.display())))?;
                write_field(&last, BufWriter::new(f))?;
            }
            if let Some(p) = &resolved.output.report {
                write_json(&traj, Some(p))?;
            }
            Ok(true)
        }
        Command::Sweep { scenario, field_grid, output } => {
            let resolved = scenario::load(&scenario)?;
            let strengths: Vec<f64> = field_grid.iter().map(|b| b * resolved.scales.magnetic).collect();
            let rows = app::sweep(&resolved, &strengths)?;
            let dest = output.or_else(|| resolved.output.trajectory.clone());
            let mut w = open(dest.as_deref())?;
            app::write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
