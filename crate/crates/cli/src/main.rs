//! Command-line runner for the unfitted interface-problem solver.

mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cutfem",
    about = "Unfitted Nitsche solver for 2D elliptic interface problems with gradient recovery",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Experiment name: ex51a..ex51d, ex52, ex53, ex54, ex55, custom
    #[arg(long)]
    example: Option<String>,
    /// Flat key=value config file (flags override file entries)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Solver iteration cap (default 20 sqrt(n))
    #[arg(long)]
    maxit: Option<usize>,
    /// Coarsest uniform grid count (h = 2/n0)
    #[arg(long)]
    n0: Option<usize>,
    /// Curvature safety factor for adaptive initial meshes
    #[arg(long)]
    theta: Option<f64>,
    /// Budget for adaptive initial-mesh refinement
    #[arg(long)]
    max_levels: Option<usize>,
    /// Sub-chords per cut element in error integration
    #[arg(long)]
    subdivisions: Option<usize>,
    /// Write per-level nodal solution / recovered-gradient files
    #[arg(long)]
    emit_fields: bool,
    /// Use the literal q-penalty scaling (no h^-1)
    #[arg(long)]
    q_literal: bool,
    /// Skip the interface-resolution audit
    #[arg(long)]
    allow_unresolved: bool,
    /// Polyline samples for parametric interfaces
    #[arg(long)]
    interface_samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a single mesh and print the error norms
    Solve(CommonOpts),
    /// Run a convergence study and write the CSV / text tables
    Study {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of refinement levels
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Generate and dump the curvature-adapted initial mesh
    Mesh(CommonOpts),
    /// Audit the interface resolution on a uniform mesh
    Check(CommonOpts),
}

fn build_config(common: &CommonOpts, levels: Option<usize>) -> Result<ExperimentConfig, run::RunError> {
    let example = common.example.as_deref().unwrap_or("ex51a");
    let mut cfg = ExperimentConfig::default_for(example)
        .map_err(|e| run::RunError::Config(e.message))?;
    if let Some(path) = &common.config {
        cfg.apply_file(path)
            .map_err(|e| run::RunError::Config(e.message))?;
        // the file may set `example`; an explicit flag still wins
        if let Some(example) = &common.example {
            if *example != cfg.example {
                let keep_out = cfg.output_dir.clone();
                cfg = ExperimentConfig::default_for(example)
                    .map_err(|e| run::RunError::Config(e.message))?;
                cfg.output_dir = keep_out;
                cfg.apply_file(path)
                    .map_err(|e| run::RunError::Config(e.message))?;
                cfg.example = example.clone();
            }
        }
    }
    if let Some(v) = levels {
        cfg.levels = v;
    }
    if let Some(v) = &common.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = common.tol {
        cfg.solver_tol = v;
    }
    if let Some(v) = common.maxit {
        cfg.solver_maxit = v;
    }
    if let Some(v) = common.n0 {
        cfg.n0 = v;
    }
    if let Some(v) = common.theta {
        cfg.theta = v;
    }
    if let Some(v) = common.max_levels {
        cfg.max_levels = v;
    }
    if let Some(v) = common.subdivisions {
        cfg.curved_subdivisions = v;
    }
    if let Some(v) = common.interface_samples {
        cfg.interface_samples = v;
    }
    if common.emit_fields {
        cfg.emit_fields = true;
    }
    if common.q_literal {
        cfg.q_penalty_scaling = config::QPenaltyMode::PaperLiteral;
    }
    if common.allow_unresolved {
        cfg.allow_unresolved = true;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), run::RunError> {
    match cli.command {
        Command::Solve(common) => {
            let cfg = build_config(&common, None)?;
            run::solve_once(&cfg)
        }
        Command::Study { common, levels } => {
            let cfg = build_config(&common, levels)?;
            let report = run::run(&cfg)?;
            let mut table = Vec::new();
            report.write_table(&mut table).map_err(run::RunError::Io)?;
            print!("{}", String::from_utf8_lossy(&table));
            println!(
                "tables written to {}/{}_table.{{csv,txt}}",
                cfg.output_dir.display(),
                cfg.example
            );
            Ok(())
        }
        Command::Mesh(common) => {
            let cfg = build_config(&common, None)?;
            run::emit_mesh(&cfg).map(|_| ())
        }
        Command::Check(common) => {
            let cfg = build_config(&common, None)?;
            run::check(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
