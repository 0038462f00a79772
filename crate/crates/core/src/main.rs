use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hydroscale::harness::{
    convergence_report_to_files, write_equilibrium, write_ordering, Experiment, ExperimentConfig,
};
use hydroscale::Error;

#[derive(Parser)]
#[command(name = "hydroscale", version, about = "Hydrodynamic-limit experiments for long-range particle systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate `λ, Φ, Ψ, ΦΨ` against density.
    Equilibrium(Common),
    /// Run the particle ensemble and write block-averaged snapshots.
    Simulate(Common),
    /// Solve the macroscopic equation at the snapshot times.
    Solve(Common),
    /// Ensemble against solver: L1 table, snapshots, manifest.
    Compare(Common),
    /// Ordering experiment for the coupled pair.
    Coupling(Common),
}

fn run(cli: Cli) -> hydroscale::Result<()> {
    let (name, common) = match &cli.command {
        Command::Equilibrium(c) => ("equilibrium", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Solve(c) => ("solve", c),
        Command::Compare(c) => ("compare", c),
        Command::Coupling(c) => ("coupling", c),
    };
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    let dir = cfg.out.clone();
    let exp = Experiment::new(cfg)?;
    match cli.command {
        Command::Equilibrium(_) => write_equilibrium(&dir, &exp.equilibrium_rows(), &exp.manifest(name)),
        Command::Simulate(_) => {
            let ensemble = exp.run_ensemble()?;
            let mut manifest = exp.manifest(name);
            manifest.events = ensemble.events.clone();
            let mut report = hydroscale::harness::ConvergenceReport::empty(manifest);
            report.ensemble = Some(ensemble);
            convergence_report_to_files(&report, &dir)
        }
        Command::Solve(_) => {
            let solution = exp.solve()?;
            let mut manifest = exp.manifest(name);
            manifest.solver = Some(solution.stats.clone());
            let mut report = hydroscale::harness::ConvergenceReport::empty(manifest);
            report.solution = Some(solution);
            convergence_report_to_files(&report, &dir)
        }
        Command::Compare(_) => {
            let report = exp.compare()?;
            convergence_report_to_files(&report, &dir)?;
            for r in &report.rows {
                println!("N={} t={} l1={:.6} ± {:.6}", r.n, r.t, r.l1, r.l1_stderr);
            }
            Ok(())
        }
        Command::Coupling(_) => {
            let rows = exp.ordering()?;
            for r in &rows {
                println!("N={} d={:?} unordered={:.6e} ± {:.6e}", r.n, r.d, r.unordered_time_integral, r.stderr);
            }
            write_ordering(&dir, &rows, &exp.manifest(name))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hydroscale: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Stability(_) | Error::Budget { .. } => 3,
                _ => 1,
            })
        }
    }
}
