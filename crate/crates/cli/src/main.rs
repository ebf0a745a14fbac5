use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bethe_cli::{
    parse_config, run_experiment, write_report, ExperimentConfig, ExperimentKind, PotentialSpec,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bethe",
    version,
    about = "Spectral experiments for Schrödinger operators on the binary tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier, combined, trace, entropy and boundary identities
    Verify(Common),
    /// Discrete eigenvalues against the truncation oracle
    Eig(Common),
    /// The shell-weighted ledger inequality for V(0), ..., V(N)
    Ledger(Common),
    /// Jost vector entries against determinant ratios
    Jost(Common),
    /// Radial potentials against the half-line Jacobi matrix
    Radial(Common),
    /// The quadratic form built from a band polynomial
    Conjecture(Common),
    /// Hypothesis sums and ledger trends as the truncation grows
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.csv and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Identity tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the default random potential and sampled points
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on quadrature nodes around the circle
    #[arg(long)]
    theta_max_nodes: Option<usize>,
}

fn configure(kind: ExperimentKind, args: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(k) = cfg.experiment.filter(|k| *k != kind) {
        anyhow::bail!("configuration selects {k:?} but the subcommand runs {kind:?}");
    }
    cfg.experiment = Some(kind);
    if let Some(t) = args.tol {
        cfg.tolerances.identity = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        if let Some(PotentialSpec::Random(r)) = &mut cfg.potential {
            r.seed = s;
        }
    }
    if let Some(m) = args.theta_max_nodes {
        cfg.grids.theta_max_nodes = m;
        cfg.grids.theta_initial_nodes = cfg.grids.theta_initial_nodes.min(m);
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (kind, args) = match &cli.command {
        Command::Verify(a) => (ExperimentKind::IdentitySuite, a),
        Command::Eig(a) => (ExperimentKind::Eigenvalues, a),
        Command::Ledger(a) => (ExperimentKind::LedgerInequality, a),
        Command::Jost(a) => (ExperimentKind::MainLemma, a),
        Command::Radial(a) => (ExperimentKind::RadialCompare, a),
        Command::Conjecture(a) => (ExperimentKind::ConjectureForm, a),
        Command::Scan(a) => (ExperimentKind::HypothesisScan, a),
    };
    let cfg = configure(kind, args)?;
    let report = run_experiment(&cfg)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    write_report(&report, &dir)?;
    let s = &report.summary;
    println!(
        "{} rows, {} warnings, {} failures; reports in {}",
        s.rows,
        s.warnings.len(),
        s.failures.len(),
        dir.display()
    );
    for f in &s.failures {
        eprintln!("tolerance failure: {f}");
    }
    Ok(s.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
