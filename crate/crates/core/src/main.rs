use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shiftcocycle::experiments::{run, Command, ExperimentConfig, Format};
use shiftcocycle::{Error, Result};

/// Experiments for SL(2,R) cocycles over the Bernoulli shift.
#[derive(Parser)]
#[command(name = "shiftcocycle", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lyapunov exponents: closed form vs Monte Carlo, induced estimates for B_k and L_k.
    Exponent(Common),
    /// Exact distances ‖B_k − A_{σ1}‖ and ‖L_k − A_{σ1}‖ against the analytic bounds.
    NormSweep(Common),
    /// A_{ση} around η = 1: exponent, critical weight, hyperbolicity and distance to A_{σ1}.
    Boundary(Common),
    /// Exchange angles of B_k^k and L_k^{2k+1}, or the fiber-bunching grid.
    Exchange(Common),
    /// c_j / m_j decay tables and the Abramov check.
    Induced(Common),
    /// Return-time statistics against Kac's formula.
    Kac(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output file; a `.summary.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest time searched for returns.
    #[arg(long)]
    cap: Option<u64>,
    /// JSON cocycle file (custom exponent scenario).
    #[arg(long)]
    cocycle: Option<PathBuf>,
}

fn execute(cmd: Command, args: &Common) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &args.scenario {
        cfg.scenario = Some(s.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(c) = args.cap {
        cfg.cap = c;
    }
    if let Some(c) = &args.cocycle {
        cfg.cocycle_file = Some(c.clone());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let report = pool.install(|| run(cmd, &cfg))?;
    match &cfg.out {
        Some(path) => report.write(path, cfg.format)?,
        None => std::io::stdout().write_all(report.render(cfg.format)?.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Exponent(a) => (Command::Exponent, a),
        Cmd::NormSweep(a) => (Command::NormSweep, a),
        Cmd::Boundary(a) => (Command::Boundary, a),
        Cmd::Exchange(a) => (Command::Exchange, a),
        Cmd::Induced(a) => (Command::Induced, a),
        Cmd::Kac(a) => (Command::Kac, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
