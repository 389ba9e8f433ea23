//! `landau`: batch experiments on the Landau coefficient bounds.
//!
//! Exit status 0 when every check passes, 1 when checks ran and failed,
//! 2 on configuration or usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "landau", version, about = "Landau coefficient, bound and blow-up experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default out/<name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 gives serial, reproducible reductions.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random bump placement.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the field, its coefficients and their spectra as CSV.
    Coeffs,
    /// Check the thick-set, diffusion and reaction bounds and the divergence identity.
    Verify,
    /// Run the solver against the fitted decay envelope.
    Evolve,
    /// Calibrate and check the self-similar blow-up family.
    Counterexample,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Coeffs => "coeffs",
            Self::Verify => "verify",
            Self::Evolve => "evolve",
            Self::Counterexample => "counterexample",
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("")?,
    };
    cfg.seed = cli.seed;
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(n) = cfg.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    let out = commands::output_dir(&cfg);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let outcome = match cli.command {
        Command::Coeffs => commands::coeffs(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out),
        Command::Evolve => commands::evolve_cmd(&cfg, &out),
        Command::Counterexample => commands::counterexample(&cfg, &out),
    };
    let (pass, outputs) = match &outcome {
        Ok(r) => (r.pass, r.outputs.clone()),
        Err(_) => (false, Vec::new()),
    };
    commands::write_manifest(&out, cli.command.name(), &cfg, &outputs, pass)?;
    outcome.map(|r| r.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: checks failed", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
