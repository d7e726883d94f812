use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use koopman_core::experiment::{self, with_workers};
use koopman_core::io::RunConfig;
use koopman_core::Error;

#[derive(Parser)]
#[command(name = "koopman", version, about = "Koopman spectra of measure-preserving flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum and mollified spectral density.
    Density(Common),
    /// Spectral projections onto the configured bands.
    Project(Common),
    /// Diagnostics along a refinement chain.
    Convergence(Common),
    /// Upwind scheme eigenvalues, closed form against DFT.
    Upwind(Common),
    /// Build, save and verify the permutation cache.
    Cache(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding `run.workers` (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Sampling seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (Command::Density(c)
    | Command::Project(c)
    | Command::Convergence(c)
    | Command::Upwind(c)
    | Command::Cache(c)) = &cli.command;
    let cfg = c.load()?;
    with_workers(cfg.workers, || match cli.command {
        Command::Density(_) => {
            let out = experiment::run_density(&cfg)?;
            info!("Parseval residual {:.3e}", out.spectrum.parseval_residual());
            report(&out.files);
            Ok(())
        }
        Command::Project(_) => {
            let out = experiment::run_projection(&cfg)?;
            report(&out.files);
            Ok(())
        }
        Command::Convergence(_) => {
            let rows = experiment::run_convergence(&cfg)?;
            for r in &rows {
                println!(
                    "level {}: q = {}, l/tau = {:.4e}, hausdorff = {:.4e}, parseval = {:.2e}",
                    r.level,
                    r.q,
                    r.l_over_tau(),
                    r.hausdorff_integral,
                    r.parseval_residual
                );
            }
            report(&[cfg.out_dir.join("convergence.csv")]);
            Ok(())
        }
        Command::Upwind(_) => {
            let rows = experiment::run_upwind(&cfg)?;
            for s in &rows {
                println!(
                    "gamma = {}, n = {}: max |analytic - numeric| = {:.3e}, max Re = {:.3e}",
                    s.gamma, s.n, s.max_deviation, s.max_re
                );
            }
            report(&[cfg.out_dir.join("eigenvalues.csv"), cfg.out_dir.join("upwind_summary.csv")]);
            Ok(())
        }
        Command::Cache(_) => {
            let path = experiment::run_cache(&cfg)?;
            report(&[path]);
            Ok(())
        }
    })?
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
