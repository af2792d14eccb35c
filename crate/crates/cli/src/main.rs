use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use drpi::controller::Scheme;
use drpi::harness::{run_experiment, run_sweep, ExperimentConfig};
use drpi::uncertainty::{coverage_lower_bound, gamma_for_confidence};

#[derive(Parser)]
#[command(name = "drpi", version, about = "Distributionally robust path integral control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Drpi,
    Pic,
    Both,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config file (flat `section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.episodes`.
    #[arg(long)]
    episodes: Option<usize>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.workers`.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run DRPI and/or PIC episodes and write summary.json and episodes.csv.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Also write `<scheme>/traj_<episode>.csv`.
        #[arg(long)]
        save_trajectories: bool,
    },
    /// Run DRPI with each fixed radius and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated radii, e.g. `0,0.1,1`.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
    },
    /// Print the finite-sample radius and its coverage bound.
    Bound {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
    },
}

fn load(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&run.config)
        .with_context(|| format!("loading {}", run.config.display()))?;
    if let Some(e) = run.episodes {
        cfg.episodes = e;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(out) = &run.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = run.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            run,
            scheme,
            save_trajectories,
        } => {
            let mut cfg = load(&run)?;
            match scheme {
                Some(SchemeArg::Drpi) => cfg.schemes = vec![Scheme::Drpi],
                Some(SchemeArg::Pic) => cfg.schemes = vec![Scheme::Pic],
                Some(SchemeArg::Both) => cfg.schemes = vec![Scheme::Drpi, Scheme::Pic],
                None => {}
            }
            cfg.save_trajectories |= save_trajectories;
            let summary = run_experiment(&cfg)?;
            print!("{}", summary.to_json());
        }
        Command::Sweep { run, gamma } => {
            if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
                bail!("--gamma values must be finite and nonnegative");
            }
            let cfg = load(&run)?;
            for (g, s) in run_sweep(&cfg, &gamma)? {
                let mean = s.arrive_mean().map_or("null".to_string(), |m| m.to_string());
                println!("gamma={g} success_rate={} arrive_mean={mean}", s.success_rate);
            }
        }
        Command::Bound { p, n, eps } => {
            let gamma = gamma_for_confidence(p, n, eps)?;
            println!("gamma = {gamma}");
            println!("coverage_lower_bound = {}", coverage_lower_bound(gamma, n, p));
        }
    }
    Ok(())
}
