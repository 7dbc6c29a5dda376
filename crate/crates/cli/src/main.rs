use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use petkin::imaging::SolverKind;
use petkin_cli::{cmd_evaluate, cmd_fit, cmd_render, cmd_simulate, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "petkin",
    version,
    about = "Pixel-wise kinetic parameter estimation for dynamic PET"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Experiment directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_solver)]
    solver: Option<SolverKind>,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Phantom side length in pixels.
    #[arg(long, global = true)]
    side: Option<usize>,
    /// Relative input-function noise applied when fitting, e.g. 0.10.
    #[arg(long, global = true)]
    if_noise: Option<f64>,
    /// Number of noisy replicates to simulate.
    #[arg(long, global = true)]
    replicates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the noise-free reference and the noisy replicate datasets.
    Simulate,
    /// Fit parametric maps to every dataset.
    Fit,
    /// Compare fitted maps with the ground truth (evaluation.csv, rmse.csv, report.txt).
    Evaluate,
    /// Render maps and last frames as PNG.
    Render,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: petkin::Error| e.to_string())
}

fn load_config(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(solver) = c.solver {
        cfg.fit.solver = solver;
    }
    if let Some(side) = c.side {
        cfg.phantom.side = side;
    }
    if let Some(level) = c.if_noise {
        cfg.input.perturbation = level;
    }
    if let Some(n) = c.replicates {
        cfg.noise.replicates = n;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `out`".into()))?;
    cfg.validate()?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, out) = load_config(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &out),
        Command::Fit => {
            let result = cmd_fit(&cfg, &out);
            if let Ok(r) = &result {
                println!(
                    "{}: {} datasets, {} pixels fitted, {} stalled, solver time {:.3} s, mean {:.1} us/pixel",
                    r.method,
                    r.datasets,
                    r.fitted,
                    r.stalled,
                    r.solver_time.as_secs_f64(),
                    r.mean_pixel_time().as_secs_f64() * 1e6
                );
            }
            result.map(|_| ())
        }
        Command::Evaluate => {
            let evals = cmd_evaluate(&out)?;
            print!("{}", petkin_cli::report::text_report(&evals));
            Ok(())
        }
        Command::Render => cmd_render(&cfg, &out),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("petkin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
