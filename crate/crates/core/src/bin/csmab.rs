use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairbandit::config::ExperimentConfig;
use fairbandit::error::Error;
use fairbandit::experiment::{
    bounds_csv, horizon_grid, read_regret_curve, resolve_instance, run_bounds, run_experiment, write_report,
};
use fairbandit::ingest::{build_trace, load_ratings, DEFAULT_MOVIE_IDS};
use fairbandit::lp::build_lp;
use fairbandit::policy::PolicyKind;

#[derive(Parser)]
#[command(name = "csmab", version, about = "Fairness-constrained combinatorial sleeping bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic (or trace-backed) experiment and write CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the closed-form regret bounds over a horizon grid.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        tmin: u64,
        #[arg(long, default_value_t = 1_000_000)]
        tmax: u64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Regret CSV from `run`; its tscsf-b mean curve fills `empirical_regret`.
        #[arg(long)]
        empirical: Option<PathBuf>,
        /// Output file (default: bounds.csv in the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear program utilities.
    Lp {
        #[command(subcommand)]
        command: LpCommand,
    },
    /// Convert a MovieLens ratings.csv into a replay trace.
    Ingest {
        #[arg(long)]
        ratings: PathBuf,
        /// MovieLens movie ids, one arm each (default: the five ML-20M titles).
        #[arg(long, num_args = 1..)]
        movies: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment over a recorded trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LpCommand {
    /// Print the benchmark LP tableau.
    Dump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible { .. } => 3,
        Error::Io { .. } => 4,
        _ => 2,
    }
}

fn load_config(
    path: &Path,
    trace: Option<PathBuf>,
    reps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load_with_trace(path, trace)?;
    if let Some(r) = reps {
        if r == 0 {
            return Err(Error::Config("--reps must be >= 1".into()));
        }
        cfg.experiment.replications = r;
    }
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    if let Some(o) = out {
        cfg.experiment.output_dir = o;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run_and_write(cfg: &ExperimentConfig) -> Result<(), Error> {
    let report = run_experiment(cfg)?;
    let files = write_report(&report, &cfg.experiment.output_dir)?;
    eprintln!("benchmark value {:.6}", report.benchmark_value);
    for eta in &report.etas {
        for p in &eta.policies {
            let unmet = p.fairness.iter().filter(|f| !f.satisfied).count();
            eprintln!(
                "eta={:<10} {:<8} final regret {:+.5}  final reward {:.5}  unmet fairness {}",
                eta.eta.label(),
                p.kind,
                p.final_regret(),
                p.final_reward(),
                unmet
            );
        }
    }
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, reps, seed, out } => {
            let cfg = load_config(&config, None, reps, seed, out)?;
            run_and_write(&cfg)
        }
        Command::Replay { trace, config, reps, seed, out } => {
            let cfg = load_config(&config, Some(trace), reps, seed, out)?;
            run_and_write(&cfg)
        }
        Command::Bounds { config, tmin, tmax, points, empirical, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = horizon_grid(tmin, tmax, points)?;
            let curve = empirical.map(|p| read_regret_curve(&p, PolicyKind::TscsfB)).transpose()?;
            let rows = run_bounds(&cfg, &grid, curve.as_deref())?;
            let path = out.unwrap_or_else(|| cfg.experiment.output_dir.join("bounds.csv"));
            write(&path, &bounds_csv(&rows))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Lp { command: LpCommand::Dump { config, out } } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (instance, _) = resolve_instance(&cfg)?;
            let text = build_lp(&instance)?.dump();
            match out {
                Some(path) => write(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Ingest { ratings, movies, out } => {
            let movies = movies.unwrap_or_else(|| DEFAULT_MOVIE_IDS.to_vec());
            let records = load_ratings(&ratings, &movies)?;
            let trace = build_trace(&records, &movies)?;
            write(&out, &trace.to_text())?;
            eprintln!("{} rounds over {} movies", trace.len(), movies.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
