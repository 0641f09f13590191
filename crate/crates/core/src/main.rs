use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use payoff_nash::games::Game;
use payoff_nash::harness::config::load_game_spec;
use payoff_nash::harness::{
    export_csv, fit_rate, read_csv, run_diagnostics, run_experiment, ExperimentConfig, TailWindow,
};
use payoff_nash::solvers::solve_ne;
use payoff_nash::{Error, Result};

#[derive(Parser)]
#[command(name = "payoff-nash", version, about = "Payoff-based Nash equilibrium learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write the aggregated table as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit the log-log convergence slope of a CSV table.
    Rates {
        #[arg(long)]
        csv: PathBuf,
        /// Fit over the last k decades of t (default 1).
        #[arg(long, conflicts_with = "tail_fraction")]
        decades: Option<f64>,
        /// Fit over the last fraction of the log t range.
        #[arg(long)]
        tail_fraction: Option<f64>,
    },
    /// Run the estimator probe grid on the configured game.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Solve for the Nash equilibrium of the configured game.
    SolveNe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            runs,
            horizon,
            out,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.horizon = horizon.unwrap_or(cfg.horizon);
            cfg.workers = workers.or(cfg.workers);
            let out = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::Config("no output path: set `output` or pass --out".into()))?;
            cfg.validate()?;
            let result = run_experiment(&cfg)?;
            export_csv(&result.rows, &out)?;
            let meta = meta_path(&out);
            let meta_json = serde_json::to_string_pretty(&result.metadata).expect("serializable");
            std::fs::write(&meta, meta_json + "\n").map_err(|e| Error::Io { path: meta.clone(), source: e })?;
            print_json(&json!({
                "csv": out,
                "metadata": meta,
                "rows": result.rows.len(),
                "final": result.rows.last(),
            }));
        }
        Command::Rates {
            csv,
            decades,
            tail_fraction,
        } => {
            let rows = read_csv(&csv)?;
            let window = match (decades, tail_fraction) {
                (_, Some(f)) => TailWindow::Fraction(f),
                (Some(k), None) => TailWindow::Decades(k),
                (None, None) => TailWindow::default(),
            };
            let est = fit_rate(&rows, window)?;
            print_json(&serde_json::to_value(&est).expect("serializable"));
        }
        Command::Diagnose {
            config,
            seed,
            samples,
        } => {
            let (spec, grid) = load_game_spec(&config)?;
            let mut grid = grid.unwrap_or_default();
            grid.seed = seed.unwrap_or(grid.seed);
            grid.samples = samples.unwrap_or(grid.samples);
            let game = spec.build()?;
            let report = run_diagnostics(&game, &grid)?;
            print_json(&serde_json::to_value(&report).expect("serializable"));
        }
        Command::SolveNe { config, tol } => {
            let (spec, _) = load_game_spec(&config)?;
            let game = spec.build()?;
            let r = solve_ne(&game, tol)?;
            print_json(&json!({
                "game": game.name(),
                "point": r.point,
                "residual": r.residual,
                "iterations": r.iterations,
                "converged": r.converged,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
