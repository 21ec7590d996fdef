use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaq::harness::artifacts::{check_run, leaf_table, read_partition};
use adaq::harness::{compute_oracle, run_experiment, sweep, ExperimentConfig, SweepParam};
use adaq::par::Execution;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaq", version, about = "Adaptive Q-learning experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one config and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory; defaults to the config's output_dir, then runs/<hash>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one config per value of a parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of K, seed, lambda, c, epsilon, bonus_scale, bonus_scale_stochastic, bonus_scale_metric.
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        /// Run the points one after another instead of concurrently.
        #[arg(long)]
        sequential: bool,
    },
    /// Compute the grid oracle for a config and write it as JSON.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
        /// Quadrature nodes; defaults to the config's oracle settings.
        #[arg(long)]
        quadrature: Option<usize>,
    },
    /// Re-run every invariant checker on a run directory.
    Check {
        #[arg(long)]
        run: PathBuf,
    },
    /// Print the leaves of one dumped partition as CSV.
    DumpPartition {
        #[arg(long)]
        run: PathBuf,
        /// 1-based step.
        #[arg(long)]
        step: usize,
    },
}

fn parse_values(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad sweep value '{s}'")))
        .collect()
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.content_hash()[..12]));
    cfg.output_dir = Some(dir.clone());
    let record = run_experiment(&cfg)?;
    println!(
        "{}: {} episodes, mean reward {:.6}, {} splits, {:.2}s",
        dir.display(),
        record.episodes(),
        record.tail_mean(record.episodes()),
        record.splits.len(),
        record.wall_clock_secs
    );
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(config: &Path, param: &str, values: &str, out: &Path, sequential: bool) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(config)?;
    let param: SweepParam = param.parse()?;
    let values = parse_values(values)?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let points = sweep(&cfg, param, &values, out, exec)?;
    let mut failed = 0;
    for p in &points {
        match &p.outcome {
            Ok(r) => println!("{param}={}: ok, mean reward {:.6}", p.value, r.tail_mean(r.episodes())),
            Err(e) => {
                failed += 1;
                println!("{param}={}: failed: {e}", p.value);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} of {} sweep points failed", points.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(config: &Path, resolution: usize, out: &Path, quadrature: Option<usize>) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(config)?;
    let nodes = quadrature.unwrap_or(cfg.oracle.quadrature_nodes);
    let grid = compute_oracle(&cfg.environment, cfg.horizon, resolution, nodes)?;
    fs::write(out, serde_json::to_string(&grid)?).with_context(|| format!("writing {}", out.display()))?;
    println!("V*_1 range [{:.6}, {:.6}]", min_value(&grid), max_value(&grid));
    Ok(ExitCode::SUCCESS)
}

fn min_value(grid: &adaq::harness::OracleGrid) -> f64 {
    (0..grid.resolution()).map(|i| grid.value_at_grid(0, i)).fold(f64::INFINITY, f64::min)
}

fn max_value(grid: &adaq::harness::OracleGrid) -> f64 {
    (0..grid.resolution()).map(|i| grid.value_at_grid(0, i)).fold(f64::NEG_INFINITY, f64::max)
}

fn check(dir: &Path) -> Result<ExitCode> {
    let report = check_run(dir)?;
    for p in &report.problems {
        println!("{p}");
    }
    if report.passed() {
        println!("ok: {} episodes, {} trees checked", report.episodes, report.trees_checked);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} problems", report.problems.len());
        Ok(ExitCode::FAILURE)
    }
}

fn dump_partition(dir: &Path, step: usize) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&dir.join("config.json"))?;
    if step == 0 || step > cfg.horizon {
        bail!("step must be in 1..={}", cfg.horizon);
    }
    let tree = read_partition(dir, &cfg, step)?;
    print!("{}", leaf_table(&tree));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Sweep {
            config,
            param,
            values,
            out,
            sequential,
        } => run_sweep(&config, &param, &values, &out, sequential),
        Command::Oracle {
            config,
            resolution,
            out,
            quadrature,
        } => oracle(&config, resolution, &out, quadrature),
        Command::Check { run } => check(&run),
        Command::DumpPartition { run, step } => dump_partition(&run, step),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
