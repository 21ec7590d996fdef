use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::agent::{run_episode, Agent};
use crate::baselines::{MedianAgent, NetAgent, NoMovementAgent};
use crate::env::{seeded_rng, Environment};
use crate::error::{Error, Result};
use crate::harness::artifacts;
use crate::harness::config::{hex_digest, AgentSpec, ExperimentConfig, SweepParam};
use crate::harness::oracle::compute_oracle;
use crate::learner::{AdaptiveAgent, GreedyPolicy};
use crate::par::{self, Execution};
use crate::partition::{SplitEvent, StepPartition};

/// Everything recorded while playing one config.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Total reward per episode.
    pub rewards: Vec<f64>,
    pub initial_states: Vec<Vec<f64>>,
    /// Cells per step after each episode; rows are empty for agents without a discretization.
    pub partition_sizes: Vec<Vec<usize>>,
    pub splits: Vec<SplitEvent>,
    pub wall_clock_secs: f64,
    /// Final adaptive partitions, one per step.
    pub partitions: Option<Vec<StepPartition>>,
    /// Greedy-policy snapshots taken according to the config's schedule.
    pub snapshots: Vec<GreedyPolicy>,
}

impl RunRecord {
    pub fn episodes(&self) -> usize {
        self.rewards.len()
    }

    /// Mean episode reward over the last `n` episodes (all of them if fewer).
    pub fn tail_mean(&self, n: usize) -> f64 {
        let tail = &self.rewards[self.rewards.len().saturating_sub(n)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// Leaves summed over all steps at the end of the run.
    pub fn final_cells(&self) -> usize {
        self.partition_sizes.last().map_or(0, |row| row.iter().sum())
    }

    /// Hash over every deterministic output; wall-clock time is excluded.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            config_hash: &'a str,
            rewards: Vec<u64>,
            initial_states: Vec<Vec<u64>>,
            partition_sizes: &'a [Vec<usize>],
            splits: &'a [SplitEvent],
            partitions: Option<Vec<Vec<crate::partition::NodeRecord>>>,
        }
        let view = View {
            config_hash: &self.config_hash,
            rewards: self.rewards.iter().map(|r| r.to_bits()).collect(),
            initial_states: self
                .initial_states
                .iter()
                .map(|x| x.iter().map(|v| v.to_bits()).collect())
                .collect(),
            partition_sizes: &self.partition_sizes,
            splits: &self.splits,
            partitions: self
                .partitions
                .as_ref()
                .map(|trees| trees.iter().map(StepPartition::to_records).collect()),
        };
        hex_digest(&serde_json::to_vec(&view).expect("record serializes"))
    }
}

struct Played {
    rewards: Vec<f64>,
    initial_states: Vec<Vec<f64>>,
    partition_sizes: Vec<Vec<usize>>,
    splits: Vec<SplitEvent>,
}

fn play<A: Agent + ?Sized>(agent: &mut A, cfg: &ExperimentConfig) -> Result<Played> {
    let env = &cfg.environment;
    let mut rng = seeded_rng(cfg.seed);
    let k = cfg.episodes as usize;
    let mut out = Played {
        rewards: Vec::with_capacity(k),
        initial_states: Vec::with_capacity(k),
        partition_sizes: Vec::with_capacity(k),
        splits: Vec::new(),
    };
    for _ in 0..k {
        let x1 = env.reset(&mut rng);
        let trace = run_episode(agent, env, x1.clone(), &mut rng)?;
        out.rewards.push(trace.total_reward());
        out.initial_states.push(x1);
        out.partition_sizes.push(agent.partition_sizes());
        out.splits.extend(trace.splits);
    }
    Ok(out)
}

/// Plays `cfg.episodes` episodes without touching the file system.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let space = cfg.environment.space();
    let mut partitions = None;
    let mut snapshots = Vec::new();
    let played = match &cfg.agent {
        AgentSpec::Adaptive => {
            let mut agent = AdaptiveAgent::new(cfg.learner(), space)?.with_snapshots(cfg.snapshots.clone());
            let played = play(&mut agent, cfg)?;
            snapshots = agent.snapshots().values().cloned().collect();
            partitions = Some(agent.into_trees());
            played
        }
        AgentSpec::Net { .. } => {
            let net = cfg.net().expect("net agent has a net config");
            play(&mut NetAgent::new(net, space)?, cfg)?
        }
        AgentSpec::NoMovement => play(&mut NoMovementAgent::new(cfg.horizon), cfg)?,
        AgentSpec::Median => play(&mut MedianAgent::new(cfg.horizon), cfg)?,
    };
    Ok(RunRecord {
        config: cfg.clone(),
        config_hash: cfg.content_hash(),
        rewards: played.rewards,
        initial_states: played.initial_states,
        partition_sizes: played.partition_sizes,
        splits: played.splits,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        partitions,
        snapshots,
    })
}

/// Plays the config and, when it names an output directory, writes the run artifacts there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let record = simulate(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_with_oracle(&record, dir)?;
    }
    Ok(record)
}

/// Writes artifacts for `record`, computing the oracle named in its config.
pub fn write_with_oracle(record: &RunRecord, dir: &Path) -> Result<()> {
    let cfg = &record.config;
    let oracle = compute_oracle(
        &cfg.environment,
        cfg.horizon,
        cfg.oracle.resolution,
        cfg.oracle.quadrature_nodes,
    )?;
    artifacts::write_artifacts(record, dir, &oracle)
}

/// Simulates independent configs, concurrently under [`Execution::Parallel`].
pub fn run_batch(configs: &[ExperimentConfig], exec: Execution) -> Vec<Result<RunRecord>> {
    par::map(configs, exec, simulate)
}

/// One finished sweep point.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub dir: PathBuf,
    pub outcome: Result<RunRecord>,
}

/// Runs `base` once per value of `param`, writing each run to `out/<param>=<value>`
/// and a `summary.csv` over all points. A failed point does not stop the others.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out).map_err(|e| Error::artifact(out, e.to_string()))?;
    let points = par::map(values, exec, |&value| {
        let dir = out.join(format!("{param}={value}"));
        let outcome = base.with_param(param, value).and_then(|mut cfg| {
            cfg.output_dir = Some(dir.clone());
            run_experiment(&cfg)
        });
        SweepPoint { value, dir, outcome }
    });
    artifacts::write_sweep_summary(&out.join("summary.csv"), param, &points)?;
    Ok(points)
}
