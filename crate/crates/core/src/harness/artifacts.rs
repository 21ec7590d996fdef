//! On-disk layout of a run directory:
//!
//! - `config.json`: the config echo
//! - `rewards.csv`: `episode,reward,cum_regret`, one row per episode
//! - `partition_h{h}.json`: node records of the final step-`h` tree (adaptive agent only)
//! - `summary.json`: averages, final sizes, provenance hashes and wall-clock time

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{AgentSpec, ExperimentConfig, SweepParam};
use crate::harness::oracle::OracleGrid;
use crate::harness::regret::per_episode_regret;
use crate::harness::run::{RunRecord, SweepPoint};
use crate::partition::{
    check_blackbox_conditions, BlackBoxParams, NodeRecord, StepPartition,
};

pub const REWARDS_HEADER: &str = "episode,reward,cum_regret";

/// Leaf count constant used by [`check_run`]: a tree grown by the dyadic
/// split rule over `K` episodes in a 2-dimensional box never exceeds about
/// `4.5 sqrt(K)` leaves.
pub const DEFAULT_SIZE_CONSTANT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    pub agent: String,
    pub config_hash: String,
    pub fingerprint: String,
    pub mean_reward: f64,
    pub last_10pct_mean_reward: f64,
    pub cumulative_regret: f64,
    pub oracle_resolution: usize,
    pub final_partition_sizes: Vec<usize>,
    pub splits: usize,
    pub wall_clock_secs: f64,
}

fn agent_name(spec: &AgentSpec) -> &'static str {
    match spec {
        AgentSpec::Adaptive => "adaptive",
        AgentSpec::Net { .. } => "net",
        AgentSpec::NoMovement => "no_movement",
        AgentSpec::Median => "median",
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::artifact(path, e.to_string()))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::artifact(path, e.to_string()))
}

pub fn partition_file(dir: &Path, step: usize) -> std::path::PathBuf {
    dir.join(format!("partition_h{step}.json"))
}

/// Renders the rewards table; 17 significant digits round-trip every `f64`.
pub fn rewards_csv(rewards: &[f64], cumulative_regret: &[f64]) -> String {
    let mut out = String::with_capacity(48 * rewards.len() + 32);
    out.push_str(REWARDS_HEADER);
    out.push('\n');
    for (k, (r, c)) in rewards.iter().zip(cumulative_regret).enumerate() {
        writeln!(out, "{},{:.16e},{:.16e}", k + 1, r, c).expect("writing to a string");
    }
    out
}

/// Writes all artifacts of `record` into `dir`, creating it if needed.
pub fn write_artifacts(record: &RunRecord, dir: &Path, oracle: &OracleGrid) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::artifact(dir, e.to_string()))?;
    let mut echo = record.config.clone();
    echo.output_dir = None;
    write_file(&dir.join("config.json"), &echo.to_json())?;

    let regret = per_episode_regret(record, oracle)?;
    write_file(&dir.join("rewards.csv"), &rewards_csv(&record.rewards, &regret.cumulative))?;

    if let Some(trees) = &record.partitions {
        for tree in trees {
            let json = serde_json::to_string_pretty(&tree.to_records())?;
            write_file(&partition_file(dir, tree.step()), &json)?;
        }
    }

    let k = record.episodes();
    let summary = Summary {
        episodes: k,
        horizon: record.config.horizon,
        seed: record.config.seed,
        agent: agent_name(&record.config.agent).to_string(),
        config_hash: record.config_hash.clone(),
        fingerprint: record.fingerprint(),
        mean_reward: record.tail_mean(k),
        last_10pct_mean_reward: record.tail_mean((k / 10).max(1)),
        cumulative_regret: regret.cumulative.last().copied().unwrap_or(0.0),
        oracle_resolution: oracle.resolution(),
        final_partition_sizes: record.partition_sizes.last().cloned().unwrap_or_default(),
        splits: record.splits.len(),
        wall_clock_secs: record.wall_clock_secs,
    };
    write_file(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)
}

/// Writes one line per sweep point; failed points carry their error message.
pub fn write_sweep_summary(path: &Path, param: SweepParam, points: &[SweepPoint]) -> Result<()> {
    let mut out = format!("{param},status,mean_reward,last_10pct_mean_reward,final_cells,dir,error\n");
    for p in points {
        match &p.outcome {
            Ok(r) => {
                let k = r.episodes();
                writeln!(
                    out,
                    "{},ok,{:.16e},{:.16e},{},{},",
                    p.value,
                    r.tail_mean(k),
                    r.tail_mean((k / 10).max(1)),
                    r.final_cells(),
                    p.dir.display()
                )
            }
            Err(e) => writeln!(
                out,
                "{},failed,,,,{},\"{}\"",
                p.value,
                p.dir.display(),
                e.to_string().replace('"', "'")
            ),
        }
        .expect("writing to a string");
    }
    write_file(path, &out)
}

/// One parsed row of `rewards.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRow {
    pub episode: u64,
    pub reward: f64,
    pub cum_regret: f64,
}

pub fn read_rewards(path: &Path) -> Result<Vec<RewardRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(REWARDS_HEADER) {
        return Err(Error::artifact(path, format!("header must be '{REWARDS_HEADER}'")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::artifact(path, format!("line {}: {what}", i + 2));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad("expected 3 fields"));
            }
            Ok(RewardRow {
                episode: fields[0].parse().map_err(|_| bad("bad episode"))?,
                reward: fields[1].parse().map_err(|_| bad("bad reward"))?,
                cum_regret: fields[2].parse().map_err(|_| bad("bad cum_regret"))?,
            })
        })
        .collect()
}

pub fn read_partition(dir: &Path, config: &ExperimentConfig, step: usize) -> Result<StepPartition> {
    let path = partition_file(dir, step);
    let records: Vec<NodeRecord> =
        serde_json::from_str(&read_file(&path)?).map_err(|e| Error::artifact(&path, e.to_string()))?;
    let tree = StepPartition::from_records(config.environment.space(), &records)
        .map_err(|e| Error::artifact(&path, e.to_string()))?;
    if tree.step() != step {
        return Err(Error::artifact(&path, format!("records are for step {}", tree.step())));
    }
    Ok(tree)
}

/// Outcome of [`check_run`]; `problems` is empty when everything holds.
#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub episodes: usize,
    pub trees_checked: usize,
    pub problems: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Re-validates a run directory: reward table shape and ranges, and for
/// adaptive runs every partition invariant on the rebuilt trees.
pub fn check_run(dir: &Path) -> Result<CheckReport> {
    let config = ExperimentConfig::load(&dir.join("config.json"))?;
    let rows = read_rewards(&dir.join("rewards.csv"))?;
    let mut report = CheckReport {
        episodes: rows.len(),
        ..CheckReport::default()
    };
    if rows.len() as u64 != config.episodes {
        report
            .problems
            .push(format!("{} reward rows for K = {}", rows.len(), config.episodes));
    }
    let h = config.horizon as f64;
    for (i, row) in rows.iter().enumerate() {
        if row.episode != i as u64 + 1 {
            report.problems.push(format!("row {} has episode {}", i + 1, row.episode));
        }
        if !(0.0..=h).contains(&row.reward) {
            report
                .problems
                .push(format!("episode {} reward {} outside [0, {h}]", row.episode, row.reward));
        }
        if !row.cum_regret.is_finite() {
            report.problems.push(format!("episode {} has non-finite regret", row.episode));
        }
    }

    if config.agent == AgentSpec::Adaptive {
        let mut trees = Vec::with_capacity(config.horizon);
        for step in 1..=config.horizon {
            let tree = read_partition(dir, &config, step)?;
            let part = tree.check_partition_invariants();
            if !part.covering_exact {
                report.problems.push(format!(
                    "step {step}: leaves do not cover the space (deficit {})",
                    part.volume_deficit
                ));
            }
            report
                .problems
                .extend(part.structure_violations.iter().map(|v| format!("step {step}: {v}")));
            for v in &part.separation_violations {
                report.problems.push(format!(
                    "step {step}: nodes {} and {} at radius {} are only {} apart",
                    v.a.0, v.b.0, v.radius, v.distance
                ));
            }
            for v in tree.check_visit_bounds().violations {
                report.problems.push(format!(
                    "step {step}: node {} (depth {}) breaks {:?}: {} vs {}",
                    v.node.0, v.depth, v.bound, v.observed, v.limit
                ));
            }
            trees.push(tree);
        }
        let space = config.environment.space();
        let params = BlackBoxParams::for_dyadic(
            space.d_max(),
            config.episodes,
            space.dims() as f64,
            DEFAULT_SIZE_CONSTANT,
        );
        report
            .problems
            .extend(check_blackbox_conditions(&trees, &params).violations);
        report.trees_checked = trees.len();
    }
    Ok(report)
}

/// Leaf table of one dumped tree as CSV: cell bounds, estimate and visits.
pub fn leaf_table(tree: &StepPartition) -> String {
    let space = tree.space();
    let mut out = String::new();
    for i in 0..space.state_dims() {
        write!(out, "x{i}_lo,x{i}_hi,").expect("writing to a string");
    }
    for i in 0..space.action_dims() {
        write!(out, "a{i}_lo,a{i}_hi,").expect("writing to a string");
    }
    out.push_str("depth,q_hat,visits,own_visits\n");
    for id in tree.leaves() {
        let node = tree.node(id);
        for d in 0..space.dims() {
            let (lo, hi) = node.region().bounds(d);
            write!(out, "{lo},{hi},").expect("writing to a string");
        }
        writeln!(
            out,
            "{},{},{},{}",
            node.region().depth(),
            node.q_hat(),
            node.visits(),
            node.own_visits()
        )
        .expect("writing to a string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_bits() {
        let rewards = [0.1 + 0.2, 1.0 / 3.0, 4.999_999_999_999_9];
        let cum = [1e-17, -2.5, 3.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rewards.csv");
        fs::write(&path, rewards_csv(&rewards, &cum)).unwrap();
        let rows = read_rewards(&path).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.episode, i as u64 + 1);
            assert_eq!(row.reward.to_bits(), rewards[i].to_bits());
            assert_eq!(row.cum_regret.to_bits(), cum[i].to_bits());
        }
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rewards.csv");
        fs::write(&path, "episode,total_reward\n1,0.5\n").unwrap();
        assert!(matches!(read_rewards(&path), Err(Error::Artifact { .. })));
    }
}
