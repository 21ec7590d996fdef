use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{default_epsilon, NetConfig};
use crate::env::{EnvSpec, InitialState};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, SnapshotSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AgentSpec {
    Adaptive,
    Net {
        /// Grid spacing; defaults to `(K H)^(-1/(d+2))`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    NoMovement,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    /// Grid points per axis.
    pub resolution: usize,
    /// Quadrature nodes per expectation over arrivals or noise.
    pub quadrature_nodes: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            resolution: 201,
            quadrature_nodes: 512,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.1
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub agent: AgentSpec,
    #[serde(alias = "K")]
    pub episodes: u64,
    #[serde(alias = "H")]
    pub horizon: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub lipschitz: f64,
    #[serde(default = "one")]
    pub bonus_scale_stochastic: f64,
    #[serde(default = "one")]
    pub bonus_scale_metric: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshots: SnapshotSchedule,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(environment: EnvSpec, agent: AgentSpec, episodes: u64, horizon: usize) -> Self {
        ExperimentConfig {
            environment,
            agent,
            episodes,
            horizon,
            delta: default_delta(),
            lipschitz: 1.0,
            bonus_scale_stochastic: 1.0,
            bonus_scale_metric: 1.0,
            seed: 0,
            snapshots: SnapshotSchedule::None,
            oracle: OracleSettings::default(),
            output_dir: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_bonus_scales(mut self, stochastic: f64, metric: f64) -> Self {
        self.bonus_scale_stochastic = stochastic;
        self.bonus_scale_metric = metric;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig::new(self.horizon, self.episodes, self.delta, self.lipschitz)
            .with_bonus_scales(self.bonus_scale_stochastic, self.bonus_scale_metric)
    }

    pub fn net(&self) -> Option<NetConfig> {
        match self.agent {
            AgentSpec::Net { epsilon } => Some(NetConfig {
                epsilon: epsilon.unwrap_or_else(|| {
                    default_epsilon(self.episodes, self.horizon, self.environment.space().dims())
                }),
                learner: self.learner(),
            }),
            _ => None,
        }
    }

    /// Rejects inconsistent configs before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.learner().validate()?;
        self.environment.validate(self.horizon)?;
        if let Some(net) = self.net() {
            net.validate()?;
        }
        if self.oracle.resolution < 2 || self.oracle.quadrature_nodes == 0 {
            return Err(Error::Config(
                "oracle resolution must be >= 2 and quadrature_nodes >= 1".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex_digest(json.as_bytes())
    }

    /// Applies one sweep value.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let whole = |v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::Config(format!("{param} needs a whole number, got {v}")))
            }
        };
        match param {
            SweepParam::Episodes => cfg.episodes = whole(value)?,
            SweepParam::Seed => cfg.seed = whole(value)?,
            SweepParam::Lambda => match &mut cfg.environment {
                EnvSpec::Oil(oil) => oil.lambda = value,
                EnvSpec::Ambulance(_) => {
                    return Err(Error::Config("lambda only applies to the oil environment".into()))
                }
            },
            SweepParam::C => match &mut cfg.environment {
                EnvSpec::Oil(oil) => oil.well_location = value,
                EnvSpec::Ambulance(amb) => amb.cost_weight = value,
            },
            SweepParam::Epsilon => match &mut cfg.agent {
                AgentSpec::Net { epsilon } => *epsilon = Some(value),
                _ => return Err(Error::Config("epsilon only applies to the net agent".into())),
            },
            SweepParam::BonusScale => {
                cfg.bonus_scale_stochastic = value;
                cfg.bonus_scale_metric = value;
            }
            SweepParam::BonusScaleStochastic => cfg.bonus_scale_stochastic = value,
            SweepParam::BonusScaleMetric => cfg.bonus_scale_metric = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> &InitialState {
        match &self.environment {
            EnvSpec::Oil(c) => &c.initial_state,
            EnvSpec::Ambulance(c) => &c.initial_state,
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Episodes,
    Seed,
    Lambda,
    /// Well location for oil, cost weight for ambulance.
    C,
    Epsilon,
    /// Both bonus scales together.
    BonusScale,
    BonusScaleStochastic,
    BonusScaleMetric,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "K" | "k" | "episodes" => SweepParam::Episodes,
            "seed" => SweepParam::Seed,
            "lambda" => SweepParam::Lambda,
            "c" => SweepParam::C,
            "epsilon" => SweepParam::Epsilon,
            "bonus_scale" => SweepParam::BonusScale,
            "bonus_scale_stochastic" => SweepParam::BonusScaleStochastic,
            "bonus_scale_metric" => SweepParam::BonusScaleMetric,
            other => return Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Episodes => "K",
            SweepParam::Seed => "seed",
            SweepParam::Lambda => "lambda",
            SweepParam::C => "c",
            SweepParam::Epsilon => "epsilon",
            SweepParam::BonusScale => "bonus_scale",
            SweepParam::BonusScaleStochastic => "bonus_scale_stochastic",
            SweepParam::BonusScaleMetric => "bonus_scale_metric",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OIL: &str = r#"{
        "environment": {"kind": "oil", "survey": "laplace", "lambda": 1.0, "well_location": 0.75},
        "agent": {"kind": "adaptive"},
        "K": 100,
        "H": 5,
        "seed": 3
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(OIL).unwrap();
        assert_eq!(cfg.episodes, 100);
        assert_eq!(cfg.horizon, 5);
        assert_eq!(cfg.bonus_scale_metric, 1.0);
        assert_eq!(cfg.oracle.resolution, 201);
        assert_eq!(*cfg.initial_state(), InitialState::Fixed(0.0));
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = OIL.replace("\"seed\": 3", "\"seed\": 3, \"sed\": 4");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad_env = OIL.replace("\"well_location\": 0.75", "\"well_location\": 0.75, \"depth\": 2");
        assert!(ExperimentConfig::from_json(&bad_env).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        let bad = OIL.replace("\"H\": 5", "\"H\": 5, \"delta\": 1.5");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = OIL.replace("0.75", "1.75");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn net_epsilon_default() {
        let cfg = ExperimentConfig::from_json(
            &OIL.replace(r#"{"kind": "adaptive"}"#, r#"{"kind": "net"}"#)
                .replace("\"K\": 100", "\"K\": 2000"),
        )
        .unwrap();
        assert!((cfg.net().unwrap().epsilon - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sweep_params() {
        let cfg = ExperimentConfig::from_json(OIL).unwrap();
        let p: SweepParam = "K".parse().unwrap();
        assert_eq!(cfg.with_param(p, 500.0).unwrap().episodes, 500);
        assert!(cfg.with_param(p, 2.5).is_err());
        let lam = cfg.with_param(SweepParam::Lambda, 10.0).unwrap();
        assert!(matches!(lam.environment, EnvSpec::Oil(ref o) if o.lambda == 10.0));
        assert!(cfg.with_param(SweepParam::Epsilon, 0.1).is_err());
        assert!("depth".parse::<SweepParam>().is_err());
        assert_ne!(cfg.content_hash(), lam.content_hash());
        assert_eq!(cfg.content_hash(), cfg.clone().content_hash());
    }
}
