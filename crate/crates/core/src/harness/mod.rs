//! Config ingestion, seeded runs, the grid oracle, regret and bound
//! diagnostics, and run-directory artifacts.

pub mod artifacts;
pub mod config;
pub mod oracle;
pub mod regret;
pub mod run;

pub use artifacts::{check_run, CheckReport};
pub use config::{AgentSpec, ExperimentConfig, OracleSettings, SweepParam};
pub use oracle::{compute_oracle, OracleGrid};
pub use regret::{bound_diagnostic, per_episode_regret, power_law_covering, BoundParams, RegretTrace};
pub use run::{run_batch, run_experiment, simulate, sweep, RunRecord, SweepPoint};
