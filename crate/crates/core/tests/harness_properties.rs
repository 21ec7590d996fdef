use adaq::env::{shifting_uniform_preset, AmbulanceConfig, ArrivalSpec, EnvSpec, InitialState, OilConfig};
use adaq::harness::artifacts::check_run;
use adaq::harness::regret::regret_from;
use adaq::harness::{
    compute_oracle, per_episode_regret, run_batch, run_experiment, AgentSpec, ExperimentConfig,
};
use adaq::learner::{lipschitz_from_primitives, TransitionRegularity};
use adaq::par::Execution;
use proptest::prelude::*;

#[test]
fn oracle_is_self_consistent_and_lipschitz() {
    let horizon = 5;
    let m = 81;
    let envs = [
        // reward is (1 + lambda)-Lipschitz jointly; next state = a
        (EnvSpec::Oil(OilConfig::laplace(3.0, 0.6)), 4.0, 1.0),
        (EnvSpec::Oil(OilConfig::quadratic(10.0, 0.3)), 1.0 + 2.0 * 10.0, 1.0),
        // arrivals ignore (x, a)
        (EnvSpec::Ambulance(shifting_uniform_preset()), 2.0, 0.0),
        (
            EnvSpec::Ambulance(AmbulanceConfig::stationary(0.4, ArrivalSpec::Beta { a: 5.0, b: 2.0 })),
            2.0,
            0.0,
        ),
    ];
    for (env, l_reward, l_transition) in envs {
        let o = compute_oracle(&env, horizon, m, 64).unwrap();
        for h in 0..horizon {
            for i in 0..m {
                let best = (0..m).map(|j| o.q_at_grid(h, i, j)).fold(f64::MIN, f64::max);
                assert_eq!(o.value_at_grid(h, i), best);
            }
            let bound = lipschitz_from_primitives(TransitionRegularity::Wasserstein, l_reward, l_transition, horizon, h + 1);
            assert!(o.max_slope(h) <= bound + 1e-9, "{env:?} step {h}: {} > {bound}", o.max_slope(h));
        }
        assert!((0..m).all(|i| o.value_at_grid(horizon, i) == 0.0));
    }
}

#[test]
fn optimal_play_has_zero_regret() {
    // starting on the well, staying put earns 1 per step
    let env = EnvSpec::Oil(OilConfig::laplace(1.0, 0.75));
    let o = compute_oracle(&env, 5, 101, 1).unwrap();
    let trace = regret_from(&[5.0; 10], &vec![vec![0.75]; 10], &o).unwrap();
    assert!(trace.per_episode.iter().all(|&r| r.abs() <= 1.0 / 101.0));
}

proptest! {
    #[test]
    fn cumulative_regret_is_monotone_for_nonnegative_terms(
        gaps in prop::collection::vec(0.0..=1.0f64, 1..50),
        starts in prop::collection::vec(0.0..=1.0f64, 50),
    ) {
        let env = EnvSpec::Ambulance(shifting_uniform_preset());
        let o = compute_oracle(&env, 5, 41, 16).unwrap();
        let x1: Vec<Vec<f64>> = starts[..gaps.len()].iter().map(|&x| vec![x]).collect();
        let rewards: Vec<f64> = gaps.iter().zip(&x1).map(|(g, x)| o.value(0, x[0]) - g).collect();
        let t = regret_from(&rewards, &x1, &o).unwrap();
        prop_assert!(t.cumulative.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(t.cumulative.len(), gaps.len());
    }
}

#[test]
fn artifacts_pass_their_own_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let envs = [
        EnvSpec::Oil(OilConfig { initial_state: InitialState::Uniform, ..OilConfig::quadratic(5.0, 0.2) }),
        EnvSpec::Ambulance(shifting_uniform_preset()),
    ];
    for (i, env) in envs.into_iter().enumerate() {
        for (j, agent) in [AgentSpec::Adaptive, AgentSpec::Net { epsilon: Some(0.25) }, AgentSpec::NoMovement]
            .into_iter()
            .enumerate()
        {
            let mut cfg = ExperimentConfig::new(env.clone(), agent, 150, 5).with_seed(9);
            cfg.oracle.resolution = 41;
            cfg.oracle.quadrature_nodes = 16;
            let dir = tmp.path().join(format!("{i}-{j}"));
            cfg.output_dir = Some(dir.clone());
            let rec = run_experiment(&cfg).unwrap();
            let report = check_run(&dir).unwrap();
            assert!(report.passed(), "{:?}", report.problems);
            assert_eq!(report.episodes, 150);
            let summary: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
            assert_eq!(summary["fingerprint"], rec.fingerprint());
        }
    }
}

/// Realized regret over `K^(3/4)` does not grow along a K sweep.
#[test]
fn regret_grows_no_faster_than_three_quarters() {
    let env = EnvSpec::Oil(OilConfig { initial_state: InitialState::Uniform, ..OilConfig::laplace(1.0, 0.75) });
    let ks = [500u64, 1000, 2000, 4000];
    let configs: Vec<ExperimentConfig> = ks
        .iter()
        .map(|&k| ExperimentConfig::new(env.clone(), AgentSpec::Adaptive, k, 5).with_bonus_scales(0.01, 0.01))
        .collect();
    let oracle = compute_oracle(&env, 5, 201, 1).unwrap();
    let ratios: Vec<f64> = run_batch(&configs, Execution::default())
        .into_iter()
        .map(|r| {
            let r = r.unwrap();
            let total = *per_episode_regret(&r, &oracle).unwrap().cumulative.last().unwrap();
            total / (r.episodes() as f64).powf(0.75)
        })
        .collect();
    for r in &ratios[1..] {
        assert!(*r <= 1.5 * ratios[0], "{ratios:?}");
    }
}
