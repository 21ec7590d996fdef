use std::collections::HashSet;

use adaq::agent::Agent;
use adaq::env::{seeded_rng, AmbulanceConfig, ArrivalSpec, EnvSpec, Environment, InitialState, OilConfig};
use adaq::learner::{v_estimate, AdaptiveAgent, LearnerConfig, StepOutcome};
use adaq::partition::{split_threshold, StepPartition};
use proptest::prelude::*;

fn env_for(which: u8, lambda: f64, c: f64) -> EnvSpec {
    match which {
        0 => EnvSpec::Oil(OilConfig {
            initial_state: InitialState::Uniform,
            ..OilConfig::laplace(lambda, c)
        }),
        1 => EnvSpec::Oil(OilConfig {
            initial_state: InitialState::Uniform,
            ..OilConfig::quadratic(lambda, c)
        }),
        _ => EnvSpec::Ambulance(AmbulanceConfig::stationary(c, ArrivalSpec::Uniform { lo: 0.2, hi: 0.9 })),
    }
}

fn cells(tree: &StepPartition) -> HashSet<(u32, Vec<u64>)> {
    tree.leaves()
        .into_iter()
        .map(|id| {
            let r = tree.node(id).region();
            (r.depth(), r.index().to_vec())
        })
        .collect()
}

/// Plays `k` episodes by hand so every split can be inspected as it happens.
fn play_checked(env: &EnvSpec, k: u64, horizon: usize, scale: f64, seed: u64) -> Result<AdaptiveAgent, TestCaseError> {
    let cfg = LearnerConfig::new(horizon, k, 0.1, 1.0).with_bonus_scales(scale, scale);
    let mut agent = AdaptiveAgent::new(cfg, env.space()).unwrap();
    let mut rng = seeded_rng(seed);
    let h_max = horizon as f64;
    for _ in 0..k {
        let before: Vec<_> = agent.trees().iter().map(cells).collect();
        Agent::begin_episode(&mut agent).unwrap();
        let mut x = env.reset(&mut rng);
        for h in 0..horizon {
            let (ball, action) = agent.act(h, &x).unwrap();
            let out = env.step(h, &x, &action, &mut rng).unwrap();
            let v = v_estimate(agent.trees().get(h + 1), &out.next_state, horizon).unwrap();
            prop_assert!((0.0..=h_max).contains(&v));
            let outcome = StepOutcome { ball, action, reward: out.reward, next_state: out.next_state.clone() };
            if let Some(ev) = agent.update(h, &outcome).unwrap() {
                let tree = &agent.trees()[h];
                let parent = tree.node(ev.node);
                prop_assert_eq!(parent.visits() as f64, split_threshold(1.0, parent.radius()).ceil());
                for &c in parent.children() {
                    let child = tree.node(c);
                    prop_assert_eq!(child.q_hat(), parent.q_hat());
                    prop_assert_eq!(child.visits(), parent.visits());
                    prop_assert_eq!(child.own_visits(), 0);
                }
            }
            x = out.next_state;
        }
        agent.end_episode();

        for (tree, old) in agent.trees().iter().zip(&before) {
            let report = tree.check_partition_invariants();
            prop_assert!(report.passed(), "{:?}", report);
            prop_assert_eq!(report.leaf_volume, 1.0);
            prop_assert!(tree.check_visit_bounds().passed());
            for id in tree.leaves() {
                let n = tree.node(id);
                prop_assert!((n.visits() as f64) < split_threshold(1.0, n.radius()));
            }
            // every new leaf descends from a leaf of the previous episode
            for id in tree.leaves() {
                let mut cur = Some(id);
                let mut found = false;
                while let Some(c) = cur {
                    let r = tree.node(c).region();
                    if old.contains(&(r.depth(), r.index().to_vec())) {
                        found = true;
                        break;
                    }
                    cur = tree.node(c).parent();
                }
                prop_assert!(found, "leaf {} is not a refinement of the previous partition", id.0);
            }
        }
    }
    Ok(agent)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trees_stay_valid_every_episode(
        which in 0u8..3, lambda in 0.5..50.0f64, c in 0.0..=1.0f64,
        k in 1u64..120, horizon in 1usize..5, scale in prop::sample::select(vec![0.0, 0.01, 1.0]),
        seed in any::<u64>(),
    ) {
        let env = env_for(which, lambda, c);
        play_checked(&env, k, horizon, scale, seed)?;
    }

    #[test]
    fn same_seed_same_trees(which in 0u8..3, seed in any::<u64>()) {
        let env = env_for(which, 1.0, 0.3);
        let a = play_checked(&env, 60, 3, 0.1, seed)?;
        let b = play_checked(&env, 60, 3, 0.1, seed)?;
        for (x, y) in a.trees().iter().zip(b.trees()) {
            prop_assert_eq!(x.to_records(), y.to_records());
        }
    }
}
