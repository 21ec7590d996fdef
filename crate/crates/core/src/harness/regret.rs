use serde::Serialize;

use crate::agent::{run_episode, Agent};
use crate::env::{Environment, SimRng};
use crate::error::{Error, Result};
use crate::harness::oracle::OracleGrid;
use crate::harness::run::RunRecord;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegretTrace {
    pub per_episode: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Realized-reward regret surrogate `V*_1(x_1^k) - sum_h r_h^k` per episode.
///
/// The realized return is an unbiased estimate of the played policy's value,
/// so the surrogate is unbiased but noisy; its error from the grid oracle is
/// of order `L / m` per episode.
pub fn per_episode_regret(record: &RunRecord, oracle: &OracleGrid) -> Result<RegretTrace> {
    regret_from(&record.rewards, &record.initial_states, oracle)
}

pub fn regret_from(rewards: &[f64], initial_states: &[Vec<f64>], oracle: &OracleGrid) -> Result<RegretTrace> {
    if rewards.len() != initial_states.len() {
        return Err(Error::InvalidInput(format!(
            "{} rewards but {} initial states",
            rewards.len(),
            initial_states.len()
        )));
    }
    let per_episode: Vec<f64> = rewards
        .iter()
        .zip(initial_states)
        .map(|(r, x)| oracle.value(0, x[0]) - r)
        .collect();
    let cumulative = per_episode
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    Ok(RegretTrace {
        per_episode,
        cumulative,
    })
}

/// Mean return of a frozen policy over `n` fresh roll-outs from `x1`.
pub fn policy_value_estimate<A, E>(policy: &mut A, env: &E, x1: &[f64], n: usize, rng: &mut SimRng) -> Result<f64>
where
    A: Agent + ?Sized,
    E: Environment + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidInput("need at least one roll-out".into()));
    }
    let mut total = 0.0;
    for _ in 0..n {
        total += run_episode(policy, env, x1.to_vec(), rng)?.total_reward();
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub episodes: u64,
    pub horizon: usize,
    pub delta: f64,
    pub lipschitz: f64,
    pub d_max: f64,
}

/// Covering numbers `N_r = c r^(-d)`.
pub fn power_law_covering(c: f64, d: f64) -> impl Fn(f64) -> f64 {
    move |r| c * r.powf(-d)
}

/// Regret bound with the covering-number term
/// `inf_{r0} (K r0 / d_max + sum_{r = d_max 2^-i >= r0} N_r d_max / r)`,
/// the infimum taken over the dyadic radii.
pub fn bound_diagnostic(p: &BoundParams, covering: impl Fn(f64) -> f64) -> f64 {
    let h = p.horizon as f64;
    let k = p.episodes as f64;
    let log = (4.0 * h * k / p.delta).ln();
    let first = 3.0 * h * h;
    let second = 6.0 * (2.0 * h.powi(3) * k * log).sqrt();
    let scale = 96.0 * h * ((h.powi(3) * log).sqrt() + p.lipschitz * p.d_max);
    scale.mul_add(covering_term(p, covering), first + second)
}

fn covering_term(p: &BoundParams, covering: impl Fn(f64) -> f64) -> f64 {
    let k = p.episodes as f64;
    let mut best = f64::INFINITY;
    let mut partial = 0.0;
    for i in 0..=1074 {
        let r = p.d_max * 0.5f64.powi(i);
        if r == 0.0 {
            break;
        }
        partial += covering(r) * p.d_max / r;
        let value = k * r / p.d_max + partial;
        best = best.min(value);
        // the covering sum only grows from here on
        if partial > best {
            break;
        }
    }
    best
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_exponent(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), (x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, OilConfig};
    use crate::harness::oracle::compute_oracle;

    fn params(k: u64) -> BoundParams {
        BoundParams {
            episodes: k,
            horizon: 5,
            delta: 0.1,
            lipschitz: 1.0,
            d_max: 1.0,
        }
    }

    #[test]
    fn first_term_floor() {
        assert!(bound_diagnostic(&params(1), power_law_covering(1.0, 2.0)) >= 75.0);
    }

    #[test]
    fn monotone_in_k() {
        let mut prev = 0.0;
        for k in [1u64, 10, 100, 1000, 10_000, 100_000] {
            let b = bound_diagnostic(&params(k), power_law_covering(1.0, 2.0));
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn covering_term_brute_force() {
        // K = 1000, N_r = r^-2: K 2^-i + sum_{j<=i} 8^j is smallest at i = 2
        let p = params(1000);
        let brute = (0..20)
            .map(|i| 1000.0 * 0.5f64.powi(i) + (0..=i).map(|j| 8f64.powi(j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(brute, 250.0 + 73.0);
        assert_eq!(covering_term(&p, power_law_covering(1.0, 2.0)), brute);
    }

    #[test]
    fn bound_exponents() {
        let fit = |d: f64, k0: u64, k1: u64| {
            let at = |k: u64| (k as f64, bound_diagnostic(&params(k), power_law_covering(1.0, d)));
            fitted_exponent(&[at(k0), at(k1)])
        };
        // the log factors push both slightly above (d + 1) / (d + 2)
        let e0 = fit(0.0, 100, 10_000);
        assert!((e0 - 0.5).abs() <= 0.05, "{e0}");
        let e2 = fit(2.0, 1_000, 100_000);
        assert!((e2 - 0.75).abs() <= 0.05, "{e2}");
    }

    #[test]
    fn exponent_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0].iter().map(|&x| (x, 3.0 * x.powf(0.7))).collect();
        assert!((fitted_exponent(&pts) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn regret_of_zero_rewards_is_the_optimal_value() {
        let spec = EnvSpec::Oil(OilConfig::laplace(1.0, 0.75));
        let oracle = compute_oracle(&spec, 2, 101, 1).unwrap();
        let trace = regret_from(&[0.0, 0.0], &[vec![0.0], vec![0.75]], &oracle).unwrap();
        assert_eq!(trace.per_episode, vec![oracle.value(0, 0.0), 2.0]);
        assert_eq!(trace.cumulative[1], oracle.value(0, 0.0) + 2.0);
        assert!(regret_from(&[0.0], &[], &oracle).is_err());
    }
}
