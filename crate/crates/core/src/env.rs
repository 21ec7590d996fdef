//! Benchmark MDPs on `S = A = [0,1]`: oil discovery and ambulance relocation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;

/// Random source for one run. Environments draw from it; agents never do.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStepResult {
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Realized request location for the ambulance problem.
    pub arrival: Option<f64>,
}

/// Episodic environment contract. `h` is the 0-based step index.
pub trait Environment: Send + Sync {
    fn space(&self) -> SpaceDescriptor;

    /// Initial state of a new episode.
    fn reset(&self, rng: &mut SimRng) -> Vec<f64>;

    fn step(&self, h: usize, x: &[f64], a: &[f64], rng: &mut SimRng) -> Result<EnvStepResult>;
}

/// How the first state of each episode is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Fixed(f64),
    Uniform,
}

impl InitialState {
    fn draw(&self, rng: &mut SimRng) -> f64 {
        match *self {
            InitialState::Fixed(x) => x,
            InitialState::Uniform => rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitialState::Fixed(x) if !(0.0..=1.0).contains(&x) => Err(Error::Config(format!(
                "initial state {x} outside [0,1]"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKind {
    /// `f(a) = exp(-lambda |a - c|)`
    Laplace,
    /// `f(a) = 1 - lambda (a - c)^2`
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OilConfig {
    pub survey: SurveyKind,
    pub lambda: f64,
    pub well_location: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_oil_start")]
    pub initial_state: InitialState,
}

fn default_oil_start() -> InitialState {
    InitialState::Fixed(0.0)
}

impl OilConfig {
    pub fn laplace(lambda: f64, well_location: f64) -> Self {
        OilConfig {
            survey: SurveyKind::Laplace,
            lambda,
            well_location,
            noise_sigma: 0.0,
            initial_state: default_oil_start(),
        }
    }

    pub fn quadratic(lambda: f64, well_location: f64) -> Self {
        OilConfig {
            survey: SurveyKind::Quadratic,
            ..Self::laplace(lambda, well_location)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.well_location) {
            return Err(Error::Config(format!(
                "well location {} outside [0,1]",
                self.well_location
            )));
        }
        if !(0.0..).contains(&self.lambda) || !(0.0..).contains(&self.noise_sigma) {
            return Err(Error::Config("lambda and noise_sigma must be >= 0".into()));
        }
        self.initial_state.validate()
    }

    /// Survey value `f(a)`.
    pub fn survey_value(&self, a: f64) -> f64 {
        let c = self.well_location;
        match self.survey {
            SurveyKind::Laplace => (-self.lambda * (a - c).abs()).exp(),
            SurveyKind::Quadratic => 1.0 - self.lambda * (a - c).powi(2),
        }
    }

    /// Reward for moving from `x` to `a` given a noise draw.
    pub fn reward(&self, x: f64, a: f64, noise: f64) -> f64 {
        (self.survey_value(a) + noise - (x - a).abs()).clamp(0.0, 1.0)
    }
}

/// Gaussian noise with standard deviation `sigma`, truncated to `[-1, 1]` by rejection.
fn truncated_noise(sigma: f64, rng: &mut SimRng) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let e = sigma * z;
        if (-1.0..=1.0).contains(&e) {
            return e;
        }
    }
}

/// One oil-discovery transition. The agent moves to `a` deterministically.
pub fn oil_step(cfg: &OilConfig, x: f64, a: f64, rng: &mut SimRng) -> EnvStepResult {
    let noise = truncated_noise(cfg.noise_sigma, rng);
    EnvStepResult {
        reward: cfg.reward(x, a, noise),
        next_state: vec![a],
        arrival: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "dist", deny_unknown_fields)]
pub enum ArrivalSpec {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
}

impl ArrivalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalSpec::Uniform { lo, hi } if !(0.0 <= lo && lo < hi && hi <= 1.0) => Err(
                Error::Config(format!("uniform arrival bounds ({lo}, {hi}) invalid")),
            ),
            ArrivalSpec::Beta { a, b } if !(a > 0.0 && b > 0.0) => Err(Error::Config(format!(
                "beta arrival parameters ({a}, {b}) must be positive"
            ))),
            _ => Ok(()),
        }
    }

    /// Inverse CDF, used for deterministic quadrature in the value oracle.
    pub fn quantile(&self, p: f64) -> f64 {
        use statrs::distribution::ContinuousCDF;
        match *self {
            ArrivalSpec::Uniform { lo, hi } => lo + (hi - lo) * p,
            ArrivalSpec::Beta { a, b } => statrs::distribution::Beta::new(a, b)
                .expect("validated beta parameters")
                .inverse_cdf(p),
        }
    }
}

pub fn sample_arrival(spec: &ArrivalSpec, rng: &mut SimRng) -> f64 {
    match *spec {
        ArrivalSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        ArrivalSpec::Beta { a, b } => Beta::new(a, b)
            .expect("validated beta parameters")
            .sample(rng),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbulanceConfig {
    /// Weight `c` on the relocation cost; `1 - c` weighs the cost of reaching the request.
    pub cost_weight: f64,
    /// One arrival distribution per step, or a single entry used for every step.
    pub arrivals: Vec<ArrivalSpec>,
    #[serde(default = "default_ambulance_start")]
    pub initial_state: InitialState,
}

fn default_ambulance_start() -> InitialState {
    InitialState::Fixed(0.5)
}

impl AmbulanceConfig {
    pub fn stationary(cost_weight: f64, arrival: ArrivalSpec) -> Self {
        AmbulanceConfig {
            cost_weight,
            arrivals: vec![arrival],
            initial_state: default_ambulance_start(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cost_weight) {
            return Err(Error::Config(format!(
                "cost weight {} outside [0,1]",
                self.cost_weight
            )));
        }
        if self.arrivals.is_empty() {
            return Err(Error::Config("at least one arrival distribution is required".into()));
        }
        self.arrivals.iter().try_for_each(ArrivalSpec::validate)?;
        self.initial_state.validate()
    }

    /// Arrival distribution at 0-based step `h`.
    pub fn arrival(&self, h: usize) -> &ArrivalSpec {
        if self.arrivals.len() == 1 {
            &self.arrivals[0]
        } else {
            &self.arrivals[h.min(self.arrivals.len() - 1)]
        }
    }

    pub fn reward(&self, x: f64, a: f64, arrival: f64) -> f64 {
        let c = self.cost_weight;
        (1.0 - (c * (x - a).abs() + (1.0 - c) * (arrival - a).abs())).clamp(0.0, 1.0)
    }
}

/// The shifting-uniform setting with five steps and no relocation cost.
pub fn shifting_uniform_preset() -> AmbulanceConfig {
    let u = |lo: f64, hi: f64| ArrivalSpec::Uniform { lo, hi };
    AmbulanceConfig {
        cost_weight: 0.0,
        arrivals: vec![
            u(0.0, 0.25),
            u(0.25, 0.5),
            u(0.5, 0.75),
            u(0.75, 1.0),
            u(0.5 - 0.05, 0.5 + 0.05),
        ],
        initial_state: default_ambulance_start(),
    }
}

/// One ambulance transition: relocate to `a`, then serve a request drawn at step `h`.
pub fn ambulance_step(cfg: &AmbulanceConfig, h: usize, x: f64, a: f64, rng: &mut SimRng) -> EnvStepResult {
    let arrival = sample_arrival(cfg.arrival(h), rng);
    EnvStepResult {
        reward: cfg.reward(x, a, arrival),
        next_state: vec![arrival],
        arrival: Some(arrival),
    }
}

/// Serializable environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EnvSpec {
    Oil(OilConfig),
    Ambulance(AmbulanceConfig),
}

impl EnvSpec {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            EnvSpec::Oil(c) => c.validate(),
            EnvSpec::Ambulance(c) => {
                c.validate()?;
                if c.arrivals.len() != 1 && c.arrivals.len() != horizon {
                    return Err(Error::Config(format!(
                        "{} arrival distributions given for horizon {horizon}",
                        c.arrivals.len()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn space(&self) -> SpaceDescriptor {
        SpaceDescriptor::unit_box(1, 1).expect("1x1 box")
    }
}

impl Environment for EnvSpec {
    fn space(&self) -> SpaceDescriptor {
        EnvSpec::space(self)
    }

    fn reset(&self, rng: &mut SimRng) -> Vec<f64> {
        let init = match self {
            EnvSpec::Oil(c) => &c.initial_state,
            EnvSpec::Ambulance(c) => &c.initial_state,
        };
        vec![init.draw(rng)]
    }

    fn step(&self, h: usize, x: &[f64], a: &[f64], rng: &mut SimRng) -> Result<EnvStepResult> {
        let space = EnvSpec::space(self);
        space.check_state(x)?;
        space.check_action(a)?;
        Ok(match self {
            EnvSpec::Oil(c) => oil_step(c, x[0], a[0], rng),
            EnvSpec::Ambulance(c) => ambulance_step(c, h, x[0], a[0], rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn oil_examples() {
        let cfg = OilConfig::laplace(1.0, 0.75);
        let mut rng = seeded_rng(1);
        let r = oil_step(&cfg, 0.75, 0.75, &mut rng);
        assert_eq!((r.reward, r.next_state.clone()), (1.0, vec![0.75]));
        assert_eq!(oil_step(&cfg, 0.0, 0.75, &mut rng).reward, 0.25);
        let q = OilConfig::quadratic(1.0, 0.75);
        assert_eq!(oil_step(&q, 0.25, 0.25, &mut rng).reward, 0.75);
        // far from a steep quadratic well the survey value is negative and clipped
        let steep = OilConfig::quadratic(50.0, 0.75);
        assert_eq!(steep.reward(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn ambulance_examples() {
        let mut cfg = AmbulanceConfig::stationary(1.0, ArrivalSpec::Beta { a: 5.0, b: 2.0 });
        assert_eq!(cfg.reward(0.3, 0.3, 0.9), 1.0);
        cfg.cost_weight = 0.0;
        assert!((cfg.reward(0.1, 0.5, 0.7) - 0.8).abs() < 1e-15);
        cfg.cost_weight = 0.25;
        assert!((cfg.reward(0.0, 0.4, 0.9) - 0.525).abs() < 1e-15);
    }

    #[test]
    fn shifting_preset_matches_schedule() {
        let p = shifting_uniform_preset();
        assert_eq!(p.arrivals.len(), 5);
        assert_eq!(p.arrivals[0], ArrivalSpec::Uniform { lo: 0.0, hi: 0.25 });
        assert_eq!(p.arrivals[4], ArrivalSpec::Uniform { lo: 0.45, hi: 0.55 });
        assert_eq!(p.cost_weight, 0.0);
        assert!(EnvSpec::Ambulance(p).validate(5).is_ok());
    }

    #[test]
    fn arrival_statistics() {
        let mut rng = seeded_rng(7);
        let degenerate = ArrivalSpec::Uniform { lo: 0.5, hi: 0.5 + 1e-12 };
        assert!((sample_arrival(&degenerate, &mut rng) - 0.5).abs() < 1e-11);

        let beta = ArrivalSpec::Beta { a: 5.0, b: 2.0 };
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_arrival(&beta, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 5.0 / 7.0).abs() < 0.01, "mean {mean}");
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        // scipy: beta(5, 2).median()
        assert!((median - 0.735_550_016_704_34).abs() < 0.01, "median {median}");
        assert!((beta.quantile(0.5) - 0.735_550_016_704_34).abs() < 1e-9);
        assert!((beta.quantile(0.5) - median).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_arrivals() {
        let cfg = shifting_uniform_preset();
        let env = EnvSpec::Ambulance(cfg);
        let run = |seed| {
            let mut rng = seeded_rng(seed);
            (0..20)
                .map(|h| env.step(h % 5, &[0.5], &[0.5], &mut rng).unwrap().next_state[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn config_validation() {
        assert!(OilConfig::laplace(1.0, 1.5).validate().is_err());
        let bad = AmbulanceConfig::stationary(0.5, ArrivalSpec::Uniform { lo: 0.6, hi: 0.2 });
        assert!(bad.validate().is_err());
        let two = AmbulanceConfig {
            arrivals: vec![ArrivalSpec::Beta { a: 1.0, b: 1.0 }; 2],
            ..AmbulanceConfig::stationary(0.5, ArrivalSpec::Beta { a: 1.0, b: 1.0 })
        };
        assert!(EnvSpec::Ambulance(two).validate(5).is_err());
        let env = EnvSpec::Oil(OilConfig::laplace(1.0, 0.5));
        let mut rng = seeded_rng(0);
        assert!(env.step(0, &[0.5], &[1.2], &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn oil_is_deterministic_and_bounded(
            x in 0.0..=1.0f64, a in 0.0..=1.0f64, lambda in 0.0..60.0f64,
            c in 0.0..=1.0f64, sigma in 0.0..2.0f64, seed in any::<u64>(), quad in any::<bool>(),
        ) {
            let mut cfg = if quad { OilConfig::quadratic(lambda, c) } else { OilConfig::laplace(lambda, c) };
            cfg.noise_sigma = sigma;
            let mut rng = seeded_rng(seed);
            let r = oil_step(&cfg, x, a, &mut rng);
            prop_assert_eq!(r.next_state, vec![a]);
            prop_assert!((0.0..=1.0).contains(&r.reward));
        }

        #[test]
        fn ambulance_bounded_and_full_cost_ignores_arrival(
            x in 0.0..=1.0f64, a in 0.0..=1.0f64, c in 0.0..=1.0f64,
            y1 in 0.0..=1.0f64, y2 in 0.0..=1.0f64,
        ) {
            let cfg = AmbulanceConfig::stationary(c, ArrivalSpec::Uniform { lo: 0.0, hi: 1.0 });
            prop_assert!((0.0..=1.0).contains(&cfg.reward(x, a, y1)));
            let full = AmbulanceConfig { cost_weight: 1.0, ..cfg };
            prop_assert_eq!(full.reward(x, a, y1), full.reward(x, a, y2));
            prop_assert_eq!(full.reward(x, a, y1), 1.0 - (x - a).abs());
        }
    }
}
