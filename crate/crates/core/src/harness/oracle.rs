//! Backward value iteration on a uniform state-action grid, used as the
//! reference `V*` / `Q*` for regret and optimism checks.
//!
//! Expectations over ambulance arrivals and oil noise use midpoint quadrature
//! on the inverse CDF, so the oracle is deterministic.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::env::{EnvSpec, OilConfig};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    resolution: usize,
    horizon: usize,
    /// `values[h][i] = V*_{h+1}(x_i)` for 0-based `h`, with a final row of zeros.
    values: Vec<Vec<f64>>,
    /// `q[h][i * m + j] = Q*_{h+1}(x_i, a_j)`.
    q: Vec<Vec<f64>>,
}

impl OracleGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Grid coordinate of index `i`.
    pub fn point(&self, i: usize) -> f64 {
        grid_point(i, self.resolution)
    }

    /// `V*` at 0-based step `h` on grid point `i`; `h = H` is the terminal row.
    pub fn value_at_grid(&self, h: usize, i: usize) -> f64 {
        self.values[h][i]
    }

    pub fn q_at_grid(&self, h: usize, i: usize, j: usize) -> f64 {
        self.q[h][i * self.resolution + j]
    }

    /// `V*` at 0-based step `h`, linearly interpolated between grid points.
    pub fn value(&self, h: usize, x: f64) -> f64 {
        interpolate(&self.values[h], x)
    }

    /// Largest grid-neighbour slope of `V*` at step `h`.
    pub fn max_slope(&self, h: usize) -> f64 {
        let step = 1.0 / (self.resolution - 1) as f64;
        self.values[h]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / step)
            .fold(0.0, f64::max)
    }
}

fn grid_point(i: usize, m: usize) -> f64 {
    i as f64 / (m - 1) as f64
}

fn interpolate(row: &[f64], x: f64) -> f64 {
    let m = row.len();
    let pos = x.clamp(0.0, 1.0) * (m - 1) as f64;
    let i = (pos.floor() as usize).min(m - 2);
    let w = pos - i as f64;
    if w == 0.0 {
        row[i]
    } else {
        (1.0 - w) * row[i] + w * row[i + 1]
    }
}

/// Quadrature nodes for Gaussian noise truncated to `[-1, 1]`.
fn noise_nodes(cfg: &OilConfig, n: usize) -> Vec<f64> {
    if cfg.noise_sigma == 0.0 {
        return vec![0.0];
    }
    let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
    let (lo, hi) = (normal.cdf(-1.0), normal.cdf(1.0));
    (0..n)
        .map(|k| normal.inverse_cdf(lo + (hi - lo) * (k as f64 + 0.5) / n as f64).clamp(-1.0, 1.0))
        .collect()
}

/// Computes `Q*` and `V*` on an `m x m` grid by backward induction.
pub fn compute_oracle(spec: &EnvSpec, horizon: usize, resolution: usize, quadrature_nodes: usize) -> Result<OracleGrid> {
    compute_oracle_with(spec, horizon, resolution, quadrature_nodes, Execution::default())
}

pub fn compute_oracle_with(
    spec: &EnvSpec,
    horizon: usize,
    resolution: usize,
    quadrature_nodes: usize,
    exec: Execution,
) -> Result<OracleGrid> {
    let m = resolution;
    if m < 2 || quadrature_nodes == 0 || horizon == 0 {
        return Err(Error::InvalidInput(
            "oracle needs resolution >= 2, quadrature_nodes >= 1 and horizon >= 1".into(),
        ));
    }
    spec.validate(horizon)?;
    let mut values = vec![vec![0.0; m]; horizon + 1];
    let mut q = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let next = &values[h + 1];
        let rows: Vec<Vec<f64>> = match spec {
            EnvSpec::Oil(cfg) => {
                let noise = noise_nodes(cfg, quadrature_nodes);
                par::map_range(m, exec, |i| {
                    let x = grid_point(i, m);
                    (0..m)
                        .map(|j| {
                            let a = grid_point(j, m);
                            let r = noise.iter().map(|&e| cfg.reward(x, a, e)).sum::<f64>()
                                / noise.len() as f64;
                            // the agent lands exactly on grid point j
                            r + next[j]
                        })
                        .collect()
                })
            }
            EnvSpec::Ambulance(cfg) => {
                let n = quadrature_nodes;
                let arrivals: Vec<f64> = (0..n)
                    .map(|k| cfg.arrival(h).quantile((k as f64 + 0.5) / n as f64))
                    .collect();
                let future = arrivals.iter().map(|&y| interpolate(next, y)).sum::<f64>() / n as f64;
                par::map_range(m, exec, |i| {
                    let x = grid_point(i, m);
                    (0..m)
                        .map(|j| {
                            let a = grid_point(j, m);
                            let r = arrivals.iter().map(|&y| cfg.reward(x, a, y)).sum::<f64>() / n as f64;
                            r + future
                        })
                        .collect()
                })
            }
        };
        values[h] = rows
            .iter()
            .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
            .collect();
        q[h] = rows.concat();
    }
    Ok(OracleGrid {
        resolution: m,
        horizon,
        values,
        q,
    })
}
