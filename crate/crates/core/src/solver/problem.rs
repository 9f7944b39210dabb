use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::cost::CostParams;
use crate::error::{Error, Result};

/// Initial state distribution of the SBSs for one content: the request
/// probability starts at `x0` and the remaining storage is normal with the
/// given mean and standard deviation, truncated to `[0, C]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    /// Initial request probability `x(0)`.
    pub popularity: f64,
    /// Mean of the initial remaining storage `Q(0)`.
    pub storage_mean: f64,
    /// Standard deviation of `Q(0)`.
    pub storage_std: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState {
            popularity: 0.3,
            storage_mean: 0.7,
            storage_std: 0.05,
        }
    }
}

impl InitialState {
    pub fn validate(&self, storage: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.popularity) {
            return Err(Error::validation("initial.popularity", "must lie in [0, 1]"));
        }
        if !(0.0..=storage).contains(&self.storage_mean) {
            return Err(Error::validation("initial.storage_mean", "must lie in [0, costs.storage]"));
        }
        if !self.storage_std.is_finite() || self.storage_std < 0.0 {
            return Err(Error::validation("initial.storage_std", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Node masses of a point at `value` on a uniform axis, split linearly
/// between the two neighbouring nodes and returned as nodal densities.
fn point_density(nodes: &[f64], weights: &[f64], value: f64) -> Vec<f64> {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let v = value.clamp(nodes[0], nodes[n - 1]);
    let k = (((v - nodes[0]) / h).floor() as usize).min(n - 2);
    let frac = ((v - nodes[k]) / h).clamp(0.0, 1.0);
    let mut out = vec![0.0; n];
    out[k] += (1.0 - frac) / weights[k];
    out[k + 1] += frac / weights[k + 1];
    out
}

fn normal_density(nodes: &[f64], weights: &[f64], mean: f64, std: f64) -> Vec<f64> {
    let raw: Vec<f64> = nodes
        .iter()
        .map(|&q| (-0.5 * ((q - mean) / std).powi(2)).exp())
        .collect();
    let mass: f64 = raw.iter().zip(weights).map(|(r, w)| r * w).sum();
    if !(mass > 0.0) {
        return point_density(nodes, weights, mean);
    }
    raw.into_iter().map(|r| r / mass).collect()
}

/// Everything the equilibrium solver needs for one content.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentProblem {
    /// Long-term mean popularity `μ`.
    pub mu: f64,
    pub reversion_rate: f64,
    pub volatility: f64,
    /// Average rate per unit bandwidth `𝓡`, constant over the horizon.
    pub rate: f64,
    pub costs: CostParams,
    /// Neighbour count scaling the mean-field overlap.
    pub neighbours: f64,
    /// Lower end `x_min` of the popularity axis.
    pub floor_eps: f64,
    pub horizon: f64,
    pub initial: InitialState,
}

impl ContentProblem {
    pub fn validate(&self) -> Result<()> {
        self.costs.validate()?;
        self.initial.validate(self.costs.storage)?;
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Domain(format!("mean popularity {} outside [0, 1]", self.mu)));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::Domain(format!("rate must be finite and positive, got {}", self.rate)));
        }
        for (name, v) in [
            ("reversion rate", self.reversion_rate),
            ("volatility", self.volatility),
            ("neighbour count", self.neighbours),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Popularity drift `r (μ − x)`.
    pub fn x_drift(&self, x: f64) -> f64 {
        self.reversion_rate * (self.mu - x)
    }

    /// Storage drift `e − L p`.
    pub fn q_drift(&self, p: f64) -> f64 {
        self.costs.discard_rate - self.costs.content_size * p
    }

    /// Diffusion coefficient `η² / 2` in `x`.
    pub fn diffusion(&self) -> f64 {
        0.5 * self.volatility * self.volatility
    }

    /// Largest drift speeds on the grid, for the CFL bound.
    pub fn max_speeds(&self) -> (f64, f64) {
        let a = self.reversion_rate * (self.mu - self.floor_eps).abs().max((1.0 - self.mu).abs());
        let e = self.costs.discard_rate;
        let b = e.max((self.costs.content_size * self.costs.max_control() - e).abs());
        (a, b)
    }

    /// Builds a grid for this problem and checks the CFL bound on it.
    pub fn grid(&self, nt: usize, nx: usize, nq: usize) -> Result<Grid> {
        let grid = Grid::new(self.horizon, nt, self.floor_eps, nx, self.costs.storage, nq)?;
        let (a, b) = self.max_speeds();
        grid.check_cfl(a, b)?;
        Ok(grid)
    }

    /// Initial density `m0` on one grid slice.
    pub fn initial_density(&self, grid: &Grid) -> Vec<f64> {
        let mx = point_density(&grid.x, grid.x_weights(), self.initial.popularity);
        let mq = if self.initial.storage_std > 0.0 {
            normal_density(
                &grid.q,
                grid.q_weights(),
                self.initial.storage_mean,
                self.initial.storage_std,
            )
        } else {
            point_density(&grid.q, grid.q_weights(), self.initial.storage_mean)
        };
        mx.iter()
            .flat_map(|&a| mq.iter().map(move |&b| a * b))
            .collect()
    }
}
