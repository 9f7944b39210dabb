//! Caching costs: backhaul barrier, storage occupation, content overlap and
//! the long-run average of the instantaneous cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit mass of a density passed to [`mf_overlap`].
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Per-content cost parameters, shared by every content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Storage-cost weight `γ`.
    pub gamma: f64,
    /// Content size `L` (data units).
    pub content_size: f64,
    /// Backhaul capacity `B` (data units per unit time).
    pub backhaul: f64,
    /// Storage size per content `C`.
    pub storage: f64,
    /// Discard rate `e` (data units per unit time).
    pub discard_rate: f64,
    /// Number of contents with asymptotically equal request probability.
    pub n_r: usize,
    /// Tolerance defining that set of contents.
    pub eps_popularity: f64,
    /// Gap `ε_b` kept below the backhaul barrier, as a fraction of `B`.
    pub barrier_margin: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            gamma: 0.25,
            content_size: 1.0,
            backhaul: 1.0,
            storage: 1.0,
            discard_rate: 0.1,
            n_r: 20,
            eps_popularity: 0.01,
            barrier_margin: 1e-3,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("costs.gamma", self.gamma),
            ("costs.content_size", self.content_size),
            ("costs.backhaul", self.backhaul),
            ("costs.storage", self.storage),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(key, format!("must be finite and positive, got {v}")));
            }
        }
        if !self.discard_rate.is_finite() || self.discard_rate < 0.0 {
            return Err(Error::validation("costs.discard_rate", "must be finite and non-negative"));
        }
        if self.n_r == 0 {
            return Err(Error::validation("costs.n_r", "must be at least 1"));
        }
        if !self.eps_popularity.is_finite() || self.eps_popularity < 0.0 {
            return Err(Error::validation("costs.eps_popularity", "must be finite and non-negative"));
        }
        if !(self.barrier_margin > 0.0 && self.barrier_margin < 1.0) {
            return Err(Error::validation("costs.barrier_margin", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Margin `ε_b` kept below the backhaul barrier.
    pub fn backhaul_margin(&self) -> f64 {
        self.barrier_margin * self.backhaul
    }

    /// Largest admissible cache fraction, `(B − ε_b) / L`.
    pub fn max_control(&self) -> f64 {
        (self.backhaul - self.backhaul_margin()) / self.content_size
    }
}

/// `−ln(B − L p)`, or `+∞` once `L p ≥ B`.
pub fn backhaul_cost(p: f64, backhaul: f64, content_size: f64) -> f64 {
    let slack = backhaul - content_size * p;
    if slack <= 0.0 {
        f64::INFINITY
    } else {
        -slack.ln()
    }
}

/// `γ (C − Q) / C`.
pub fn storage_cost(q: f64, storage: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=storage).contains(&q) {
        return Err(Error::Domain(format!("remaining storage {q} outside [0, {storage}]")));
    }
    Ok(gamma * (storage - q) / storage)
}

/// Overlap seen by one SBS given its neighbours' cache fractions.
pub fn empirical_overlap(others: &[f64], storage: f64, n_r: usize) -> f64 {
    others.iter().sum::<f64>() / (storage * n_r as f64)
}

/// Neighbour count `max(0, N − 1)` that scales the mean-field overlap.
pub fn neighbour_factor(request_region_count: usize) -> f64 {
    request_region_count.saturating_sub(1) as f64
}

/// Mean-field overlap `ν_N / (C N_r) · ∬ m p`, with the integral taken by
/// the quadrature `weights` of the grid slice.
pub fn mf_overlap(
    density: &[f64],
    control: &[f64],
    weights: &[f64],
    neighbours: f64,
    storage: f64,
    n_r: usize,
) -> Result<f64> {
    let mut mass = 0.0;
    let mut acc = 0.0;
    for ((&m, &p), &w) in density.iter().zip(control).zip(weights) {
        mass += w * m;
        acc += w * m * p;
    }
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Integrity(format!("density mass {mass} differs from 1")));
    }
    Ok(neighbours * acc / (storage * n_r as f64))
}

/// Instantaneous cost `φ(p)(1 + I^r)/(𝓡 x) + ψ(Q)`. The barrier propagates
/// as `+∞`.
pub fn instantaneous_cost(
    p: f64,
    q: f64,
    x: f64,
    rate: f64,
    overlap: f64,
    params: &CostParams,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("request probability must be positive, got {x}")));
    }
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("rate must be positive, got {rate}")));
    }
    let psi = storage_cost(q, params.storage, params.gamma)?;
    let phi = backhaul_cost(p, params.backhaul, params.content_size);
    Ok(phi * (1.0 + overlap) / (rate * x) + psi)
}

/// Trapezoid integral of uniformly spaced cost samples, or `None` when a
/// sample is not finite.
pub fn lra_cost(samples: &[f64], dt: f64) -> Option<f64> {
    if samples.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if samples.len() < 2 {
        return Some(0.0);
    }
    let inner: f64 = samples[1..samples.len() - 1].iter().sum();
    Some(dt * (inner + 0.5 * (samples[0] + samples[samples.len() - 1])))
}

/// Mean over replications of their LRA costs, excluding flagged ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LraSummary {
    pub mean: f64,
    pub used: usize,
    pub excluded: usize,
}

pub fn summarize_lra(values: &[Option<f64>]) -> LraSummary {
    let used: Vec<f64> = values.iter().flatten().copied().collect();
    let excluded = values.len() - used.len();
    if excluded > 0 {
        log::warn!("{excluded} trajectories hit the backhaul barrier and were excluded");
    }
    let mean = if used.is_empty() {
        f64::NAN
    } else {
        used.iter().sum::<f64>() / used.len() as f64
    };
    LraSummary {
        mean,
        used: used.len(),
        excluded,
    }
}
