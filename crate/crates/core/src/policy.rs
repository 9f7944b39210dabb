//! Caching policies compared in the simulation.

use std::sync::Arc;

use rand::Rng;

use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::solver::MfeSolution;

/// What an SBS knows when it decides how much of each content to cache.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub t: f64,
    /// Observed request probability per content.
    pub x_hat: &'a [f64],
    /// Remaining storage per content.
    pub q: &'a [f64],
    pub rate: f64,
    pub costs: &'a CostParams,
}

pub trait CachingPolicy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Writes the cache fraction of every content into `out`.
    fn decide(&self, ctx: &PolicyContext<'_>, rng: &mut SimRng, out: &mut [f64]);
}

fn bracket_index(nodes: &[f64], v: f64) -> (usize, f64) {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let v = v.clamp(nodes[0], nodes[n - 1]);
    let k = (((v - nodes[0]) / h).floor() as usize).min(n - 2);
    (k, ((v - nodes[k]) / h).clamp(0.0, 1.0))
}

/// Equilibrium control at the nearest time node, bilinear in `(x, Q)` and
/// clamped to the grid.
pub fn interpolate_control(solution: &MfeSolution, t: f64, x: f64, q: f64) -> f64 {
    let g = &solution.grid;
    let n = g.nearest_t(t);
    let (i, fx) = bracket_index(&g.x, x);
    let (j, fq) = bracket_index(&g.q, q);
    let p = &solution.p_star;
    let lo = (1.0 - fq) * p.get(n, i, j) + fq * p.get(n, i, j + 1);
    let hi = (1.0 - fq) * p.get(n, i + 1, j) + fq * p.get(n, i + 1, j + 1);
    (1.0 - fx) * lo + fx * hi
}

/// Follows the mean-field equilibrium control of each content.
#[derive(Debug, Clone)]
pub struct MfPolicy {
    solutions: Vec<Arc<MfeSolution>>,
}

impl MfPolicy {
    /// One solution per content. Refuses unconverged solutions.
    pub fn new(solutions: Vec<Arc<MfeSolution>>) -> Result<Self> {
        if solutions.is_empty() {
            return Err(Error::Domain("mean-field policy needs at least one solution".into()));
        }
        for s in &solutions {
            s.require_converged()?;
        }
        Ok(MfPolicy { solutions })
    }
}

impl CachingPolicy for MfPolicy {
    fn name(&self) -> &'static str {
        "mf"
    }

    fn decide(&self, ctx: &PolicyContext<'_>, _rng: &mut SimRng, out: &mut [f64]) {
        let p_max = ctx.costs.max_control();
        for (j, o) in out.iter_mut().enumerate() {
            let sol = &self.solutions[j.min(self.solutions.len() - 1)];
            *o = interpolate_control(sol, ctx.t, ctx.x_hat[j], ctx.q[j]).clamp(0.0, p_max);
        }
    }
}

/// Popularity-driven rule that ignores overlap: `(1/L)[B − 1/(1 + 𝓡 x)]⁺`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselinePolicy;

pub fn baseline_control(x: f64, rate: f64, costs: &CostParams) -> f64 {
    let level = costs.backhaul - 1.0 / (1.0 + rate * x);
    (level.max(0.0) / costs.content_size).clamp(0.0, costs.max_control())
}

impl CachingPolicy for BaselinePolicy {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn decide(&self, ctx: &PolicyContext<'_>, _rng: &mut SimRng, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(ctx.x_hat) {
            *o = baseline_control(x, ctx.rate, ctx.costs);
        }
    }
}

/// Uniform cache fraction on `[0, (B − ε_b)/L]`, fresh for every content
/// and decision.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl CachingPolicy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&self, ctx: &PolicyContext<'_>, rng: &mut SimRng, out: &mut [f64]) {
        let p_max = ctx.costs.max_control();
        for o in out.iter_mut() {
            *o = rng.random::<f64>() * p_max;
        }
    }
}
