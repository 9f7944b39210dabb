//! Water-filling caching control and the brute-force checks behind it.

use crate::cost::{backhaul_cost, CostParams};

/// Default grid step of the brute-force control search.
pub const SEARCH_STEP: f64 = 1e-3;

/// Tolerance on negative second differences in the convexity audit,
/// relative to the bracket's magnitude.
const CONVEXITY_TOL: f64 = 1e-8;

/// Part of the Hamiltonian that depends on the control:
/// `φ(p)(1 + I^r)/(𝓡 x) + (e − L p) ∂_Q v`.
pub fn bracket(p: f64, x: f64, rate: f64, overlap: f64, dq_v: f64, costs: &CostParams) -> f64 {
    backhaul_cost(p, costs.backhaul, costs.content_size) * (1.0 + overlap) / (rate * x)
        + (costs.discard_rate - costs.content_size * p) * dq_v
}

/// Closed-form minimiser of [`bracket`] over `[0, (B − ε_b)/L]`:
/// `(1/L)[B − (1 + I^r)/(𝓡 x ∂_Q v)]⁺`, and zero whenever `∂_Q v` is not
/// above `grad_eps`.
pub fn optimal_control(
    x: f64,
    rate: f64,
    overlap: f64,
    dq_v: f64,
    costs: &CostParams,
    grad_eps: f64,
) -> f64 {
    if !(dq_v > grad_eps) {
        return 0.0;
    }
    let level = costs.backhaul - (1.0 + overlap) / (rate * x * dq_v);
    (level.max(0.0) / costs.content_size).clamp(0.0, costs.max_control())
}

/// Candidate controls `{0, step, 2 step, …}` up to `(B − ε_b)/L`, with the
/// upper bound appended when the step does not land on it.
pub fn control_candidates(costs: &CostParams, step: f64) -> Vec<f64> {
    let p_max = costs.max_control();
    let n = (p_max / step).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if p_max - out[n] > 1e-12 {
        out.push(p_max);
    }
    out
}

/// Minimiser of [`bracket`] over [`control_candidates`].
pub fn grid_search_control(
    x: f64,
    rate: f64,
    overlap: f64,
    dq_v: f64,
    costs: &CostParams,
    step: f64,
) -> f64 {
    control_candidates(costs, step)
        .into_iter()
        .map(|p| (p, bracket(p, x, rate, overlap, dq_v, costs)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .unwrap_or(0.0)
}

/// Whether [`bracket`] is convex on the candidate grid (no second
/// difference below `−1e-8` times the bracket's magnitude).
pub fn bracket_is_convex(x: f64, rate: f64, overlap: f64, dq_v: f64, costs: &CostParams, step: f64) -> bool {
    let values: Vec<f64> = control_candidates(costs, step)
        .into_iter()
        .map(|p| bracket(p, x, rate, overlap, dq_v, costs))
        .collect();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    values
        .windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] >= -CONVEXITY_TOL * scale)
}

/// Closed-form control, replaced by the grid-search minimiser at states
/// where the convexity audit fails. Returns the control and whether the
/// fallback was used.
pub fn audited_control(
    x: f64,
    rate: f64,
    overlap: f64,
    dq_v: f64,
    costs: &CostParams,
    grad_eps: f64,
    step: f64,
) -> (f64, bool) {
    if bracket_is_convex(x, rate, overlap, dq_v, costs, step) {
        (optimal_control(x, rate, overlap, dq_v, costs, grad_eps), false)
    } else {
        log::warn!(
            "control bracket not convex at x={x}, rate={rate}, overlap={overlap}, dQ v={dq_v}; using grid search"
        );
        (grid_search_control(x, rate, overlap, dq_v, costs, step), true)
    }
}
