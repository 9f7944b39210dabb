//! Backward Hamilton-Jacobi-Bellman sweep for the value function.
//!
//! Advection is explicit upwind on the next time level, the running cost is
//! evaluated with the water-filling control, and diffusion in `x` is
//! implicit. A drift that would push `Q` through a boundary is blocked
//! there, matching the clamped storage dynamics.

use super::control::optimal_control;
use super::fpk::implicit_diffusion;
use super::grid::{FieldKind, Grid, ScalarField};
use super::problem::ContentProblem;
use super::SolverConfig;
use crate::cost::{instantaneous_cost, mf_overlap};
use crate::error::{Error, Result};

/// One-sided upwind derivative of a strided line: forward for positive
/// drift, backward for negative, zero when the needed neighbour is outside.
fn upwind(line: impl Fn(usize) -> f64, k: usize, n: usize, drift: f64, h: f64) -> f64 {
    if drift > 0.0 && k + 1 < n {
        (line(k + 1) - line(k)) / h
    } else if drift < 0.0 && k > 0 {
        (line(k) - line(k - 1)) / h
    } else {
        0.0
    }
}

/// `∂_Q v` for the control: upwind in the direction of the previous storage
/// drift, centred on ties, one-sided at the boundaries.
fn control_gradient(line: impl Fn(usize) -> f64, j: usize, n: usize, drift: f64, h: f64) -> f64 {
    let forward = (j + 1 < n).then(|| (line(j + 1) - line(j)) / h);
    let backward = (j > 0).then(|| (line(j) - line(j - 1)) / h);
    match (forward, backward) {
        (Some(f), Some(b)) => {
            if drift > 0.0 {
                f
            } else if drift < 0.0 {
                b
            } else {
                0.5 * (f + b)
            }
        }
        (Some(f), None) => f,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    }
}

/// Control at every node of time level `n` from the value slice `v_next`.
fn controls_from(
    problem: &ContentProblem,
    grid: &Grid,
    config: &SolverConfig,
    v_next: &[f64],
    previous_control: &[f64],
    overlap: f64,
    out: &mut [f64],
) {
    let nq = grid.nq();
    for i in 0..grid.nx() {
        let x = grid.x[i];
        let row = &v_next[i * nq..(i + 1) * nq];
        for j in 0..nq {
            let drift = problem.q_drift(previous_control[i * nq + j]);
            let dq_v = control_gradient(|k| row[k], j, nq, drift, grid.dq);
            out[i * nq + j] =
                optimal_control(x, problem.rate, overlap, dq_v, &problem.costs, config.grad_eps);
        }
    }
}

/// Solves the value function backward from the terminal value.
///
/// The overlap at each time level comes from the previous Picard iterate's
/// density `m` and control `p_prev`. Returns the value function and the
/// control it induces.
pub fn hjb_backward(
    problem: &ContentProblem,
    grid: &Grid,
    config: &SolverConfig,
    m: &ScalarField,
    p_prev: &ScalarField,
) -> Result<(ScalarField, ScalarField)> {
    let (nt, nx, nq) = (grid.nt(), grid.nx(), grid.nq());
    let mut v = ScalarField::filled(FieldKind::Value, grid, 0.0);
    let mut p = ScalarField::filled(FieldKind::Control, grid, 0.0);
    v.slice_mut(nt - 1).fill(config.terminal_value);

    let overlap_at = |n: usize| {
        mf_overlap(
            m.slice(n),
            p_prev.slice(n),
            grid.weights(),
            problem.neighbours,
            problem.costs.storage,
            problem.costs.n_r,
        )
    };

    let mut control = vec![0.0; grid.slice_len()];
    let last_overlap = overlap_at(nt - 1)?;
    controls_from(problem, grid, config, v.slice(nt - 1), p_prev.slice(nt - 1), last_overlap, &mut control);
    p.slice_mut(nt - 1).copy_from_slice(&control);

    let dt = grid.dt;
    let mut next_slice = vec![0.0; grid.slice_len()];
    for n in (0..nt - 1).rev() {
        next_slice.copy_from_slice(v.slice(n + 1));
        let next = &next_slice;
        let overlap = overlap_at(n)?;
        controls_from(problem, grid, config, next, p_prev.slice(n), overlap, &mut control);

        let current = v.slice_mut(n);
        for i in 0..nx {
            let x = grid.x[i];
            let a = problem.x_drift(x);
            for j in 0..nq {
                let k = i * nq + j;
                let pk = control[k];
                let b = problem.q_drift(pk);
                let cost = instantaneous_cost(pk, grid.q[j], x, problem.rate, overlap, &problem.costs)?;
                let adv_x = a * upwind(|ii| next[ii * nq + j], i, nx, a, grid.dx);
                let adv_q = b * upwind(|jj| next[i * nq + jj], j, nq, b, grid.dq);
                current[k] = next[k] + dt * (cost + adv_x + adv_q);
            }
        }
        implicit_diffusion(grid, problem.diffusion(), current);
        if let Some(k) = current.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!(
                "non-finite value at time level {n}, node (x={}, Q={})",
                grid.x[k / nq],
                grid.q[k % nq]
            )));
        }
        p.slice_mut(n).copy_from_slice(&control);
    }
    Ok((v, p))
}
