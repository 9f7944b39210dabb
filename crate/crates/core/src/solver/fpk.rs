//! Forward Fokker-Planck transport of the SBS state density.
//!
//! Finite-volume form on the vertex-centred grid: MUSCL fluxes with a van
//! Leer limiter, SSP-RK2 in time for the drifts, then backward Euler for the
//! diffusion in `x`. Boundary faces carry no flux, so the quadrature mass is
//! conserved to round-off.

use super::grid::{solve_tridiagonal, FieldKind, Grid, ScalarField};
use super::problem::ContentProblem;
use crate::cost::MASS_TOLERANCE;
use crate::error::{Error, Result};

fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Limited slope of a strided line of node values; zero at the ends.
fn slope(u: &[f64], base: usize, stride: usize, k: usize, n: usize) -> f64 {
    if k == 0 || k == n - 1 {
        return 0.0;
    }
    let c = u[base + k * stride];
    van_leer(c - u[base + (k - 1) * stride], u[base + (k + 1) * stride] - c)
}

/// Adds `−∂(vel · u)/∂s` along one strided line into `out`.
#[allow(clippy::too_many_arguments)]
fn transport_line(
    u: &[f64],
    base: usize,
    stride: usize,
    n: usize,
    face_velocity: impl Fn(usize) -> f64,
    volumes: &[f64],
    out: &mut [f64],
) {
    let mut left_flux = 0.0;
    for k in 0..n {
        let right_flux = if k + 1 < n {
            let vel = face_velocity(k);
            if vel >= 0.0 {
                vel * (u[base + k * stride] + 0.5 * slope(u, base, stride, k, n))
            } else {
                vel * (u[base + (k + 1) * stride] - 0.5 * slope(u, base, stride, k + 1, n))
            }
        } else {
            0.0
        };
        out[base + k * stride] -= (right_flux - left_flux) / volumes[k];
        left_flux = right_flux;
    }
}

/// Transport operator `−∇·(b m)` for drift `(r(μ − x), e − L p)`.
fn transport(problem: &ContentProblem, grid: &Grid, control: &[f64], m: &[f64], out: &mut [f64]) {
    let (nx, nq) = (grid.nx(), grid.nq());
    out.iter_mut().for_each(|v| *v = 0.0);
    let half = 0.5 * grid.dx;
    for j in 0..nq {
        transport_line(
            m,
            j,
            nq,
            nx,
            |i| problem.x_drift(grid.x[i] + half),
            grid.x_weights(),
            out,
        );
    }
    for i in 0..nx {
        let base = i * nq;
        transport_line(
            m,
            base,
            1,
            nq,
            |j| 0.5 * (problem.q_drift(control[base + j]) + problem.q_drift(control[base + j + 1])),
            grid.q_weights(),
            out,
        );
    }
}

/// Backward-Euler step of `∂_t u = κ ∂²_x u` with no-flux ends, applied to
/// every `Q` column of a slice. The same symmetric operator serves the value
/// function, where it imposes a zero normal derivative.
pub(crate) fn implicit_diffusion(grid: &Grid, coeff: f64, slice: &mut [f64]) {
    if coeff == 0.0 {
        return;
    }
    let (nx, nq) = (grid.nx(), grid.nq());
    let k = coeff * grid.dt / grid.dx;
    let w = grid.x_weights();
    let sub: Vec<f64> = (0..nx).map(|i| if i == 0 { 0.0 } else { -k }).collect();
    let sup: Vec<f64> = (0..nx).map(|i| if i + 1 == nx { 0.0 } else { -k }).collect();
    let diag: Vec<f64> = (0..nx)
        .map(|i| w[i] + k * if i == 0 || i + 1 == nx { 1.0 } else { 2.0 })
        .collect();
    let mut rhs = vec![0.0; nx];
    let mut scratch = vec![0.0; nx];
    for j in 0..nq {
        for i in 0..nx {
            rhs[i] = w[i] * slice[i * nq + j];
        }
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs, &mut scratch);
        for i in 0..nx {
            slice[i * nq + j] = rhs[i];
        }
    }
}

/// One time step of the density under the control slice `control`.
pub fn fpk_step(problem: &ContentProblem, grid: &Grid, control: &[f64], m: &[f64]) -> Vec<f64> {
    let len = m.len();
    let dt = grid.dt;
    let mut rate = vec![0.0; len];
    transport(problem, grid, control, m, &mut rate);
    let stage: Vec<f64> = m.iter().zip(&rate).map(|(u, r)| u + dt * r).collect();
    transport(problem, grid, control, &stage, &mut rate);
    let mut next: Vec<f64> = m
        .iter()
        .zip(&stage)
        .zip(&rate)
        .map(|((u, s), r)| 0.5 * u + 0.5 * (s + dt * r))
        .collect();
    implicit_diffusion(grid, problem.diffusion(), &mut next);
    next
}

/// Checks positivity and unit mass of one density slice.
pub fn check_density(grid: &Grid, slice: &[f64], level: usize) -> Result<()> {
    let mass = grid.integrate(slice);
    if !mass.is_finite() || (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Integrity(format!(
            "mass {mass:.12} at time level {level} differs from 1"
        )));
    }
    let peak = slice.iter().fold(0.0f64, |a, &b| a.max(b));
    if let Some(v) = slice.iter().find(|&&v| v < -1e-12 * peak.max(1.0)) {
        return Err(Error::Integrity(format!(
            "negative density {v:e} at time level {level}"
        )));
    }
    Ok(())
}

/// Evolves `m0` forward under the control field `p`, checking mass and
/// positivity at every time level.
pub fn fpk_forward(problem: &ContentProblem, grid: &Grid, p: &ScalarField, m0: &[f64]) -> Result<ScalarField> {
    let mut m = ScalarField::filled(FieldKind::Density, grid, 0.0);
    check_density(grid, m0, 0)?;
    m.slice_mut(0).copy_from_slice(m0);
    for n in 0..grid.nt() - 1 {
        let mut next = fpk_step(problem, grid, p.slice(n), m.slice(n));
        check_density(grid, &next, n + 1)?;
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        m.slice_mut(n + 1).copy_from_slice(&next);
    }
    Ok(m)
}
