//! Mean-field equilibrium solver: backward HJB and forward Fokker-Planck
//! equations coupled through a damped Picard iteration.

pub mod control;
pub mod export;
pub mod fpk;
pub mod grid;
pub mod hjb;
pub mod problem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use control::{audited_control, bracket, grid_search_control, optimal_control};
pub use fpk::fpk_forward;
pub use grid::{FieldKind, Grid, ScalarField};
pub use hjb::hjb_backward;
pub use problem::{ContentProblem, InitialState};

/// Numerical settings of the equilibrium solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stopping threshold on `max(sup |Δv|, sup |Δm|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Picard damping `ω` applied to the density.
    pub damping: f64,
    /// Terminal value `v(T, ·, ·)`.
    pub terminal_value: f64,
    /// Smallest `∂_Q v` for which the control is allowed to be positive.
    pub grad_eps: f64,
    pub nt: usize,
    pub nx: usize,
    pub nq: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-4,
            max_iterations: 200,
            damping: 0.5,
            terminal_value: 0.0,
            grad_eps: 1e-8,
            nt: 201,
            nx: 41,
            nq: 41,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("solver.tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver.max_iterations", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::validation("solver.damping", "must lie in (0, 1]"));
        }
        if !self.terminal_value.is_finite() {
            return Err(Error::validation("solver.terminal_value", "must be finite"));
        }
        if !(self.grad_eps >= 0.0) || !self.grad_eps.is_finite() {
            return Err(Error::validation("solver.grad_eps", "must be finite and non-negative"));
        }
        for (key, n) in [("solver.nt", self.nt), ("solver.nx", self.nx), ("solver.nq", self.nq)] {
            if n < 3 {
                return Err(Error::validation(key, "need at least 3 nodes"));
            }
        }
        Ok(())
    }
}

/// Equilibrium value function, density and control, with diagnostics.
#[derive(Debug, Clone)]
pub struct MfeSolution {
    pub grid: Grid,
    pub v_star: ScalarField,
    pub m_star: ScalarField,
    pub p_star: ScalarField,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
}

impl MfeSolution {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Fails with [`Error::NotConverged`] unless the iteration converged.
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.final_residual(),
            })
        }
    }
}

/// Damped Picard iteration for the mean-field equilibrium of one content.
///
/// Starts from the initial density held constant in time and the zero
/// control. A run that exhausts `max_iterations` returns its last iterate
/// with `converged = false`.
pub fn solve_mfe(problem: &ContentProblem, grid: &Grid, config: &SolverConfig) -> Result<MfeSolution> {
    problem.validate()?;
    config.validate()?;
    let (a, b) = problem.max_speeds();
    grid.check_cfl(a, b)?;

    let m0 = problem.initial_density(grid);
    let mut m_prev = ScalarField::constant_in_time(FieldKind::Density, grid, &m0);
    let mut p_prev = ScalarField::filled(FieldKind::Control, grid, 0.0);
    let mut v_prev = ScalarField::filled(FieldKind::Value, grid, 0.0);
    let mut history = Vec::new();
    let mut converged = false;

    for k in 1..=config.max_iterations {
        let (v, p) = hjb_backward(problem, grid, config, &m_prev, &p_prev)?;
        let mut m = fpk_forward(problem, grid, &p, &m0)?;
        m.relax_towards(&m_prev, config.damping);
        let residual = v.sup_distance(&v_prev).max(m.sup_distance(&m_prev));
        if !residual.is_finite() {
            return Err(Error::Solver(format!("non-finite residual at iteration {k}")));
        }
        log::debug!("picard iteration {k}: residual {residual:.3e}");
        history.push(residual);
        v_prev = v;
        p_prev = p;
        m_prev = m;
        if residual < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "equilibrium not converged after {} iterations (residual {:.3e})",
            history.len(),
            history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(MfeSolution {
        grid: grid.clone(),
        v_star: v_prev,
        m_star: m_prev,
        p_star: p_prev,
        iterations: history.len(),
        residual_history: history,
        converged,
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostParams;
    use approx::assert_relative_eq;

    fn problem() -> ContentProblem {
        ContentProblem {
            mu: 0.05,
            reversion_rate: 1.0,
            volatility: 0.1,
            rate: 0.05,
            costs: CostParams::default(),
            neighbours: 2.0,
            floor_eps: 1e-6,
            horizon: 1.0,
            initial: InitialState::default(),
        }
    }

    fn coarse() -> SolverConfig {
        SolverConfig {
            nt: 101,
            nx: 21,
            nq: 21,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn null_problem_has_zero_value() {
        let mut pr = problem();
        pr.reversion_rate = 0.0;
        pr.volatility = 0.0;
        pr.costs.discard_rate = 0.0;
        let cfg = coarse();
        let g = pr.grid(cfg.nt, cfg.nx, cfg.nq).unwrap();
        let m = ScalarField::constant_in_time(FieldKind::Density, &g, &pr.initial_density(&g));
        let p0 = ScalarField::filled(FieldKind::Control, &g, 0.0);
        let (v, p) = hjb_backward(&pr, &g, &cfg, &m, &p0).unwrap();
        let top = g.nq() - 1;
        for n in 0..g.nt() {
            for i in 0..g.nx() {
                assert_eq!(v.get(n, i, top), 0.0);
                assert_eq!(p.get(n, i, top), 0.0);
            }
        }
    }

    #[test]
    fn pure_storage_cost_integrates_linearly() {
        let mut pr = problem();
        pr.reversion_rate = 0.0;
        pr.volatility = 0.0;
        pr.costs.discard_rate = 0.0;
        let cfg = coarse();
        let g = pr.grid(cfg.nt, cfg.nx, cfg.nq).unwrap();
        let m = ScalarField::constant_in_time(FieldKind::Density, &g, &pr.initial_density(&g));
        let p0 = ScalarField::filled(FieldKind::Control, &g, 0.0);
        let (v, p) = hjb_backward(&pr, &g, &cfg, &m, &p0).unwrap();
        let gamma = pr.costs.gamma;
        for n in 0..g.nt() {
            for i in 0..g.nx() {
                for j in 0..g.nq() {
                    let exact = gamma * (1.0 - g.q[j]) * (1.0 - g.t[n]);
                    assert_relative_eq!(v.get(n, i, j), exact, epsilon = 1e-12);
                    assert_eq!(p.get(n, i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn infinite_tolerance_stops_after_one_iteration() {
        let pr = problem();
        let cfg = SolverConfig {
            tolerance: f64::INFINITY,
            ..coarse()
        };
        let g = pr.grid(cfg.nt, cfg.nx, cfg.nq).unwrap();
        let sol = solve_mfe(&pr, &g, &cfg).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
    }

    #[test]
    fn equilibrium_converges_with_admissible_fields() {
        let pr = problem();
        let cfg = coarse();
        let g = pr.grid(cfg.nt, cfg.nx, cfg.nq).unwrap();
        let sol = solve_mfe(&pr, &g, &cfg).unwrap();
        assert!(sol.converged);
        assert!(sol.final_residual() < cfg.tolerance);
        assert!(sol.residual_history.iter().all(|r| r.is_finite()));
        let p_max = pr.costs.max_control();
        assert!(sol.p_star.values().iter().all(|&p| (0.0..=p_max).contains(&p)));
        assert!(sol.v_star.values().iter().all(|v| v.is_finite()));
        for n in 0..g.nt() {
            assert!((g.integrate(sol.m_star.slice(n)) - 1.0).abs() < 1e-6);
            assert!(sol.m_star.slice(n).iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn unconverged_run_reports_best_iterate() {
        let pr = problem();
        let cfg = SolverConfig {
            max_iterations: 2,
            tolerance: 1e-14,
            ..coarse()
        };
        let g = pr.grid(cfg.nt, cfg.nx, cfg.nq).unwrap();
        let sol = solve_mfe(&pr, &g, &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
        assert!(matches!(sol.require_converged(), Err(Error::NotConverged { .. })));
    }
}
