use std::path::Path;

use super::MfeSolution;
use crate::error::Result;

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,x,Q,v,m,p` rows in `(t, x, Q)` row-major order.
pub fn write_solution_csv(solution: &MfeSolution, path: &Path) -> Result<()> {
    let g = &solution.grid;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "Q", "v", "m", "p"])?;
    for n in 0..g.nt() {
        for i in 0..g.nx() {
            for j in 0..g.nq() {
                w.write_record([
                    num(g.t[n]),
                    num(g.x[i]),
                    num(g.q[j]),
                    num(solution.v_star.get(n, i, j)),
                    num(solution.m_star.get(n, i, j)),
                    num(solution.p_star.get(n, i, j)),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals_csv(solution: &MfeSolution, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "residual"])?;
    for (k, r) in solution.residual_history.iter().enumerate() {
        w.write_record([(k + 1).to_string(), num(*r)])?;
    }
    w.flush()?;
    Ok(())
}
