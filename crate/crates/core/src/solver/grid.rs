use crate::error::{Error, Result};

/// Largest admissible Courant number of one explicit transport stage.
pub const MAX_COURANT: f64 = 0.5;

/// Vertex-centred tensor grid on `[0, T] × [x_min, 1] × [0, C]`.
///
/// Node `k` of a spatial axis owns the control volume between its two
/// neighbouring midpoints, so boundary nodes own half cells. The same
/// volumes are the trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    pub dq: f64,
    wx: Vec<f64>,
    wq: Vec<f64>,
    weights: Vec<f64>,
}

fn axis(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|k| lo + k as f64 * h).collect();
    nodes[n - 1] = hi;
    (nodes, h)
}

fn volumes(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = h / 2.0;
    w[n - 1] = h / 2.0;
    w
}

impl Grid {
    pub fn new(horizon: f64, nt: usize, x_min: f64, nx: usize, storage: f64, nq: usize) -> Result<Self> {
        for (key, n) in [("solver.nt", nt), ("solver.nx", nx), ("solver.nq", nq)] {
            if n < 3 {
                return Err(Error::validation(key, format!("need at least 3 nodes, got {n}")));
            }
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation("simulation.horizon", "must be finite and positive"));
        }
        if !(0.0..1.0).contains(&x_min) {
            return Err(Error::validation("demand.ipi.floor_eps", "must lie in [0, 1)"));
        }
        if !(storage > 0.0) || !storage.is_finite() {
            return Err(Error::validation("costs.storage", "must be finite and positive"));
        }
        let (t, dt) = axis(0.0, horizon, nt);
        let (x, dx) = axis(x_min, 1.0, nx);
        let (q, dq) = axis(0.0, storage, nq);
        let wx = volumes(nx, dx);
        let wq = volumes(nq, dq);
        let weights = wx
            .iter()
            .flat_map(|&a| wq.iter().map(move |&b| a * b))
            .collect();
        Ok(Grid {
            t,
            x,
            q,
            dt,
            dx,
            dq,
            wx,
            wq,
            weights,
        })
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nq(&self) -> usize {
        self.q.len()
    }

    /// Number of nodes in one time slice.
    pub fn slice_len(&self) -> usize {
        self.nx() * self.nq()
    }

    pub fn x_weights(&self) -> &[f64] {
        &self.wx
    }

    pub fn q_weights(&self) -> &[f64] {
        &self.wq
    }

    /// Quadrature weights of one `(x, Q)` slice, indexed `i * nq + j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, slice: &[f64]) -> f64 {
        slice.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Courant number of one explicit transport stage for the given
    /// maximum drift speeds.
    pub fn courant(&self, speed_x: f64, speed_q: f64) -> f64 {
        self.dt * (speed_x.abs() / self.dx + speed_q.abs() / self.dq)
    }

    pub fn check_cfl(&self, speed_x: f64, speed_q: f64) -> Result<()> {
        let c = self.courant(speed_x, speed_q);
        if c > MAX_COURANT {
            let needed = (self.t[self.nt() - 1] * c / MAX_COURANT).ceil() as usize + 1;
            return Err(Error::Cfl(format!(
                "Courant number {c:.3} exceeds {MAX_COURANT}; use at least {needed} time nodes"
            )));
        }
        Ok(())
    }

    /// Index of the time node nearest to `t`, clamped to the grid.
    pub fn nearest_t(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.nt() - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Value,
    Density,
    Control,
}

/// A scalar field on the space-time grid, stored row-major in `(t, x, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub kind: FieldKind,
    nt: usize,
    nx: usize,
    nq: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn filled(kind: FieldKind, grid: &Grid, value: f64) -> Self {
        ScalarField {
            kind,
            nt: grid.nt(),
            nx: grid.nx(),
            nq: grid.nq(),
            data: vec![value; grid.nt() * grid.slice_len()],
        }
    }

    /// Field whose every time level equals `slice`.
    pub fn constant_in_time(kind: FieldKind, grid: &Grid, slice: &[f64]) -> Self {
        assert_eq!(slice.len(), grid.slice_len());
        let mut data = Vec::with_capacity(grid.nt() * slice.len());
        for _ in 0..grid.nt() {
            data.extend_from_slice(slice);
        }
        ScalarField {
            kind,
            nt: grid.nt(),
            nx: grid.nx(),
            nq: grid.nq(),
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nt, self.nx, self.nq)
    }

    pub fn index(&self, n: usize, i: usize, j: usize) -> usize {
        n * self.nx * self.nq + i * self.nq + j
    }

    pub fn get(&self, n: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(n, i, j)]
    }

    pub fn set(&mut self, n: usize, i: usize, j: usize, v: f64) {
        let k = self.index(n, i, j);
        self.data[k] = v;
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let len = self.nx * self.nq;
        &self.data[n * len..(n + 1) * len]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.nx * self.nq;
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// `sup |self − other|`.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `ω self + (1 − ω) previous`, in place.
    pub fn relax_towards(&mut self, previous: &ScalarField, omega: f64) {
        for (a, b) in self.data.iter_mut().zip(&previous.data) {
            *a = omega * *a + (1.0 - omega) * b;
        }
    }

    /// Marginal over `x` of time level `n`, as a density in `Q`.
    pub fn q_marginal(&self, grid: &Grid, n: usize) -> Vec<f64> {
        let s = self.slice(n);
        let mut out = vec![0.0; self.nq];
        for (i, wx) in grid.x_weights().iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += wx * s[i * self.nq + j];
            }
        }
        out
    }
}

/// Solves `A u = d` for tridiagonal `A` with sub-diagonal `a`, diagonal `b`
/// and super-diagonal `c`. `a[0]` and `c[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for k in 1..n {
        let denom = b[k] - a[k] * scratch[k - 1];
        scratch[k] = c[k] / denom;
        d[k] = (d[k] - a[k] * d[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        d[k] -= scratch[k] * d[k + 1];
    }
}
