//! Natural cubic spline on a uniform grid.

use crate::error::{Error, Result};

/// Natural cubic interpolant of samples on a uniform grid.
///
/// The second derivative vanishes at both ends; between nodes the
/// interpolant and its first derivative are evaluated in closed form.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    t0: f64,
    dt: f64,
    y: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(t0: f64, dt: f64, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Usage("spline needs at least two samples".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Usage("spline grid spacing must be positive".into()));
        }
        let m = second_derivatives(&y, dt);
        Ok(Self { t0, dt, y, m })
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * (self.y.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.y.len();
        let s = (t - self.t0) / self.dt;
        let i = (s.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, t - (self.t0 + self.dt * i as f64))
    }

    /// Interpolated value at `t` (clamped segment outside the grid).
    pub fn value(&self, t: f64) -> f64 {
        let (i, x) = self.locate(t);
        let h = self.dt;
        let a = (h - x) / h;
        let b = x / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// First derivative of the interpolant at `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        let (i, x) = self.locate(t);
        let h = self.dt;
        let a = (h - x) / h;
        let b = x / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

/// Thomas solve of `m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / dt^2`
/// for the interior nodes, with `m[0] = m[n-1] = 0`.
fn second_derivatives(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut diag = vec![4.0; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        rhs[i] = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (dt * dt);
    }
    for i in 1..k {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - m[i + 2]) / diag[i];
    }
    m
}
