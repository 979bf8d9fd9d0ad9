//! Per-path propagation: the time-ordered product of exact SU(2) factors.
//!
//! Each grid interval is split into substeps sized so that no factor
//! rotates the state by more than a configurable angle. Within a substep
//! the field is sampled at the midpoint, except that the phase rates are
//! taken as exact finite increments of `sigma` and `theta` across the
//! substep; this keeps the scheme second order even where `sigma` grows
//! like a square root out of a zero (amplitude damping at the initial
//! time). Substep boundaries follow a square-root spacing next to such a
//! cusp and are uniform elsewhere.

use crate::channels::Trajectory;
use crate::error::{Error, Result};
use crate::qubit::{su2_step, FieldSample, PureState};
use crate::synthesis::{PathDraw, PhaseProcess, SynthesisOptions};

pub use crate::qubit::path_infidelity;

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Usage("grid needs at least 2 points".into()));
        }
        if !(end > start) {
            return Err(Error::Usage("grid end must exceed start".into()));
        }
        Ok(Self { start, end, points })
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / (self.points - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.end
                } else {
                    self.start + dt * i as f64
                }
            })
            .collect()
    }
}

/// Step-control options for the propagator.
#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    pub synthesis: SynthesisOptions,
    /// Upper bound on the rotation angle of a single SU(2) factor.
    pub max_step_angle: f64,
    /// Lower bound on substeps per grid interval.
    pub min_substeps: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            synthesis: SynthesisOptions::default(),
            max_step_angle: 1e-3,
            min_substeps: 1,
        }
    }
}

impl PropagationOptions {
    pub fn with_max_step_angle(mut self, angle: f64) -> Self {
        self.max_step_angle = angle;
        self
    }

    pub fn halved(mut self) -> Self {
        self.max_step_angle *= 0.5;
        self.min_substeps *= 2;
        self
    }
}

/// Numerical health of one propagated path.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathStats {
    /// Worst deviation of the state norm from one across the grid.
    pub norm_drift: f64,
    /// Worst pre-projection imaginary residue of the field z component.
    pub max_bz_residue: f64,
    /// Total number of SU(2) factors composed.
    pub steps: u64,
}

/// One propagated sample path on a grid.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub draw: PathDraw,
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    pub fields: Vec<FieldSample>,
    pub stats: PathStats,
}

fn mixing_angle(traj: &Trajectory, t: f64) -> Result<f64> {
    let p = traj.point(t)?;
    let rho00 = p.rho00.clamp(0.0, 1.0);
    Ok((1.0 - rho00).sqrt().atan2(rho00.sqrt()))
}

/// Substep spacing within one grid interval.
enum Spacing {
    Uniform,
    SqrtFromStart,
    SqrtFromEnd,
}

fn boundary(spacing: &Spacing, ta: f64, dt: f64, j: usize, m: usize) -> f64 {
    match spacing {
        Spacing::Uniform => ta + dt * j as f64 / m as f64,
        Spacing::SqrtFromStart => {
            let f = j as f64 / m as f64;
            ta + dt * f * f
        }
        Spacing::SqrtFromEnd => {
            let f = (m - j) as f64 / m as f64;
            ta + dt * (1.0 - f * f)
        }
    }
}

/// Propagate one path, handing each on-grid state to `visit`.
pub fn propagate_with<F>(
    traj: &Trajectory,
    grid: &TimeGrid,
    draw: &PathDraw,
    opts: &PropagationOptions,
    mut visit: F,
) -> Result<PathStats>
where
    F: FnMut(usize, f64, &PureState),
{
    let proc = PhaseProcess::new(traj, opts.synthesis);
    let times = grid.times();
    traj.check_domain(grid.start)?;
    traj.check_domain(grid.end)?;

    let located = |e: Error, t: f64| match e {
        Error::Singularity { detail, .. } => Error::Singularity {
            path_id: draw.id,
            t,
            detail,
        },
        other => other,
    };

    let mut psi = proc.analytic_state(grid.start, draw.z)?;
    let mut stats = PathStats::default();
    visit(0, times[0], &psi);

    for k in 0..times.len() - 1 {
        let (ta, tb) = (times[k], times[k + 1]);
        let dt = tb - ta;
        let tm = 0.5 * (ta + tb);

        let pa = traj.point(ta)?;
        let pb = traj.point(tb)?;
        let sig_a = proc.sigma(ta)?;
        let sig_m = proc.sigma(tm)?;
        let sig_b = proc.sigma(tb)?;
        let rotation_estimate = draw.z.abs() * ((sig_m - sig_a).abs() + (sig_b - sig_m).abs())
            + (pb.theta - pa.theta).abs()
            + (mixing_angle(traj, tb)? - mixing_angle(traj, ta)?).abs()
            + 1e-9;
        if !rotation_estimate.is_finite() {
            return Err(Error::Singularity {
                path_id: draw.id,
                t: ta,
                detail: "rotation estimate diverged".into(),
            });
        }
        let m = ((rotation_estimate / opts.max_step_angle).ceil() as usize)
            .max(opts.min_substeps)
            .max(1);

        // square-root spacing absorbs a sqrt(t)-like growth of sigma out
        // of a linear zero of the raw variance
        let cusp_at = |p: &crate::channels::TrajPoint| {
            p.sigma_sq_raw.is_finite()
                && p.sigma_sq_raw < 0.25 * p.dsigma_sq_raw.abs() * dt
        };
        let spacing = match (cusp_at(&pa), cusp_at(&pb)) {
            (true, false) => Spacing::SqrtFromStart,
            (false, true) => Spacing::SqrtFromEnd,
            _ => Spacing::Uniform,
        };

        let mut u0 = ta;
        let mut sig0 = sig_a;
        let mut th0 = pa.theta;
        for j in 1..=m {
            let u1 = if j == m {
                tb
            } else {
                boundary(&spacing, ta, dt, j, m)
            };
            let h = u1 - u0;
            let (sig1, th1) = if j == m {
                (sig_b, pb.theta)
            } else {
                (proc.sigma(u1)?, traj.point(u1)?.theta)
            };
            let sdot = (sig1 - sig0) / h;
            let tdot = (th1 - th0) / h;
            let mid = 0.5 * (u0 + u1);
            let (field, residue) = proc
                .field_with_rates(mid, draw.z, sdot, tdot)
                .map_err(|e| located(e, mid))?;
            let u = su2_step(&field, h).map_err(|e| located(e, mid))?;
            psi = u.apply(&psi);
            stats.steps += 1;
            stats.max_bz_residue = stats.max_bz_residue.max(residue.abs());
            u0 = u1;
            sig0 = sig1;
            th0 = th1;
        }
        stats.norm_drift = stats.norm_drift.max((psi.norm() - 1.0).abs());
        visit(k + 1, tb, &psi);
    }
    Ok(stats)
}

/// Propagate one path and record states and field samples on the grid.
pub fn propagate_path(
    traj: &Trajectory,
    grid: &TimeGrid,
    draw: &PathDraw,
    opts: &PropagationOptions,
) -> Result<PathTrace> {
    let proc = PhaseProcess::new(traj, opts.synthesis);
    let mut states = Vec::with_capacity(grid.points);
    let mut times = Vec::with_capacity(grid.points);
    let mut stats = propagate_with(traj, grid, draw, opts, |_, t, psi| {
        times.push(t);
        states.push(*psi);
    })?;
    let mut fields = Vec::with_capacity(grid.points);
    for &t in &times {
        let (field, residue) = proc.field(t, draw.z)?;
        stats.max_bz_residue = stats.max_bz_residue.max(residue.abs());
        fields.push(field);
    }
    Ok(PathTrace {
        draw: *draw,
        times,
        states,
        fields,
        stats,
    })
}
