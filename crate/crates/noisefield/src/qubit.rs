//! Qubit density matrices, pure states, Bloch vectors and exact SU(2) steps.
//!
//! A density matrix stores `rho00`, `rho11` and the lower off-diagonal
//! `rho10`; the upper one is always the conjugate and is never stored.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for validity checks.
pub const DEFAULT_VALIDITY_TOL: f64 = 1e-12;

/// 2x2 Hermitian, unit-trace, positive matrix describing a qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub rho00: f64,
    pub rho11: f64,
    /// Lower off-diagonal element; `rho01 = conj(rho10)`.
    pub rho10: Complex64,
}

/// Normalized two-component state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    pub a: Complex64,
    pub b: Complex64,
}

/// Real three-vector representation: `rho = (I + n . sigma) / 2`.
///
/// Convention: `nz = rho00 - rho11`, `nx = 2 Re rho10`, `ny = 2 Im rho10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

/// One factor of a time-ordered product of SU(2) exponentials.
#[derive(Debug, Clone, Copy)]
pub struct Su2Matrix {
    pub u00: Complex64,
    pub u01: Complex64,
    pub u10: Complex64,
    pub u11: Complex64,
}

/// Outcome of the three validity checks on a density matrix.
///
/// Violations are reported, not thrown; each field holds the worst
/// (most positive) violation of its condition, zero when satisfied.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidityReport {
    /// How far below zero a diagonal element dips.
    pub positivity: f64,
    /// `|rho00 + rho11 - 1|`.
    pub trace: f64,
    /// `|rho10| - sqrt(rho00 rho11)`, clamped at zero.
    pub coherence_bound: f64,
    pub tol: f64,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.positivity <= self.tol && self.trace <= self.tol && self.coherence_bound <= self.tol
    }

    pub fn worst(&self) -> f64 {
        self.positivity.max(self.trace).max(self.coherence_bound)
    }

    pub fn describe(&self) -> String {
        format!(
            "positivity {:+.3e}, trace {:+.3e}, coherence bound {:+.3e} (tol {:.1e}) -> {}",
            self.positivity,
            self.trace,
            self.coherence_bound,
            self.tol,
            if self.passes() { "pass" } else { "FAIL" }
        )
    }
}

impl DensityMatrix {
    pub fn new(rho00: f64, rho11: f64, rho10: Complex64) -> Self {
        Self {
            rho00,
            rho11,
            rho10,
        }
    }

    /// Projector onto a pure state.
    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            rho00: psi.a.norm_sqr(),
            rho11: psi.b.norm_sqr(),
            rho10: psi.b * psi.a.conj(),
        }
    }

    pub fn completely_mixed() -> Self {
        Self::new(0.5, 0.5, Complex64::new(0.0, 0.0))
    }

    /// Run the three validity checks at absolute tolerance `tol`.
    pub fn validate(&self, tol: f64) -> ValidityReport {
        let positivity = (-self.rho00).max(-self.rho11).max(0.0);
        let trace = (self.rho00 + self.rho11 - 1.0).abs();
        let bound = (self.rho00.max(0.0) * self.rho11.max(0.0)).sqrt();
        let coherence_bound = (self.rho10.norm() - bound).max(0.0);
        ValidityReport {
            positivity,
            trace,
            coherence_bound,
            tol,
        }
    }

    /// Eigenvalues, closed form: `1/2 (1 +/- sqrt((rho00-rho11)^2 + 4 |rho10|^2))`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let d = self.rho00 - self.rho11;
        let r = (d * d + 4.0 * self.rho10.norm_sqr()).sqrt();
        (0.5 * (1.0 + r), 0.5 * (1.0 - r))
    }

    /// Von Neumann entropy in nats, `-sum lambda ln lambda` with `0 ln 0 = 0`.
    pub fn von_neumann_entropy(&self, tol: f64) -> Result<f64> {
        let report = self.validate(tol);
        if !report.passes() {
            return Err(Error::InvalidDensity(report.describe()));
        }
        Ok(self.entropy_clamped())
    }

    /// Entropy with eigenvalues clamped into `[0, 1]`; no validity check.
    /// Meant for numerically estimated matrices with rounding-level
    /// violations.
    pub fn entropy_clamped(&self) -> f64 {
        let (l1, l2) = self.eigenvalues();
        entropy_term(l1.clamp(0.0, 1.0)) + entropy_term(l2.clamp(0.0, 1.0))
    }

    pub fn to_bloch(&self) -> BlochVector {
        BlochVector {
            nx: 2.0 * self.rho10.re,
            ny: 2.0 * self.rho10.im,
            nz: self.rho00 - self.rho11,
        }
    }

    pub fn from_bloch(n: &BlochVector) -> Self {
        Self {
            rho00: 0.5 * (1.0 + n.nz),
            rho11: 0.5 * (1.0 - n.nz),
            rho10: Complex64::new(0.5 * n.nx, 0.5 * n.ny),
        }
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.rho00 - other.rho00)
            .abs()
            .max((self.rho11 - other.rho11).abs())
            .max((self.rho10 - other.rho10).norm())
    }
}

fn entropy_term(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else {
        -lambda * lambda.ln()
    }
}

impl PureState {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr()).sqrt()
    }

    /// Inner product `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Complex64 {
        self.a.conj() * other.a + self.b.conj() * other.b
    }
}

/// Global-phase-insensitive distance: `1 - |<psi1|psi2>|` for normalized inputs.
pub fn path_infidelity(psi1: &PureState, psi2: &PureState) -> f64 {
    1.0 - psi1.overlap(psi2).norm()
}

/// Real field triple driving the qubit at one instant (angular frequency units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }
}

/// Exact propagator `exp(-i dt H)` for the piecewise-constant Hamiltonian
/// `H = [[Bz, Bx - i By], [Bx + i By, -Bz]]`.
///
/// Closed form: `cos(theta) I - i sin(theta) (Bhat . sigma)` with
/// `theta = dt |B|`. A zero field yields the identity.
pub fn su2_step(field: &FieldSample, dt: f64) -> Result<Su2Matrix> {
    if !field.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite field at t = {}: ({}, {}, {})",
            field.t, field.bx, field.by, field.bz
        )));
    }
    let mag = field.magnitude();
    if mag == 0.0 {
        return Ok(Su2Matrix::identity());
    }
    let theta = dt * mag;
    let (s, c) = theta.sin_cos();
    let nx = field.bx / mag;
    let ny = field.by / mag;
    let nz = field.bz / mag;
    Ok(Su2Matrix {
        u00: Complex64::new(c, -s * nz),
        u01: Complex64::new(-s * ny, -s * nx),
        u10: Complex64::new(s * ny, -s * nx),
        u11: Complex64::new(c, s * nz),
    })
}

impl Su2Matrix {
    pub fn identity() -> Self {
        Self {
            u00: Complex64::new(1.0, 0.0),
            u01: Complex64::new(0.0, 0.0),
            u10: Complex64::new(0.0, 0.0),
            u11: Complex64::new(1.0, 0.0),
        }
    }

    pub fn apply(&self, psi: &PureState) -> PureState {
        PureState {
            a: self.u00 * psi.a + self.u01 * psi.b,
            b: self.u10 * psi.a + self.u11 * psi.b,
        }
    }

    /// Max-norm of `U^dagger U - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let g00 = self.u00.conj() * self.u00 + self.u10.conj() * self.u10;
        let g01 = self.u00.conj() * self.u01 + self.u10.conj() * self.u11;
        let g11 = self.u01.conj() * self.u01 + self.u11.conj() * self.u11;
        (g00 - 1.0)
            .norm()
            .max(g01.norm())
            .max((g11 - 1.0).norm())
    }

    pub fn determinant(&self) -> Complex64 {
        self.u00 * self.u11 - self.u01 * self.u10
    }
}
