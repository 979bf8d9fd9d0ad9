//! Reference trajectories: closed-form dephasing, recurrence and amplitude
//! damping channels, plus tabulated trajectories with cubic interpolation.
//!
//! Every trajectory exposes two things: the density matrix at a time, and
//! the primitive quantities the field synthesis needs (populations, the
//! raw log-coherence-ratio variance, the unwrapped coherence phase, and
//! their time derivatives).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit::DensityMatrix;
use crate::spline::CubicSpline;

/// Normalized initial pure state `alpha |0> + beta |1>`.
#[derive(Debug, Clone, Copy)]
pub struct InitialState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl InitialState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "initial state not normalized: |alpha|^2 + |beta|^2 = {norm}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn equal_superposition() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha: Complex64::new(h, 0.0),
            beta: Complex64::new(h, 0.0),
        }
    }

    /// Phase of `conj(alpha) * beta`, zero when either amplitude vanishes.
    pub fn coherence_phase(&self) -> f64 {
        let c = self.alpha.conj() * self.beta;
        if c.norm() == 0.0 {
            0.0
        } else {
            c.arg()
        }
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            rho00: self.alpha.norm_sqr(),
            rho11: self.beta.norm_sqr(),
            rho10: self.alpha.conj() * self.beta,
        }
    }
}

/// Finite bath of commensurable modes; coherence revives with period `period`.
#[derive(Debug, Clone)]
pub struct RecurrenceParams {
    pub omega0: f64,
    pub modes: usize,
    pub period: f64,
    /// Mode couplings; `None` means `|g_n| = omega_n` with zero phases.
    pub couplings: Option<Vec<Complex64>>,
}

impl RecurrenceParams {
    pub fn new(omega0: f64, modes: usize, period: f64) -> Result<Self> {
        if modes < 1 {
            return Err(Error::Domain("recurrence needs at least one mode".into()));
        }
        if !(period > 0.0) {
            return Err(Error::Domain("recurrence period must be positive".into()));
        }
        Ok(Self {
            omega0,
            modes,
            period,
            couplings: None,
        })
    }

    pub fn mode_frequency(&self, n: usize) -> f64 {
        2.0 * std::f64::consts::PI * n as f64 / self.period
    }

    /// `4 |g_n|^2 / omega_n^2`, which is exactly 4 for the default couplings.
    fn mode_weight(&self, n: usize) -> f64 {
        match &self.couplings {
            None => 4.0,
            Some(gs) => {
                let wn = self.mode_frequency(n);
                4.0 * gs[n - 1].norm_sqr() / (wn * wn)
            }
        }
    }
}

/// Ohmic bath with exponential cutoff at nonzero temperature.
#[derive(Debug, Clone, Copy)]
pub struct OhmicParams {
    /// Dimensionless coupling strength.
    pub j0: f64,
    /// Cutoff angular frequency.
    pub cutoff: f64,
    /// Temperature as an energy (hbar = k_B = 1 units).
    pub temperature: f64,
    pub omega0: f64,
}

impl OhmicParams {
    pub fn new(j0: f64, cutoff: f64, temperature: f64, omega0: f64) -> Result<Self> {
        if j0 < 0.0 || !(cutoff > 0.0) || !(temperature > 0.0) {
            return Err(Error::Domain(
                "ohmic bath needs j0 >= 0, cutoff > 0, temperature > 0".into(),
            ));
        }
        Ok(Self {
            j0,
            cutoff,
            temperature,
            omega0,
        })
    }
}

/// Decay-probability profile for the amplitude damping channel.
#[derive(Debug, Clone)]
pub enum DampingProfile {
    /// `gamma(t) = 1 - exp(-t / t1)`.
    Exponential { t1: f64 },
    /// Tabulated `gamma(t)` on a uniform grid starting at zero.
    Tabulated { dt: f64, gamma: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct AmplitudeDampingParams {
    pub profile: DampingProfile,
}

impl AmplitudeDampingParams {
    pub fn exponential(t1: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::Domain("relaxation time must be positive".into()));
        }
        Ok(Self {
            profile: DampingProfile::Exponential { t1 },
        })
    }

    pub fn tabulated(dt: f64, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() < 2 || !(dt > 0.0) {
            return Err(Error::Domain("gamma table needs >= 2 uniform samples".into()));
        }
        if gamma[0].abs() > 1e-12 {
            return Err(Error::Domain("gamma(0) must be zero".into()));
        }
        for w in gamma.windows(2) {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::Domain("gamma must be non-decreasing".into()));
            }
        }
        if gamma.iter().any(|&g| !(0.0..=1.0 + 1e-12).contains(&g)) {
            return Err(Error::Domain("gamma must stay within [0, 1]".into()));
        }
        Ok(Self {
            profile: DampingProfile::Tabulated { dt, gamma },
        })
    }

    /// `(gamma(t), dgamma/dt)`.
    pub fn gamma(&self, t: f64) -> (f64, f64) {
        match &self.profile {
            DampingProfile::Exponential { t1 } => {
                let e = (-t / t1).exp();
                (1.0 - e, e / t1)
            }
            DampingProfile::Tabulated { dt, gamma } => {
                // piecewise-linear; clamp to the final sample beyond the table
                let s = t / dt;
                let i = (s.floor() as usize).min(gamma.len() - 2);
                let frac = (s - i as f64).clamp(0.0, 1.0);
                let g = gamma[i] + (gamma[i + 1] - gamma[i]) * frac;
                let gd = (gamma[i + 1] - gamma[i]) / dt;
                (g.clamp(0.0, 1.0), gd)
            }
        }
    }
}

/// Decoherence exponent of the finite commensurable bath:
/// `Gamma(t) = sum_n 4 |g_n|^2 / omega_n^2 (1 - cos(omega_n t))`.
pub fn gamma_recurrence(t: f64, p: &RecurrenceParams) -> f64 {
    (1..=p.modes)
        .map(|n| p.mode_weight(n) * (1.0 - (p.mode_frequency(n) * t).cos()))
        .sum()
}

pub fn gamma_recurrence_dot(t: f64, p: &RecurrenceParams) -> f64 {
    (1..=p.modes)
        .map(|n| {
            let wn = p.mode_frequency(n);
            p.mode_weight(n) * wn * (wn * t).sin()
        })
        .sum()
}

/// `ln(sinh(x) / x)`, overflow-safe for large `x`.
fn ln_sinhc(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 1e-4 {
        x * x / 6.0 - x.powi(4) / 180.0
    } else if x > 20.0 {
        // sinh(x)/x = e^x (1 - e^{-2x}) / (2x)
        let e = (-(2.0 * x)).exp();
        x - (2.0 * x).ln() + (-e).ln_1p()
    } else {
        (x.sinh() / x).ln()
    }
}

/// `coth(x) - 1/x`, stable near zero.
fn coth_minus_inv(x: f64) -> f64 {
    if x < 1e-4 {
        x / 3.0 - x.powi(3) / 45.0
    } else if x > 20.0 {
        1.0 - 1.0 / x
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// Ohmic decoherence exponent
/// `Gamma(t) = (J0/2) ln(1 + cutoff^2 t^2) + J0 ln[sinh(pi T t) / (pi T t)]`.
pub fn gamma_ohmic(t: f64, p: &OhmicParams) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let x = std::f64::consts::PI * p.temperature * t;
    0.5 * p.j0 * (p.cutoff * t).powi(2).ln_1p() + p.j0 * ln_sinhc(x)
}

pub fn gamma_ohmic_dot(t: f64, p: &OhmicParams) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let pit = std::f64::consts::PI * p.temperature;
    let x = pit * t;
    let lt = p.cutoff * t;
    p.j0 * p.cutoff * lt / (1.0 + lt * lt) + p.j0 * pit * coth_minus_inv(x)
}

/// Dephasing evolution at exponent `gamma`: populations frozen, coherence
/// rotated by `omega0 t` and shrunk by `exp(-gamma)`.
pub fn dephasing_density(
    t: f64,
    gamma: f64,
    omega0: f64,
    psi: &InitialState,
) -> DensityMatrix {
    let decay = (-gamma).exp();
    let rotation = Complex64::from_polar(decay, omega0 * t);
    DensityMatrix {
        rho00: psi.alpha.norm_sqr(),
        rho11: psi.beta.norm_sqr(),
        rho10: psi.alpha.conj() * psi.beta * rotation,
    }
}

/// Amplitude damping at decay probability `gamma`; not a unital channel.
pub fn amplitude_damping_density(gamma: f64, psi: &InitialState) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "decay probability must lie in [0, 1], got {gamma}"
        )));
    }
    let aa = psi.alpha.norm_sqr();
    let keep = 1.0 - gamma;
    // rho11 written via 1 - |alpha|^2 so the trace is exactly one
    let rho11 = (1.0 - aa) * keep;
    Ok(DensityMatrix {
        rho00: 1.0 - rho11,
        rho11,
        rho10: psi.alpha.conj() * psi.beta * keep.sqrt(),
    })
}

/// Primitive quantities of a trajectory at one time, as consumed by the
/// field synthesis. `sigma_sq_raw` is the unsaturated variance
/// `-2 ln(|rho10| / sqrt(rho00 rho11))`; it may be infinite.
#[derive(Debug, Clone, Copy)]
pub struct TrajPoint {
    pub rho00: f64,
    pub drho00: f64,
    pub sigma_sq_raw: f64,
    pub dsigma_sq_raw: f64,
    /// Unwrapped coherence phase.
    pub theta: f64,
    pub dtheta: f64,
}

/// Tabulated trajectory on a uniform time grid with cubic interpolation of
/// `rho00`, `Re rho10`, `Im rho10` (`rho11 = 1 - rho00` is enforced).
#[derive(Debug, Clone)]
pub struct Tabulated {
    t0: f64,
    dt: f64,
    rho00_nodes: Vec<f64>,
    rho10_nodes: Vec<Complex64>,
    /// Continuous (unwrapped) coherence phase at the nodes.
    theta_nodes: Vec<f64>,
    s_rho00: CubicSpline,
    s_re10: CubicSpline,
    s_im10: CubicSpline,
}

/// Coherence magnitudes below this are treated as vanished: the phase is
/// held and the variance saturates.
const COHERENCE_FLOOR: f64 = 1e-150;

impl Tabulated {
    /// Build from uniform samples; every row must pass the validity checks.
    pub fn from_samples(times: &[f64], rows: &[DensityMatrix], tol: f64) -> Result<Self> {
        if times.len() != rows.len() {
            return Err(Error::Usage("times and rows length mismatch".into()));
        }
        if times.len() < 4 {
            return Err(Error::Usage(
                "tabulated trajectory needs at least 4 rows".into(),
            ));
        }
        let t0 = times[0];
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Usage("time grid must be increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::Usage(format!(
                    "non-uniform time grid at row {}: step {} vs {}",
                    i + 1,
                    step,
                    dt
                )));
            }
        }
        for (i, rho) in rows.iter().enumerate() {
            let report = rho.validate(tol);
            if !report.passes() {
                return Err(Error::TrajectoryFile {
                    file: "<samples>".into(),
                    row: i,
                    msg: report.describe(),
                });
            }
        }
        let rho00_nodes: Vec<f64> = rows.iter().map(|r| r.rho00).collect();
        let rho10_nodes: Vec<Complex64> = rows.iter().map(|r| r.rho10).collect();
        let theta_nodes = unwrap_phases(&rho10_nodes, dt)?;
        let s_rho00 = CubicSpline::new(t0, dt, rho00_nodes.clone())?;
        let s_re10 = CubicSpline::new(t0, dt, rho10_nodes.iter().map(|c| c.re).collect())?;
        let s_im10 = CubicSpline::new(t0, dt, rho10_nodes.iter().map(|c| c.im).collect())?;
        Ok(Self {
            t0,
            dt,
            rho00_nodes,
            rho10_nodes,
            theta_nodes,
            s_rho00,
            s_re10,
            s_im10,
        })
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * (self.rho00_nodes.len() - 1) as f64
    }

    pub fn node_times(&self) -> Vec<f64> {
        (0..self.rho00_nodes.len())
            .map(|i| self.t0 + self.dt * i as f64)
            .collect()
    }

    fn density(&self, t: f64) -> DensityMatrix {
        let rho00 = self.s_rho00.value(t);
        DensityMatrix {
            rho00,
            rho11: 1.0 - rho00,
            rho10: Complex64::new(self.s_re10.value(t), self.s_im10.value(t)),
        }
    }

    fn point(&self, t: f64) -> TrajPoint {
        let rho00 = self.s_rho00.value(t);
        let drho00 = self.s_rho00.derivative(t);
        let rho11 = 1.0 - rho00;
        let re = self.s_re10.value(t);
        let im = self.s_im10.value(t);
        let dre = self.s_re10.derivative(t);
        let dim = self.s_im10.derivative(t);
        let mag_sq = re * re + im * im;
        let mag = mag_sq.sqrt();

        let anchor = (((t - self.t0) / self.dt).floor() as isize)
            .clamp(0, self.theta_nodes.len() as isize - 1) as usize;

        if mag < COHERENCE_FLOOR || rho00 <= 0.0 || rho11 <= 0.0 {
            // coherence (or a population) vanished: hold the phase, saturate
            return TrajPoint {
                rho00,
                drho00,
                sigma_sq_raw: f64::INFINITY,
                dsigma_sq_raw: 0.0,
                theta: self.theta_nodes[anchor],
                dtheta: 0.0,
            };
        }

        // local continuation of the anchored phase; valid while the phase
        // moves by less than pi within one grid interval
        let anchor_c = self.rho10_nodes[anchor];
        let theta = if anchor_c.norm() < COHERENCE_FLOOR {
            self.theta_nodes[anchor]
        } else {
            let rel = Complex64::new(re, im) * anchor_c.conj();
            self.theta_nodes[anchor] + rel.arg()
        };
        let dtheta = (re * dim - im * dre) / mag_sq;
        let dmag = (re * dre + im * dim) / mag;
        let sigma_sq_raw = -2.0 * (mag / (rho00 * rho11).sqrt()).ln();
        let dsigma_sq_raw = -2.0 * dmag / mag + drho00 / rho00 - drho00 / rho11;
        TrajPoint {
            rho00,
            drho00,
            sigma_sq_raw: sigma_sq_raw.max(0.0),
            dsigma_sq_raw,
            theta,
            dtheta,
        }
    }
}

/// Continuous phase table for a sampled coherence: consecutive samples are
/// joined by the principal-value phase difference. Errors if the phase
/// moves by (nearly) half a turn or more between neighbors while the
/// coherence is well above the floor.
pub fn unwrap_phases(rho10: &[Complex64], _dt: f64) -> Result<Vec<f64>> {
    let mut theta = Vec::with_capacity(rho10.len());
    let mut last = match rho10.first() {
        Some(c) if c.norm() >= COHERENCE_FLOOR => c.arg(),
        _ => 0.0,
    };
    theta.push(last);
    for (i, pair) in rho10.windows(2).enumerate() {
        let (prev, next) = (pair[0], pair[1]);
        if prev.norm() >= COHERENCE_FLOOR && next.norm() >= COHERENCE_FLOOR {
            let step = (next * prev.conj()).arg();
            if step.abs() >= 0.98 * std::f64::consts::PI {
                return Err(Error::Resolution(format!(
                    "coherence phase jumps by {:.3} rad between samples {} and {}; \
                     use a finer grid",
                    step,
                    i,
                    i + 1
                )));
            }
            last += step;
        }
        // a vanished coherence holds the last phase
        theta.push(last);
    }
    Ok(theta)
}

/// The channel behind a reference trajectory.
#[derive(Debug, Clone)]
pub enum Channel {
    Recurrence(RecurrenceParams),
    Ohmic(OhmicParams),
    AmplitudeDamping(AmplitudeDampingParams),
    Tabulated(Tabulated),
}

/// Time-parameterized qubit state `rho(t)`: the object the synthesized
/// stochastic drive must reproduce.
#[derive(Debug, Clone)]
pub struct Trajectory {
    channel: Channel,
    /// Initial pure state; required by the closed-form channels.
    initial: Option<InitialState>,
}

impl Trajectory {
    pub fn recurrence(params: RecurrenceParams, initial: InitialState) -> Self {
        Self {
            channel: Channel::Recurrence(params),
            initial: Some(initial),
        }
    }

    pub fn ohmic(params: OhmicParams, initial: InitialState) -> Self {
        Self {
            channel: Channel::Ohmic(params),
            initial: Some(initial),
        }
    }

    pub fn amplitude_damping(params: AmplitudeDampingParams, initial: InitialState) -> Self {
        Self {
            channel: Channel::AmplitudeDamping(params),
            initial: Some(initial),
        }
    }

    pub fn tabulated(table: Tabulated) -> Self {
        Self {
            channel: Channel::Tabulated(table),
            initial: None,
        }
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn initial_state(&self) -> Option<&InitialState> {
        self.initial.as_ref()
    }

    /// Earliest valid time.
    pub fn start(&self) -> f64 {
        match &self.channel {
            Channel::Tabulated(t) => t.start(),
            _ => 0.0,
        }
    }

    /// Latest valid time; unbounded for the closed-form channels.
    pub fn end(&self) -> f64 {
        match &self.channel {
            Channel::Tabulated(t) => t.end(),
            _ => f64::INFINITY,
        }
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        let pad = 1e-9 * (1.0 + self.start().abs());
        if t < self.start() - pad || t > self.end() + pad {
            return Err(Error::OutOfDomain {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        Ok(())
    }

    /// The reference density matrix at time `t`.
    pub fn density(&self, t: f64) -> Result<DensityMatrix> {
        self.check_domain(t)?;
        let psi = self.initial;
        let rho = match &self.channel {
            Channel::Recurrence(p) => {
                dephasing_density(t, gamma_recurrence(t, p), p.omega0, &psi.unwrap())
            }
            Channel::Ohmic(p) => {
                dephasing_density(t, gamma_ohmic(t, p), p.omega0, &psi.unwrap())
            }
            Channel::AmplitudeDamping(p) => {
                let (g, _) = p.gamma(t);
                amplitude_damping_density(g, &psi.unwrap())?
            }
            Channel::Tabulated(table) => table.density(t),
        };
        Ok(rho)
    }

    /// Primitive synthesis quantities at time `t`.
    pub fn point(&self, t: f64) -> Result<TrajPoint> {
        self.check_domain(t)?;
        match &self.channel {
            Channel::Recurrence(p) => {
                let psi = self.initial.unwrap();
                Ok(dephasing_point(
                    gamma_recurrence(t, p),
                    gamma_recurrence_dot(t, p),
                    p.omega0,
                    t,
                    &psi,
                ))
            }
            Channel::Ohmic(p) => {
                let psi = self.initial.unwrap();
                Ok(dephasing_point(
                    gamma_ohmic(t, p),
                    gamma_ohmic_dot(t, p),
                    p.omega0,
                    t,
                    &psi,
                ))
            }
            Channel::AmplitudeDamping(p) => {
                let psi = self.initial.unwrap();
                let (g, gd) = p.gamma(t);
                Ok(damping_point(g, gd, &psi))
            }
            Channel::Tabulated(table) => Ok(table.point(t)),
        }
    }

    /// Validate the trajectory on a grid; returns the worst row on failure.
    pub fn validate_on(&self, times: &[f64], tol: f64) -> Result<()> {
        for (i, &t) in times.iter().enumerate() {
            let rho = self.density(t)?;
            let report = rho.validate(tol);
            if !report.passes() {
                return Err(Error::InvalidDensity(format!(
                    "at grid index {i} (t = {t}): {}",
                    report.describe()
                )));
            }
        }
        Ok(())
    }
}

fn dephasing_point(
    gamma: f64,
    gamma_dot: f64,
    omega0: f64,
    t: f64,
    psi: &InitialState,
) -> TrajPoint {
    let aa = psi.alpha.norm_sqr();
    let bb = psi.beta.norm_sqr();
    let coherent = aa > 0.0 && bb > 0.0;
    TrajPoint {
        rho00: aa,
        drho00: 0.0,
        sigma_sq_raw: if coherent { 2.0 * gamma } else { f64::INFINITY },
        dsigma_sq_raw: if coherent { 2.0 * gamma_dot } else { 0.0 },
        theta: psi.coherence_phase() + omega0 * t,
        dtheta: omega0,
    }
}

fn damping_point(gamma: f64, gamma_dot: f64, psi: &InitialState) -> TrajPoint {
    let aa = psi.alpha.norm_sqr();
    let keep = 1.0 - gamma;
    let rho00 = 1.0 - keep * (1.0 - aa);
    let drho00 = gamma_dot * (1.0 - aa);
    let coherent = aa > 0.0 && (1.0 - aa) > 0.0 && keep > 0.0;
    TrajPoint {
        rho00,
        drho00,
        sigma_sq_raw: if coherent {
            (rho00 / aa).ln()
        } else {
            f64::INFINITY
        },
        dsigma_sq_raw: if coherent { drho00 / rho00 } else { 0.0 },
        theta: psi.coherence_phase(),
        dtheta: 0.0,
    }
}
