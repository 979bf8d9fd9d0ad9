//! Synthesis of the classical stochastic drive for a reference trajectory.
//!
//! The construction: a single standard normal variable `z` labels each
//! sample path. The coherence phase on a path is offset by `sigma(t) z`,
//! where `sigma^2(t) = -2 ln(|rho10| / sqrt(rho00 rho11))` (saturated at a
//! configurable ceiling so it stays finite and differentiable when the
//! coherence dies). Path amplitudes follow the trajectory's populations
//! exactly; the drive field is read off from their time derivatives.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::{TrajPoint, Trajectory};
use crate::error::{Error, Result};
use crate::qubit::{FieldSample, PureState};
use crate::quadrature::GaussHermite;

/// Default ceiling for the phase variance. `exp(-30)` is far below every
/// comparison tolerance in the crate, and a 64-node quadrature still
/// resolves the characteristic function at this width.
pub const DEFAULT_SIGMA_SQ_MAX: f64 = 60.0;

/// Exact mean of `exp(i Phi)` over a zero-mean Gaussian phase of variance
/// `sigma_sq`.
pub fn phase_characteristic(sigma_sq: f64) -> f64 {
    (-0.5 * sigma_sq).exp()
}

/// Saturation map for the raw phase variance: identity below half the
/// ceiling, then a scaled `tanh` approach to the ceiling. Continuous with
/// continuous first and second derivatives at the knee.
pub fn saturate_variance(raw: f64, max: f64) -> f64 {
    let knee = 0.5 * max;
    if raw <= knee {
        raw
    } else if raw.is_finite() {
        knee + (max - knee) * ((raw - knee) / (max - knee)).tanh()
    } else {
        max
    }
}

/// Derivative of [`saturate_variance`] with respect to the raw variance.
pub fn saturate_variance_deriv(raw: f64, max: f64) -> f64 {
    let knee = 0.5 * max;
    if raw <= knee {
        1.0
    } else if raw.is_finite() {
        let x = ((raw - knee) / (max - knee)).min(350.0);
        let c = x.cosh();
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// One sample path: a standard-normal coordinate, its ensemble weight and
/// a stable identifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDraw {
    pub z: f64,
    pub weight: f64,
    pub id: u64,
}

/// Deterministic quadrature draws; weights sum to one.
pub fn gh_draws(n_nodes: usize) -> Result<Vec<PathDraw>> {
    let rule = GaussHermite::new(n_nodes)?;
    Ok(rule
        .iter()
        .enumerate()
        .map(|(i, (z, w))| PathDraw {
            z,
            weight: w,
            id: i as u64,
        })
        .collect())
}

/// Monte Carlo draws from per-path generator substreams keyed by
/// `(seed, path index)`; reproducible independent of scheduling.
pub fn mc_draws(m: usize, seed: u64) -> Vec<PathDraw> {
    (0..m)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            PathDraw {
                z,
                weight: 1.0 / m as f64,
                id: k as u64,
            }
        })
        .collect()
}

/// Path amplitudes and their time derivatives at one `(t, z)`.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudePair {
    pub a: Complex64,
    pub b: Complex64,
    pub da_dt: Complex64,
    pub db_dt: Complex64,
}

/// Options controlling the synthesis.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub sigma_sq_max: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            sigma_sq_max: DEFAULT_SIGMA_SQ_MAX,
        }
    }
}

/// The Gaussian phase process attached to a trajectory, plus everything
/// derived from it: amplitudes, analytic path states and the drive field.
#[derive(Debug, Clone, Copy)]
pub struct PhaseProcess<'a> {
    traj: &'a Trajectory,
    sigma_sq_max: f64,
}

impl<'a> PhaseProcess<'a> {
    pub fn new(traj: &'a Trajectory, opts: SynthesisOptions) -> Self {
        Self {
            traj,
            sigma_sq_max: opts.sigma_sq_max,
        }
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.traj
    }

    pub fn sigma_sq_max(&self) -> f64 {
        self.sigma_sq_max
    }

    pub fn initial_time(&self) -> f64 {
        self.traj.start()
    }

    /// Unsaturated variance `-2 ln(|rho10| / sqrt(rho00 rho11))`; may be
    /// infinite when the coherence vanishes.
    pub fn sigma_sq_raw(&self, t: f64) -> Result<f64> {
        Ok(self.traj.point(t)?.sigma_sq_raw.max(0.0))
    }

    /// Saturated phase variance.
    pub fn sigma_sq(&self, t: f64) -> Result<f64> {
        Ok(saturate_variance(
            self.sigma_sq_raw(t)?,
            self.sigma_sq_max,
        ))
    }

    /// Standard deviation of the phase at time `t`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        Ok(self.sigma_sq(t)?.sqrt())
    }

    /// Time derivative of `sigma`. Where `sigma` vanishes the chain rule
    /// degenerates; a one-sided difference supplies the limit there.
    pub fn sigma_dot(&self, t: f64) -> Result<f64> {
        let point = self.traj.point(t)?;
        let (sigma, sigma_dot) = self.sigma_rates(&point);
        if sigma_dot.is_finite() {
            return Ok(sigma_dot);
        }
        self.sigma_dot_one_sided(t, sigma)
    }

    fn sigma_dot_one_sided(&self, t: f64, sigma_here: f64) -> Result<f64> {
        let h = 1e-7 * (1.0 + t.abs());
        let (t1, sign) = if t + h <= self.traj.end() {
            (t + h, 1.0)
        } else {
            (t - h, -1.0)
        };
        Ok(sign * (self.sigma(t1)? - sigma_here) / h)
    }

    /// `(sigma, dsigma/dt)` from a trajectory point; the derivative comes
    /// out `NaN` where the chain rule is 0/0 (zeros of `sigma`).
    fn sigma_rates(&self, point: &TrajPoint) -> (f64, f64) {
        let raw = point.sigma_sq_raw.max(0.0);
        let s_eff = saturate_variance(raw, self.sigma_sq_max);
        let sigma = s_eff.sqrt();
        if !raw.is_finite() {
            return (sigma, 0.0);
        }
        if sigma < 1e-9 {
            return (sigma, f64::NAN);
        }
        let ds_eff = saturate_variance_deriv(raw, self.sigma_sq_max) * point.dsigma_sq_raw;
        (sigma, 0.5 * ds_eff / sigma)
    }

    fn frame(
        &self,
        t: f64,
        z: f64,
        rate_override: Option<(f64, f64)>,
    ) -> Result<LocalFrame> {
        let point = self.traj.point(t)?;
        let (sigma, mut sigma_dot) = self.sigma_rates(&point);
        let mut theta_dot = point.dtheta;
        if let Some((sd, td)) = rate_override {
            sigma_dot = sd;
            theta_dot = td;
        } else if !sigma_dot.is_finite() {
            sigma_dot = self.sigma_dot_one_sided(t, sigma)?;
        }
        let rho00 = point.rho00.clamp(0.0, 1.0);
        let rho11 = (1.0 - rho00).max(0.0);
        let a = rho00.sqrt();
        let bmag = rho11.sqrt();
        // amplitude rate limits: a vanished amplitude carries no weight
        let da = if a > 1e-12 {
            0.5 * point.drho00 / a
        } else {
            0.0
        };
        let dbmag = if bmag > 1e-12 {
            -0.5 * point.drho00 / bmag
        } else {
            0.0
        };
        Ok(LocalFrame {
            a,
            da,
            bmag,
            dbmag,
            phi: point.theta + sigma * z,
            dphi: theta_dot + sigma_dot * z,
        })
    }

    /// Path amplitudes `a(t)`, `b(t, z)` and their derivatives.
    pub fn amplitudes(&self, t: f64, z: f64) -> Result<AmplitudePair> {
        Ok(self.frame(t, z, None)?.into_pair())
    }

    /// Analytic path state: the amplitudes as a normalized state vector.
    pub fn analytic_state(&self, t: f64, z: f64) -> Result<PureState> {
        let f = self.frame(t, z, None)?;
        Ok(PureState {
            a: Complex64::new(f.a, 0.0),
            b: Complex64::from_polar(f.bmag, f.phi),
        })
    }

    /// Drive field at `(t, z)` and the pre-projection imaginary residue of
    /// its z component (identically zero up to rounding).
    pub fn field(&self, t: f64, z: f64) -> Result<(FieldSample, f64)> {
        let f = self.frame(t, z, None)?;
        f.field(t)
    }

    /// Field with externally supplied phase rates; the propagator uses
    /// exact finite increments of `sigma` and `theta` per substep here.
    pub fn field_with_rates(
        &self,
        t: f64,
        z: f64,
        sigma_dot: f64,
        theta_dot: f64,
    ) -> Result<(FieldSample, f64)> {
        let f = self.frame(t, z, Some((sigma_dot, theta_dot)))?;
        f.field(t)
    }
}

/// Real decomposition of the path amplitudes at one instant:
/// `a` real, `b = bmag e^{i phi}`.
struct LocalFrame {
    a: f64,
    da: f64,
    bmag: f64,
    dbmag: f64,
    phi: f64,
    dphi: f64,
}

impl LocalFrame {
    fn into_pair(self) -> AmplitudePair {
        let phase = Complex64::from_polar(1.0, self.phi);
        AmplitudePair {
            a: Complex64::new(self.a, 0.0),
            b: Complex64::from_polar(self.bmag, self.phi),
            da_dt: Complex64::new(self.da, 0.0),
            db_dt: phase * Complex64::new(self.dbmag, self.dphi * self.bmag),
        }
    }

    fn field(self, t: f64) -> Result<(FieldSample, f64)> {
        let p = self.into_pair();
        // B_z = Re{ i (da a* + db* b) }; the imaginary part must cancel
        let bz_c = Complex64::i() * (p.da_dt * p.a.conj() + p.db_dt.conj() * p.b);
        let bplus = -Complex64::i() * (p.da_dt.conj() * p.b - p.db_dt * p.a.conj());
        let sample = FieldSample {
            t,
            bx: bplus.re,
            by: bplus.im,
            bz: bz_c.re,
        };
        if !sample.is_finite() || !bz_c.im.is_finite() {
            return Err(Error::Singularity {
                path_id: u64::MAX,
                t,
                detail: "non-finite drive field".into(),
            });
        }
        Ok((sample, bz_c.im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        AmplitudeDampingParams, InitialState, OhmicParams, RecurrenceParams, Trajectory,
        gamma_ohmic,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ohmic_traj() -> Trajectory {
        Trajectory::ohmic(
            OhmicParams::new(1.0, 100.0, 1.0, 1.0).unwrap(),
            InitialState::equal_superposition(),
        )
    }

    fn damping_traj() -> Trajectory {
        Trajectory::amplitude_damping(
            AmplitudeDampingParams::exponential(1.0).unwrap(),
            InitialState::equal_superposition(),
        )
    }

    fn quiet_traj() -> Trajectory {
        // zero coupling, zero splitting: the state never moves
        Trajectory::ohmic(
            OhmicParams::new(0.0, 1.0, 1.0, 0.0).unwrap(),
            InitialState::equal_superposition(),
        )
    }

    #[test]
    fn characteristic_values() {
        assert_eq!(phase_characteristic(0.0), 1.0);
        assert_abs_diff_eq!(phase_characteristic(2.0), (-1.0f64).exp(), epsilon = 1e-16);
        // decoherence factor e^{-120} ~ 7.7e-53
        assert!((phase_characteristic(240.0) - 7.67e-53).abs() < 1e-54);
    }

    #[test]
    fn saturation_shape() {
        let max = 60.0;
        assert_eq!(saturate_variance(12.0, max), 12.0);
        assert_eq!(saturate_variance(30.0, max), 30.0);
        assert!(saturate_variance(80.0, max) < 60.0);
        assert_eq!(saturate_variance(f64::INFINITY, max), 60.0);
        // continuity of value and slope across the knee
        let eps = 1e-9;
        let below = saturate_variance(30.0 - eps, max);
        let above = saturate_variance(30.0 + eps, max);
        assert!((above - below).abs() < 1e-8);
        assert!((saturate_variance_deriv(30.0 + eps, max) - 1.0).abs() < 1e-8);
        // monotone
        let mut prev = 0.0;
        for k in 1..2000 {
            let s = saturate_variance(0.1 * k as f64, max);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn sigma_sq_of_equator_state_is_zero() {
        let traj = quiet_traj();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        assert_eq!(proc.sigma_sq(0.7).unwrap(), 0.0);
    }

    #[test]
    fn sigma_sq_of_dephasing_is_twice_gamma() {
        let traj = ohmic_traj();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        let p = OhmicParams::new(1.0, 100.0, 1.0, 1.0).unwrap();
        for t in [0.1, 0.5, 1.3] {
            assert_abs_diff_eq!(
                proc.sigma_sq_raw(t).unwrap(),
                2.0 * gamma_ohmic(t, &p),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sigma_sq_of_damping_half_half() {
        // |alpha|^2 = 1/2, gamma = 1/2 -> ln(3/2)
        let t = (2.0f64).ln(); // gamma(t) = 1 - e^{-t} = 1/2
        let traj = damping_traj();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        assert_abs_diff_eq!(proc.sigma_sq(t).unwrap(), 1.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn amplitudes_at_initial_time_recover_the_initial_state() {
        for traj in [ohmic_traj(), damping_traj()] {
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            for z in [-2.0, 0.0, 1.7] {
                let pair = proc.amplitudes(0.0, z).unwrap();
                assert_abs_diff_eq!(pair.a.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
                assert_abs_diff_eq!(
                    pair.b.norm(),
                    std::f64::consts::FRAC_1_SQRT_2,
                    epsilon = 1e-14
                );
                // pure initial state: the phase offset vanishes for every path
                assert_abs_diff_eq!(pair.b.arg(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn damping_amplitudes_track_populations() {
        let t = (2.0f64).ln();
        let traj = damping_traj();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        let pair = proc.amplitudes(t, 0.4).unwrap();
        assert_abs_diff_eq!(pair.a.norm(), (0.75f64).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(pair.b.norm(), (0.25f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn stationary_state_has_zero_field() {
        let traj = quiet_traj();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        for z in [-1.0, 0.0, 2.0] {
            let (f, residue) = proc.field(0.5, z).unwrap();
            assert_eq!((f.bx, f.by, f.bz), (0.0, 0.0, 0.0));
            assert_eq!(residue, 0.0);
        }
    }

    #[test]
    fn pure_precession_field() {
        // no decoherence, only a splitting: Bz = omega0 |b|^2, B+ = -omega0 b a*
        let traj = Trajectory::ohmic(
            OhmicParams::new(0.0, 1.0, 1.0, 2.5).unwrap(),
            InitialState::new(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)).unwrap(),
        );
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        let t = 0.9;
        let (f, residue) = proc.field(t, 1.3).unwrap();
        assert_abs_diff_eq!(f.bz, 2.5 * 0.64, epsilon = 1e-13);
        let pair = proc.amplitudes(t, 1.3).unwrap();
        let bplus = -2.5 * pair.b * pair.a.conj();
        assert_abs_diff_eq!(f.bx, bplus.re, epsilon = 1e-13);
        assert_abs_diff_eq!(f.by, bplus.im, epsilon = 1e-13);
        assert!(residue.abs() <= 1e-15);
    }

    #[test]
    fn field_stays_real_across_channels() {
        let recurrence = Trajectory::recurrence(
            RecurrenceParams::new(2.0 * std::f64::consts::PI, 30, 1.0).unwrap(),
            InitialState::equal_superposition(),
        );
        for traj in [ohmic_traj(), damping_traj(), recurrence] {
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            for k in 1..40 {
                let t = 0.9 * k as f64 / 40.0 + 0.01;
                for z in [-3.0, 0.2, 2.2] {
                    let (f, residue) = proc.field(t, z).unwrap();
                    assert!(f.is_finite());
                    assert!(residue.abs() <= 1e-9, "residue {residue} at t={t}");
                }
            }
        }
    }

    #[test]
    fn derivative_consistency_fourth_order() {
        // closed-form amplitude derivatives vs a 4th-order central stencil,
        // observed convergence order >= 3.5 under halving
        for traj in [ohmic_traj(), damping_traj()] {
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            let t = 0.8;
            let z = 1.1;
            let err = |h: f64| -> f64 {
                let f = |tt: f64| proc.amplitudes(tt, z).unwrap();
                let (m2, m1, p1, p2) = (f(t - 2.0 * h), f(t - h), f(t + h), f(t + 2.0 * h));
                let fd_a = (m2.a - 8.0 * m1.a + 8.0 * p1.a - p2.a) / (12.0 * h);
                let fd_b = (m2.b - 8.0 * m1.b + 8.0 * p1.b - p2.b) / (12.0 * h);
                let here = f(t);
                (fd_a - here.da_dt).norm().max((fd_b - here.db_dt).norm())
            };
            let e1 = err(1e-2);
            let e2 = err(5e-3);
            let order = (e1 / e2).log2();
            assert!(order >= 3.5, "observed order {order} (errors {e1:.2e}, {e2:.2e})");
        }
    }

    #[test]
    fn mc_draws_are_reproducible_and_weighted() {
        let d1 = mc_draws(500, 42);
        let d2 = mc_draws(500, 42);
        assert_eq!(d1, d2);
        let d3 = mc_draws(500, 43);
        assert!(d1.iter().zip(&d3).any(|(a, b)| a.z != b.z));
        let total: f64 = d1.iter().map(|d| d.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // crude sanity on the sampler: mean and variance of 500 normals
        let mean: f64 = d1.iter().map(|d| d.z).sum::<f64>() / 500.0;
        let var: f64 = d1.iter().map(|d| d.z * d.z).sum::<f64>() / 500.0;
        assert!(mean.abs() < 0.2 && (var - 1.0).abs() < 0.3);
    }

    #[test]
    fn gh_draws_weights_sum_to_one() {
        let draws = gh_draws(64).unwrap();
        let total: f64 = draws.iter().map(|d| d.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-13);
    }

    proptest! {
        #[test]
        fn path_states_stay_normalized(t in 0.01..2.5f64, z in -4.0..4.0f64, pick in 0..3) {
            let traj = match pick {
                0 => ohmic_traj(),
                1 => damping_traj(),
                _ => Trajectory::recurrence(
                    RecurrenceParams::new(2.0 * std::f64::consts::PI, 30, 1.0).unwrap(),
                    InitialState::equal_superposition(),
                ),
            };
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            let pair = proc.amplitudes(t, z).unwrap();
            let norm_sq = pair.a.norm_sqr() + pair.b.norm_sqr();
            prop_assert!((norm_sq - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn populations_do_not_depend_on_the_path(t in 0.01..2.5f64,
                                                 z1 in -4.0..4.0f64,
                                                 z2 in -4.0..4.0f64) {
            let traj = damping_traj();
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            let p1 = proc.amplitudes(t, z1).unwrap();
            let p2 = proc.amplitudes(t, z2).unwrap();
            // a is bitwise path-independent; |b|^2 picks up at most the
            // rounding of one polar conversion
            prop_assert_eq!(p1.a.norm_sqr(), p2.a.norm_sqr());
            prop_assert!((p1.b.norm_sqr() - p2.b.norm_sqr()).abs() <= 1e-15);
        }

        #[test]
        fn coherence_ratio_never_exceeds_one(t in 0.0..3.0f64) {
            let traj = ohmic_traj();
            let rho = traj.density(t).unwrap();
            let bound = (rho.rho00 * rho.rho11).sqrt();
            prop_assert!(rho.rho10.norm() / bound <= 1.0 + 1e-12);
            let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
            prop_assert!(proc.sigma_sq_raw(t).unwrap() >= -1e-12);
        }
    }
}
