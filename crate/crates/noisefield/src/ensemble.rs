//! Path averaging: reconstruct the reference density matrix from the
//! synthesized ensemble, deterministically (Gauss-Hermite) or by Monte
//! Carlo, and compare against the reference.
//!
//! Reductions run in a fixed path order regardless of how many threads
//! propagate the paths, so results are bitwise reproducible.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::Trajectory;
use crate::error::{Error, Result};
use crate::integrator::{propagate_with, PropagationOptions, TimeGrid};
use crate::qubit::{DensityMatrix, PureState};
use crate::synthesis::{gh_draws, mc_draws, PathDraw, PhaseProcess};

/// How an ensemble estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimatorKind {
    GaussHermite { nodes: usize },
    MonteCarlo { paths: usize, seed: u64 },
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::GaussHermite { nodes } => write!(f, "gh(n={nodes})"),
            EstimatorKind::MonteCarlo { paths, seed } => write!(f, "mc(M={paths}, seed={seed})"),
        }
    }
}

/// Numerical health aggregated over all paths of an estimate.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnsembleStats {
    pub max_norm_drift: f64,
    pub max_bz_residue: f64,
    pub total_steps: u64,
}

/// Path-averaged density matrix on a time grid.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub estimates: Vec<DensityMatrix>,
    /// Standard errors per time for `(rho00, Re rho10, Im rho10)`;
    /// Monte Carlo only.
    pub std_errors: Option<Vec<[f64; 3]>>,
    pub kind: EstimatorKind,
    pub stats: EnsembleStats,
}

/// Per-time real components contributed by one path.
type Components = [f64; 4]; // rho00, rho11, re10, im10

fn state_components(psi: &PureState) -> Components {
    let r10 = psi.b * psi.a.conj();
    [psi.a.norm_sqr(), psi.b.norm_sqr(), r10.re, r10.im]
}

fn path_components(
    traj: &Trajectory,
    grid: &TimeGrid,
    draw: &PathDraw,
    opts: &PropagationOptions,
) -> Result<(Vec<Components>, crate::integrator::PathStats)> {
    let mut rows = vec![[0.0; 4]; grid.points];
    let stats = propagate_with(traj, grid, draw, opts, |k, _, psi| {
        rows[k] = state_components(psi);
    })?;
    Ok((rows, stats))
}

/// Deterministic quadrature average over the path ensemble.
///
/// Populations are exact by construction; the off-diagonal converges to
/// the reference coherence at the quadrature's resolution.
pub fn gh_average(
    traj: &Trajectory,
    grid: &TimeGrid,
    n_nodes: usize,
    opts: &PropagationOptions,
) -> Result<EnsembleEstimate> {
    if n_nodes < 2 {
        return Err(Error::Usage("quadrature average needs >= 2 nodes".into()));
    }
    let draws = gh_draws(n_nodes)?;
    let per_path: Vec<_> = draws
        .par_iter()
        .map(|d| path_components(traj, grid, d, opts))
        .collect::<Result<_>>()?;

    let mut acc = vec![[0.0f64; 4]; grid.points];
    let mut stats = EnsembleStats::default();
    for (draw, (rows, path_stats)) in draws.iter().zip(&per_path) {
        for (a, r) in acc.iter_mut().zip(rows) {
            for c in 0..4 {
                a[c] += draw.weight * r[c];
            }
        }
        stats.max_norm_drift = stats.max_norm_drift.max(path_stats.norm_drift);
        stats.max_bz_residue = stats.max_bz_residue.max(path_stats.max_bz_residue);
        stats.total_steps += path_stats.steps;
    }
    Ok(EnsembleEstimate {
        times: grid.times(),
        estimates: acc.iter().map(components_to_density).collect(),
        std_errors: None,
        kind: EstimatorKind::GaussHermite { nodes: n_nodes },
        stats,
    })
}

/// Monte Carlo average of `paths` sample paths with per-component
/// standard errors. Reproducible for a given `(seed, paths)` no matter
/// how the work is scheduled.
pub fn mc_average(
    traj: &Trajectory,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    opts: &PropagationOptions,
) -> Result<EnsembleEstimate> {
    if paths < 2 {
        return Err(Error::Usage("Monte Carlo average needs >= 2 paths".into()));
    }
    let draws = mc_draws(paths, seed);
    let mut acc = WelfordAccumulator::new(grid.points);
    let mut stats = EnsembleStats::default();

    // parallelize inside fixed-size chunks, merge sequentially in path order
    const CHUNK: usize = 256;
    for chunk in draws.chunks(CHUNK) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|d| path_components(traj, grid, d, opts))
            .collect::<Result<_>>()?;
        for (rows, path_stats) in &results {
            acc.push(rows);
            stats.max_norm_drift = stats.max_norm_drift.max(path_stats.norm_drift);
            stats.max_bz_residue = stats.max_bz_residue.max(path_stats.max_bz_residue);
            stats.total_steps += path_stats.steps;
        }
    }

    let (means, errs) = acc.finish();
    Ok(EnsembleEstimate {
        times: grid.times(),
        estimates: means.iter().map(components_to_density).collect(),
        std_errors: Some(errs),
        kind: EstimatorKind::MonteCarlo { paths, seed },
        stats,
    })
}

fn components_to_density(c: &Components) -> DensityMatrix {
    DensityMatrix {
        rho00: c[0],
        rho11: c[1],
        rho10: Complex64::new(c[2], c[3]),
    }
}

/// Streaming mean and variance over paths, updated in a fixed order.
struct WelfordAccumulator {
    n: u64,
    mean: Vec<Components>,
    /// Sum of squared deviations for (rho00, re10, im10).
    m2: Vec<[f64; 3]>,
}

impl WelfordAccumulator {
    fn new(points: usize) -> Self {
        Self {
            n: 0,
            mean: vec![[0.0; 4]; points],
            m2: vec![[0.0; 3]; points],
        }
    }

    fn push(&mut self, rows: &[Components]) {
        self.n += 1;
        let n = self.n as f64;
        for (k, row) in rows.iter().enumerate() {
            let mean = &mut self.mean[k];
            let m2 = &mut self.m2[k];
            for c in 0..4 {
                let delta = row[c] - mean[c];
                mean[c] += delta / n;
                if let Some(slot) = se_slot(c) {
                    m2[slot] += delta * (row[c] - mean[c]);
                }
            }
        }
    }

    fn finish(self) -> (Vec<Components>, Vec<[f64; 3]>) {
        let n = self.n as f64;
        let errs = self
            .m2
            .iter()
            .map(|m2| {
                let mut e = [0.0; 3];
                for (i, &v) in m2.iter().enumerate() {
                    e[i] = (v.max(0.0) / (n * (n - 1.0))).sqrt();
                }
                e
            })
            .collect();
        (self.mean, errs)
    }
}

fn se_slot(component: usize) -> Option<usize> {
    match component {
        0 => Some(0),
        2 => Some(1),
        3 => Some(2),
        _ => None,
    }
}

/// Outcome of comparing an estimate against a reference trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub worst_time: f64,
    pub tol: f64,
    pub pass: bool,
    pub estimator: String,
}

/// Entry-wise worst deviation of the estimate from the reference at every
/// grid time; passes iff the overall worst stays within `tol`.
pub fn compare(
    estimate: &EnsembleEstimate,
    traj: &Trajectory,
    tol: f64,
) -> Result<ComparisonReport> {
    if estimate.times.is_empty() {
        return Err(Error::Usage("empty estimate".into()));
    }
    traj.check_domain(*estimate.times.first().unwrap())
        .and_then(|_| traj.check_domain(*estimate.times.last().unwrap()))
        .map_err(|_| {
            Error::Usage(format!(
                "estimate grid [{}, {}] does not match the trajectory domain [{}, {}]",
                estimate.times.first().unwrap(),
                estimate.times.last().unwrap(),
                traj.start(),
                traj.end()
            ))
        })?;
    let mut deviations = Vec::with_capacity(estimate.times.len());
    let mut max_deviation = 0.0f64;
    let mut worst_time = estimate.times[0];
    for (&t, est) in estimate.times.iter().zip(&estimate.estimates) {
        let reference = traj.density(t)?;
        let d = est.max_abs_diff(&reference);
        if d > max_deviation {
            max_deviation = d;
            worst_time = t;
        }
        deviations.push(d);
    }
    Ok(ComparisonReport {
        deviations,
        max_deviation,
        worst_time,
        tol,
        pass: max_deviation <= tol,
        estimator: estimate.kind.to_string(),
    })
}

/// Check the expansion of the state at the initial time: the weighted
/// initial path projectors must reconstruct `rho(t_i)`, mixed states
/// included (the evolution operator is the identity there).
pub fn initial_expansion_check(
    traj: &Trajectory,
    n_nodes: usize,
    opts: &PropagationOptions,
) -> Result<ComparisonReport> {
    let proc = PhaseProcess::new(traj, opts.synthesis);
    let t_i = traj.start();
    let draws = gh_draws(n_nodes)?;
    let mut acc = [0.0f64; 4];
    for d in &draws {
        let psi = proc.analytic_state(t_i, d.z)?;
        let c = state_components(&psi);
        for k in 0..4 {
            acc[k] += d.weight * c[k];
        }
    }
    let reconstructed = components_to_density(&acc);
    let reference = traj.density(t_i)?;
    let dev = reconstructed.max_abs_diff(&reference);
    Ok(ComparisonReport {
        deviations: vec![dev],
        max_deviation: dev,
        worst_time: t_i,
        tol: 1e-8,
        pass: dev <= 1e-8,
        estimator: format!("initial-expansion gh(n={n_nodes})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        AmplitudeDampingParams, InitialState, OhmicParams, Tabulated, Trajectory,
    };
    use crate::synthesis::{phase_characteristic, SynthesisOptions};

    fn ohmic_traj() -> Trajectory {
        Trajectory::ohmic(
            OhmicParams::new(1.0, 100.0, 1.0, 1.0).unwrap(),
            InitialState::equal_superposition(),
        )
    }

    fn tight_opts() -> PropagationOptions {
        PropagationOptions::default().with_max_step_angle(2e-5)
    }

    #[test]
    fn quadrature_reproduces_dephasing_off_diagonal() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 0.5, 26).unwrap();
        let est = gh_average(&traj, &grid, 32, &tight_opts()).unwrap();
        let proc = PhaseProcess::new(&traj, SynthesisOptions::default());
        for (&t, rho) in est.times.iter().zip(&est.estimates).skip(1) {
            let point = traj.point(t).unwrap();
            let expected_ratio = phase_characteristic(proc.sigma_sq(t).unwrap());
            let scale = (point.rho00 * (1.0 - point.rho00)).sqrt();
            let phase = Complex64::from_polar(1.0, point.theta);
            let predicted = scale * expected_ratio * phase;
            assert!(
                (rho.rho10 - predicted).norm() <= 1e-9,
                "t = {t}: {:?} vs {:?}",
                rho.rho10,
                predicted
            );
        }
    }

    #[test]
    fn quadrature_matches_damping_closed_form() {
        let traj = Trajectory::amplitude_damping(
            AmplitudeDampingParams::exponential(1.0).unwrap(),
            InitialState::equal_superposition(),
        );
        let grid = TimeGrid::new(0.0, 2.0, 41).unwrap();
        let est = gh_average(&traj, &grid, 64, &tight_opts()).unwrap();
        let report = compare(&est, &traj, 1e-8).unwrap();
        assert!(report.pass, "max deviation {}", report.max_deviation);
    }

    #[test]
    fn estimate_trace_and_positivity() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 21).unwrap();
        let est = gh_average(&traj, &grid, 16, &PropagationOptions::default()).unwrap();
        for rho in &est.estimates {
            assert!((rho.rho00 + rho.rho11 - 1.0).abs() <= 1e-12);
            let (_, lo) = rho.eigenvalues();
            assert!(lo >= -1e-12);
        }
    }

    #[test]
    fn diagonals_are_exact_for_tiny_node_counts() {
        // populations come out right no matter how few nodes average them;
        // only the integrator resolution matters
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let coarse = gh_average(&traj, &grid, 4, &tight_opts()).unwrap();
        let fine = gh_average(&traj, &grid, 16, &tight_opts()).unwrap();
        for ((&t, rho), rho16) in est_iter(&coarse).zip(&fine.estimates) {
            let reference = traj.density(t).unwrap();
            assert!((rho.rho00 - reference.rho00).abs() <= 1e-9);
            assert!((rho.rho11 - reference.rho11).abs() <= 1e-9);
            assert!((rho.rho00 - rho16.rho00).abs() <= 1e-9);
        }
    }

    fn est_iter(
        est: &EnsembleEstimate,
    ) -> impl Iterator<Item = (&f64, &DensityMatrix)> {
        est.times.iter().zip(&est.estimates)
    }

    #[test]
    fn mc_is_reproducible_and_consistent() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let opts = PropagationOptions::default();
        let e1 = mc_average(&traj, &grid, 600, 7, &opts).unwrap();
        let e2 = mc_average(&traj, &grid, 600, 7, &opts).unwrap();
        for (a, b) in e1.estimates.iter().zip(&e2.estimates) {
            assert_eq!(a.rho10, b.rho10);
            assert_eq!(a.rho00, b.rho00);
        }
        // statistical agreement with the reference within 5 SE + floor
        let errs = e1.std_errors.as_ref().unwrap();
        for ((&t, rho), err) in e1.times.iter().zip(&e1.estimates).zip(errs) {
            let reference = traj.density(t).unwrap();
            assert!((rho.rho00 - reference.rho00).abs() <= 5.0 * err[0] + 1e-9);
            assert!((rho.rho10.re - reference.rho10.re).abs() <= 5.0 * err[1] + 1e-9);
            assert!((rho.rho10.im - reference.rho10.im).abs() <= 5.0 * err[2] + 1e-9);
        }
    }

    #[test]
    fn mc_standard_errors_shrink_like_root_m() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 6).unwrap();
        let opts = PropagationOptions::default();
        let mean_se = |m: usize| -> f64 {
            let est = mc_average(&traj, &grid, m, 11, &opts).unwrap();
            let errs = est.std_errors.unwrap();
            errs.iter().map(|e| e[1] + e[2]).sum::<f64>() / errs.len() as f64
        };
        let s1 = mean_se(400);
        let s2 = mean_se(4000);
        let exponent = (s2 / s1).ln() / 10f64.ln();
        assert!(
            (-0.65..=-0.35).contains(&exponent),
            "exponent {exponent} (SE {s1:.3e} -> {s2:.3e})"
        );
    }

    #[test]
    fn estimators_agree_within_statistics() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let opts = PropagationOptions::default();
        let gh = gh_average(&traj, &grid, 64, &opts).unwrap();
        let mc = mc_average(&traj, &grid, 4000, 3, &opts).unwrap();
        let errs = mc.std_errors.as_ref().unwrap();
        for ((g, m), e) in gh.estimates.iter().zip(&mc.estimates).zip(errs) {
            let se = e[1].max(e[2]).max(1e-9);
            assert!(g.max_abs_diff(m) <= 5.0 * se);
        }
    }

    #[test]
    fn compare_flags_a_wrong_reference() {
        let traj = ohmic_traj();
        let grid = TimeGrid::new(0.0, 1.0, 21).unwrap();
        let est = gh_average(&traj, &grid, 32, &PropagationOptions::default()).unwrap();
        // same channel, wrong splitting
        let wrong = Trajectory::ohmic(
            OhmicParams::new(1.0, 100.0, 1.0, 1.4).unwrap(),
            InitialState::equal_superposition(),
        );
        let report = compare(&est, &wrong, 1e-7).unwrap();
        assert!(!report.pass);
        assert!(report.worst_time > 0.0);
        // and the self-comparison is clean
        let self_report = compare(&est, &traj, 1e-6).unwrap();
        assert!(self_report.pass);
    }

    #[test]
    fn initial_expansion_pure_state_is_exact() {
        let report = initial_expansion_check(&ohmic_traj(), 16, &PropagationOptions::default())
            .unwrap();
        assert!(report.max_deviation <= 1e-14);
    }

    #[test]
    fn initial_expansion_reconstructs_a_mixture() {
        let times: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let rows: Vec<DensityMatrix> = times
            .iter()
            .map(|_| DensityMatrix::new(0.7, 0.3, Complex64::new(0.2, 0.0)))
            .collect();
        let table = Tabulated::from_samples(&times, &rows, 1e-9).unwrap();
        let traj = Trajectory::tabulated(table);
        let report =
            initial_expansion_check(&traj, 64, &PropagationOptions::default()).unwrap();
        assert!(report.max_deviation <= 1e-8, "dev {}", report.max_deviation);
    }

    #[test]
    fn initial_expansion_with_dead_coherence_saturates() {
        let times: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let rows: Vec<DensityMatrix> = times.iter().map(|_| DensityMatrix::completely_mixed()).collect();
        let table = Tabulated::from_samples(&times, &rows, 1e-9).unwrap();
        let traj = Trajectory::tabulated(table);
        let report =
            initial_expansion_check(&traj, 64, &PropagationOptions::default()).unwrap();
        // diagonals exact, off-diagonal bounded by the saturated width
        assert!(report.max_deviation <= 1e-12, "dev {}", report.max_deviation);
    }
}
