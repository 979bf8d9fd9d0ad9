//! The four CLI commands: `validate`, `synthesize`, `simulate`, `sweep`.
//!
//! Every command writes a run manifest next to its outputs. Commands are
//! deterministic given their configuration (seeds included); repeated runs
//! produce identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::channels::{gamma_ohmic, gamma_recurrence, Channel, Trajectory};
use crate::config::{ChannelConfig, EstimatorConfig, ScenarioConfig, SweepConfig};
use crate::ensemble::{compare, gh_average, mc_average, ComparisonReport, EnsembleEstimate};
use crate::error::{Error, Result};
use crate::integrator::propagate_path;
use crate::io;
use crate::synthesis::mc_draws;

/// Echo of the run: configuration, code version, timings and outcome.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub timings_ms: BTreeMap<String, f64>,
    pub pass: Option<bool>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            timings_ms: BTreeMap::new(),
            pass: None,
            outputs: Vec::new(),
            warnings: Vec::new(),
        })
    }

    fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

fn ensure_out_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ValiditySummary {
    pass: bool,
    tol: f64,
    worst_positivity: f64,
    worst_trace: f64,
    worst_coherence_bound: f64,
    worst_time: f64,
    grid_points: usize,
}

/// Check the trajectory's validity on the configured grid.
/// Returns `true` when every grid point passes.
pub fn cmd_validate(config: &ScenarioConfig, out_dir: &Path) -> Result<bool> {
    ensure_out_dir(out_dir)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new("validate", config)?;
    let traj = config.build_trajectory()?;
    let grid = config.grid()?;
    let times = grid.times();

    let mut summary = ValiditySummary {
        pass: true,
        tol: config.validity_tol,
        worst_positivity: 0.0,
        worst_trace: 0.0,
        worst_coherence_bound: 0.0,
        worst_time: times[0],
        grid_points: times.len(),
    };
    for &t in &times {
        let report = traj.density(t)?.validate(config.validity_tol);
        if report.worst() > summary
            .worst_positivity
            .max(summary.worst_trace)
            .max(summary.worst_coherence_bound)
        {
            summary.worst_time = t;
        }
        summary.worst_positivity = summary.worst_positivity.max(report.positivity);
        summary.worst_trace = summary.worst_trace.max(report.trace);
        summary.worst_coherence_bound =
            summary.worst_coherence_bound.max(report.coherence_bound);
        summary.pass &= report.passes();
    }

    let report_path = out_dir.join("validity.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&summary)?)?;
    manifest.outputs.push(report_path.display().to_string());
    manifest.pass = Some(summary.pass);
    manifest
        .timings_ms
        .insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    manifest.write(out_dir)?;
    Ok(summary.pass)
}

/// Synthesize and export per-path drive fields for a few sample paths.
pub fn cmd_synthesize(config: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new("synthesize", config)?;
    let traj = config.build_trajectory()?;
    let grid = config.grid()?;
    let opts = config.propagation_options();

    let draws = mc_draws(config.trace_paths.max(1), config.seed);
    let traces = draws
        .iter()
        .map(|d| propagate_path(&traj, &grid, d, &opts))
        .collect::<Result<Vec<_>>>()?;

    let fields_path = out_dir.join("fields.csv");
    io::write_field_trace_csv(&fields_path, &traces)?;
    manifest.outputs.push(fields_path.display().to_string());
    if config.dump_states {
        let states_path = out_dir.join("states.csv");
        io::write_states_csv(&states_path, &traces)?;
        manifest.outputs.push(states_path.display().to_string());
    }

    let worst_residue = traces
        .iter()
        .map(|t| t.stats.max_bz_residue)
        .fold(0.0, f64::max);
    if worst_residue > 1e-9 {
        manifest.warnings.push(format!(
            "field z-component imaginary residue reached {worst_residue:.3e}"
        ));
    }
    manifest.pass = Some(true);
    manifest
        .timings_ms
        .insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    manifest.write(out_dir)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    estimator: String,
    tol: f64,
    pass: bool,
    max_deviation: f64,
    worst_time: f64,
    max_norm_drift: f64,
    max_bz_residue: f64,
    total_su2_steps: u64,
    entropy_start: f64,
    entropy_mid: f64,
    entropy_end: f64,
}

fn run_estimator(
    config: &ScenarioConfig,
    traj: &Trajectory,
) -> Result<EnsembleEstimate> {
    let grid = config.grid()?;
    let opts = config.propagation_options();
    match config.estimator {
        EstimatorConfig::Gh { nodes } => gh_average(traj, &grid, nodes, &opts),
        EstimatorConfig::Mc { paths, seed } => mc_average(traj, &grid, paths, seed, &opts),
    }
}

/// Run the configured estimator and compare against the reference.
/// Returns `true` when the worst deviation stays within tolerance.
pub fn cmd_simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<bool> {
    ensure_out_dir(out_dir)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new("simulate", config)?;
    let traj = config.build_trajectory()?;

    let t_est = Instant::now();
    let estimate = run_estimator(config, &traj)?;
    manifest
        .timings_ms
        .insert("estimate".into(), t_est.elapsed().as_secs_f64() * 1e3);

    let report = compare(&estimate, &traj, config.tolerance)?;

    let result_path = out_dir.join("result.csv");
    io::write_result_csv(&result_path, &estimate, &traj)?;
    manifest.outputs.push(result_path.display().to_string());

    let mid = estimate.times[estimate.times.len() / 2];
    let summary = SimulateSummary {
        estimator: estimate.kind.to_string(),
        tol: config.tolerance,
        pass: report.pass,
        max_deviation: report.max_deviation,
        worst_time: report.worst_time,
        max_norm_drift: estimate.stats.max_norm_drift,
        max_bz_residue: estimate.stats.max_bz_residue,
        total_su2_steps: estimate.stats.total_steps,
        entropy_start: traj.density(estimate.times[0])?.entropy_clamped(),
        entropy_mid: traj.density(mid)?.entropy_clamped(),
        entropy_end: traj.density(*estimate.times.last().unwrap())?.entropy_clamped(),
    };
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    manifest.outputs.push(summary_path.display().to_string());

    manifest.pass = Some(report.pass);
    manifest
        .timings_ms
        .insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    manifest.write(out_dir)?;
    Ok(report.pass)
}

/// Decoherence exponent (or decay probability) at the grid midpoint.
fn gamma_midpoint(traj: &Trajectory, config: &ScenarioConfig) -> Result<f64> {
    let grid = config.grid()?;
    let tm = 0.5 * (grid.start + grid.end);
    Ok(match traj.channel() {
        Channel::Recurrence(p) => gamma_recurrence(tm, p),
        Channel::Ohmic(p) => gamma_ohmic(tm, p),
        Channel::AmplitudeDamping(p) => p.gamma(tm).0,
        Channel::Tabulated(_) => {
            let rho = traj.density(tm)?;
            let denom = (rho.rho00 * rho.rho11).sqrt();
            if denom > 0.0 && rho.rho10.norm() > 0.0 {
                -(rho.rho10.norm() / denom).ln()
            } else {
                f64::INFINITY
            }
        }
    })
}

fn apply_sweep_value(config: &ScenarioConfig, parameter: &str, value: f64) -> Result<ScenarioConfig> {
    let mut next = config.clone();
    match (&mut next.channel, parameter) {
        (ChannelConfig::Recurrence { modes, .. }, "modes") => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Usage(format!("modes must be a positive integer, got {value}")));
            }
            *modes = value as usize;
        }
        (ChannelConfig::Recurrence { period, .. }, "period") => *period = value,
        (ChannelConfig::Recurrence { omega0, .. }, "omega0") => *omega0 = Some(value),
        (ChannelConfig::Ohmic { j0, .. }, "j0") => *j0 = value,
        (ChannelConfig::Ohmic { cutoff, .. }, "cutoff") => *cutoff = value,
        (ChannelConfig::Ohmic { temperature, .. }, "temperature") => *temperature = value,
        (ChannelConfig::Ohmic { omega0, .. }, "omega0") => *omega0 = value,
        (ChannelConfig::AmplitudeDamping { t1 }, "t1") => *t1 = value,
        _ => {
            return Err(Error::Usage(format!(
                "parameter {parameter:?} does not apply to the configured channel"
            )))
        }
    }
    Ok(next)
}

pub const SWEEP_HEADER: &str =
    "parameter,value,gamma_mid,entropy_min,entropy_max,max_deviation,pass,error";

/// Run the estimator across a parameter range, one result row per point.
/// Failures are recorded per row and the sweep continues.
pub fn cmd_sweep(config: &ScenarioConfig, out_dir: &Path) -> Result<bool> {
    ensure_out_dir(out_dir)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new("sweep", config)?;
    let sweep: &SweepConfig = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Usage("sweep command needs a sweep section".into()))?;
    if sweep.values.is_empty() {
        return Err(Error::Usage("sweep range is empty".into()));
    }

    let mut lines = vec![SWEEP_HEADER.to_string()];
    let mut all_pass = true;
    for &value in &sweep.values {
        let row = sweep_point(config, &sweep.parameter, value);
        match row {
            Ok((gamma_mid, s_min, s_max, report)) => {
                all_pass &= report.pass;
                lines.push(format!(
                    "{},{},{},{},{},{},{},",
                    sweep.parameter,
                    value,
                    gamma_mid,
                    s_min,
                    s_max,
                    report.max_deviation,
                    report.pass
                ));
            }
            Err(e) => {
                all_pass = false;
                let msg = e.to_string().replace([',', '\n'], ";");
                lines.push(format!("{},{},,,,,false,{msg}", sweep.parameter, value));
            }
        }
    }

    let sweep_path = out_dir.join("sweep.csv");
    std::fs::write(&sweep_path, lines.join("\n") + "\n")?;
    manifest.outputs.push(sweep_path.display().to_string());
    manifest.pass = Some(all_pass);
    manifest
        .timings_ms
        .insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    manifest.write(out_dir)?;
    Ok(all_pass)
}

fn sweep_point(
    config: &ScenarioConfig,
    parameter: &str,
    value: f64,
) -> Result<(f64, f64, f64, ComparisonReport)> {
    let point_config = apply_sweep_value(config, parameter, value)?;
    point_config.validate()?;
    let traj = point_config.build_trajectory()?;
    let estimate = run_estimator(&point_config, &traj)?;
    let report = compare(&estimate, &traj, point_config.tolerance)?;
    let gamma_mid = gamma_midpoint(&traj, &point_config)?;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for &t in &estimate.times {
        let s = traj.density(t)?.entropy_clamped();
        s_min = s_min.min(s);
        s_max = s_max.max(s);
    }
    Ok((gamma_mid, s_min, s_max, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn base_config() -> ScenarioConfig {
        serde_json::from_str(
            r#"{
                "channel": {"kind": "recurrence", "modes": 30, "period": 1.0},
                "initial": {"alpha": [0.7071067811865476, 0.0],
                            "beta": [0.7071067811865476, 0.0]},
                "grid": {"end": 1.0, "points": 60},
                "estimator": {"kind": "gh", "nodes": 16},
                "max_step_angle": 0.001
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn validate_passes_for_builtin_channel() {
        let dir = tempdir().unwrap();
        assert!(cmd_validate(&base_config(), dir.path()).unwrap());
        assert!(dir.path().join("validity.json").exists());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn synthesize_is_deterministic() {
        let dir = tempdir().unwrap();
        let mut config = base_config();
        config.grid.points = 20;
        config.trace_paths = 3;
        cmd_synthesize(&config, &dir.path().join("a")).unwrap();
        cmd_synthesize(&config, &dir.path().join("b")).unwrap();
        let a = std::fs::read(dir.path().join("a/fields.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b/fields.csv")).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        // three path groups, header plus 3 * 20 rows
        assert_eq!(text.lines().count(), 1 + 60);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
        assert!(text.lines().last().unwrap().starts_with("2,"));
    }

    #[test]
    fn sweep_reports_one_row_per_value() {
        let dir = tempdir().unwrap();
        let mut config = base_config();
        config.grid.points = 40;
        // 32 nodes resolve the saturated coherence width to ~1e-3; this
        // test exercises the sweep mechanics, not estimator accuracy
        config.estimator = EstimatorConfig::Gh { nodes: 32 };
        config.tolerance = 0.01;
        config.sweep = Some(SweepConfig {
            parameter: "modes".into(),
            values: vec![10.0, 20.0, 30.0],
        });
        assert!(cmd_sweep(&config, dir.path()).unwrap());
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 4);
        // decoherence exponent at mid-period: 8 * ceil(N/2)
        for (row, expect) in rows[1..].iter().zip([40.0, 80.0, 120.0]) {
            let gamma: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
            assert!((gamma - expect).abs() <= 1e-9, "{row}");
        }
    }

    #[test]
    fn sweep_without_range_is_a_usage_error() {
        let dir = tempdir().unwrap();
        let err = cmd_sweep(&base_config(), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let mut config = base_config();
        config.sweep = Some(SweepConfig {
            parameter: "modes".into(),
            values: vec![],
        });
        assert_eq!(cmd_sweep(&config, dir.path()).unwrap_err().exit_code(), 2);
    }
}
