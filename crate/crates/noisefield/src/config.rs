//! Scenario configuration: a single JSON document describing the channel,
//! the grid, the estimator and the numerical controls.
//!
//! All quantities are in hbar = 1 units; times are in the channel's
//! natural scale (the recurrence period, the inverse cutoff, or the
//! relaxation time).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{
    AmplitudeDampingParams, InitialState, OhmicParams, RecurrenceParams, Trajectory,
};
use crate::error::{Error, Result};
use crate::integrator::{PropagationOptions, TimeGrid};
use crate::synthesis::{SynthesisOptions, DEFAULT_SIGMA_SQ_MAX};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub channel: ChannelConfig,
    /// Initial pure state; required by the closed-form channels.
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Comparison tolerance for `simulate`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Absolute tolerance for the density-matrix validity checks.
    #[serde(default = "default_validity_tol")]
    pub validity_tol: f64,
    /// Ceiling for the phase variance.
    #[serde(default = "default_sigma_sq_max")]
    pub sigma_sq_max: f64,
    /// Per-factor rotation bound for the propagator, radians.
    #[serde(default = "default_max_step_angle")]
    pub max_step_angle: f64,
    #[serde(default = "default_min_substeps")]
    pub min_substeps: usize,
    /// Seed for `synthesize` path draws.
    #[serde(default)]
    pub seed: u64,
    /// Number of paths exported by `synthesize`.
    #[serde(default = "default_trace_paths")]
    pub trace_paths: usize,
    /// Also dump per-path state amplitudes during `synthesize`.
    #[serde(default)]
    pub dump_states: bool,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_tolerance() -> f64 {
    1e-7
}

fn default_validity_tol() -> f64 {
    1e-12
}

fn default_sigma_sq_max() -> f64 {
    DEFAULT_SIGMA_SQ_MAX
}

fn default_max_step_angle() -> f64 {
    1e-3
}

fn default_min_substeps() -> usize {
    1
}

fn default_trace_paths() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Recurrence {
        modes: usize,
        period: f64,
        /// Defaults to one full turn per period, which keeps the whole
        /// trajectory periodic.
        #[serde(default)]
        omega0: Option<f64>,
        /// Mode couplings as `[re, im]` pairs; defaults to `|g_n| = omega_n`.
        #[serde(default)]
        couplings: Option<Vec<[f64; 2]>>,
    },
    Ohmic {
        j0: f64,
        cutoff: f64,
        temperature: f64,
        #[serde(default)]
        omega0: f64,
    },
    AmplitudeDamping {
        t1: f64,
    },
    Tabulated {
        path: String,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Gh { nodes: usize },
    Mc { paths: usize, seed: u64 },
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig::Gh { nodes: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of: modes, period, omega0, j0, cutoff, temperature, t1.
    pub parameter: String,
    pub values: Vec<f64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ScenarioConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.points < 2 {
            return Err(Error::Config("grid.points must be at least 2".into()));
        }
        if !(self.grid.end > self.grid.start) {
            return Err(Error::Config("grid.end must exceed grid.start".into()));
        }
        if !(self.tolerance > 0.0) || !(self.validity_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.max_step_angle > 0.0) {
            return Err(Error::Config("max_step_angle must be positive".into()));
        }
        if !(self.sigma_sq_max > 0.0) {
            return Err(Error::Config("sigma_sq_max must be positive".into()));
        }
        if matches!(self.channel, ChannelConfig::Tabulated { .. }) {
            // tabulated trajectories carry their own state
        } else if self.initial.is_none() {
            return Err(Error::Config(
                "closed-form channels need an initial state".into(),
            ));
        }
        if let EstimatorConfig::Mc { paths, .. } = self.estimator {
            if paths < 2 {
                return Err(Error::Config("mc estimator needs at least 2 paths".into()));
            }
        }
        if let EstimatorConfig::Gh { nodes } = self.estimator {
            if nodes < 2 {
                return Err(Error::Config("gh estimator needs at least 2 nodes".into()));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        let init = self
            .initial
            .ok_or_else(|| Error::Config("missing initial state".into()))?;
        InitialState::new(
            Complex64::new(init.alpha[0], init.alpha[1]),
            Complex64::new(init.beta[0], init.beta[1]),
        )
    }

    /// Build the reference trajectory this scenario describes.
    pub fn build_trajectory(&self) -> Result<Trajectory> {
        match &self.channel {
            ChannelConfig::Recurrence {
                modes,
                period,
                omega0,
                couplings,
            } => {
                let mut params = RecurrenceParams::new(
                    omega0.unwrap_or(2.0 * std::f64::consts::PI / period),
                    *modes,
                    *period,
                )?;
                if let Some(gs) = couplings {
                    if gs.len() != *modes {
                        return Err(Error::Config(format!(
                            "expected {} couplings, found {}",
                            modes,
                            gs.len()
                        )));
                    }
                    params.couplings =
                        Some(gs.iter().map(|g| Complex64::new(g[0], g[1])).collect());
                }
                Ok(Trajectory::recurrence(params, self.initial_state()?))
            }
            ChannelConfig::Ohmic {
                j0,
                cutoff,
                temperature,
                omega0,
            } => Ok(Trajectory::ohmic(
                OhmicParams::new(*j0, *cutoff, *temperature, *omega0)?,
                self.initial_state()?,
            )),
            ChannelConfig::AmplitudeDamping { t1 } => Ok(Trajectory::amplitude_damping(
                AmplitudeDampingParams::exponential(*t1)?,
                self.initial_state()?,
            )),
            ChannelConfig::Tabulated { path } => {
                crate::io::load_trajectory(Path::new(path), self.validity_tol.max(1e-9))
            }
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.start, self.grid.end, self.grid.points)
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            synthesis: SynthesisOptions {
                sigma_sq_max: self.sigma_sq_max,
            },
            max_step_angle: self.max_step_angle,
            min_substeps: self.min_substeps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "channel": {"kind": "ohmic", "j0": 1.0, "cutoff": 100.0,
                        "temperature": 1.0, "omega0": 1.0},
            "initial": {"alpha": [0.7071067811865476, 0.0],
                        "beta": [0.7071067811865476, 0.0]},
            "grid": {"end": 3.0, "points": 200}
        }"#
    }

    #[test]
    fn parses_with_defaults() {
        let config: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.tolerance, 1e-7);
        assert!(matches!(
            config.estimator,
            EstimatorConfig::Gh { nodes: 64 }
        ));
        let traj = config.build_trajectory().unwrap();
        assert!(traj.density(1.0).unwrap().validate(1e-10).passes());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_grids() {
        let bad = minimal_json().replace("\"grid\"", "\"grd\"");
        assert!(serde_json::from_str::<ScenarioConfig>(&bad).is_err());

        let mut config: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        config.grid.points = 1;
        assert!(config.validate().is_err());
    }

    #[test]
    fn recurrence_omega0_defaults_to_one_turn_per_period() {
        let json = r#"{
            "channel": {"kind": "recurrence", "modes": 30, "period": 2.0},
            "initial": {"alpha": [0.7071067811865476, 0.0],
                        "beta": [0.7071067811865476, 0.0]},
            "grid": {"end": 2.0, "points": 100}
        }"#;
        let config: ScenarioConfig = serde_json::from_str(json).unwrap();
        let traj = config.build_trajectory().unwrap();
        // periodic including the coherence phase
        let a = traj.density(0.3).unwrap();
        let b = traj.density(2.3).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-10);
    }

    #[test]
    fn closed_form_channels_require_an_initial_state() {
        let json = r#"{
            "channel": {"kind": "amplitude_damping", "t1": 1.0},
            "grid": {"end": 3.0, "points": 50}
        }"#;
        let config: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }
}
