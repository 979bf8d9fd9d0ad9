//! Classical stochastic drives for single-qubit open-system trajectories.
//!
//! Given any valid qubit trajectory `rho(t)` — a built-in channel or a
//! tabulated one — this crate constructs an equivalent classical picture:
//! an ensemble of magnetic-field noise histories, each driving a pure
//! state through an ordinary Schrödinger equation, whose path average
//! reproduces `rho(t)` exactly (up to quadrature and integrator
//! tolerance). The whole ensemble is indexed by a single standard normal
//! variable, so deterministic Gauss-Hermite quadrature and Monte Carlo
//! sampling share the same per-path propagator.
//!
//! The examples directory is the best starting point; each file is a
//! runnable demonstration of one capability:
//!
//! ```text
//! examples/
//! ├── validate_trajectory.rs     trajectory validity checks
//! ├── recurrence_entropy.rs      entropy dip 0 -> ln 2 -> 0 of a finite bath
//! ├── dephasing_equivalence.rs   quadrature ensemble vs closed form
//! ├── amplitude_damping.rs       a non-unital channel driven classically
//! ├── synthesize_field.rs        exporting per-path drive fields
//! ├── monte_carlo_errorbars.rs   sampling with standard errors
//! ├── mixed_initial_state.rs     expanding a mixed state over pure paths
//! └── tabulated_roundtrip.rs     CSV dump, reload and re-simulation
//! ```
//!
//! Run one with `cargo run --release --example dephasing_equivalence`.
//!
//! A thin binary exposes the same machinery as `validate` / `synthesize` /
//! `simulate` / `sweep` subcommands over JSON scenario configs; see the
//! README.

pub mod channels;
pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod io;
pub mod qubit;
pub mod quadrature;
pub mod spline;
pub mod synthesis;

pub use channels::{
    AmplitudeDampingParams, InitialState, OhmicParams, RecurrenceParams, Tabulated, TrajPoint,
    Trajectory,
};
pub use ensemble::{
    compare, gh_average, initial_expansion_check, mc_average, ComparisonReport, EnsembleEstimate,
    EstimatorKind,
};
pub use error::{Error, Result};
pub use integrator::{
    path_infidelity, propagate_path, propagate_with, PathStats, PathTrace, PropagationOptions,
    TimeGrid,
};
pub use qubit::{
    su2_step, BlochVector, DensityMatrix, FieldSample, PureState, Su2Matrix, ValidityReport,
    DEFAULT_VALIDITY_TOL,
};
pub use quadrature::GaussHermite;
pub use synthesis::{
    gh_draws, mc_draws, phase_characteristic, saturate_variance, AmplitudePair, PathDraw,
    PhaseProcess, SynthesisOptions, DEFAULT_SIGMA_SQ_MAX,
};
