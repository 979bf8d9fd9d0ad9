//! File formats: trajectory tables, field traces, state dumps and result
//! tables, all plain CSV with one header line. Floats are written with the
//! shortest round-trip representation, so a dump reloads bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::channels::{Tabulated, Trajectory};
use crate::ensemble::EnsembleEstimate;
use crate::error::{Error, Result};
use crate::integrator::PathTrace;
use crate::qubit::DensityMatrix;

pub const TRAJECTORY_HEADER: &str = "t,rho00,rho11,re_rho10,im_rho10";
pub const FIELD_TRACE_HEADER: &str = "path_id,z,t,Bx,By,Bz";
pub const STATE_DUMP_HEADER: &str = "path_id,t,re_a,im_a,re_b,im_b";
pub const RESULT_HEADER: &str = "t,rho00_ref,rho11_ref,re10_ref,im10_ref,\
rho00_est,rho11_est,re10_est,im10_est,se00,se_re10,se_im10,entropy_ref,entropy_est";

/// Write a trajectory table.
pub fn write_trajectory_csv(
    path: &Path,
    times: &[f64],
    rows: &[DensityMatrix],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (t, rho) in times.iter().zip(rows) {
        writeln!(
            w,
            "{},{},{},{},{}",
            t, rho.rho00, rho.rho11, rho.rho10.re, rho.rho10.im
        )?;
    }
    Ok(())
}

/// Parse a trajectory table into times and density matrices.
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<f64>, Vec<DensityMatrix>)> {
    let file_name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::TrajectoryFile {
            file: file_name.clone(),
            row: 0,
            msg: "empty file".into(),
        })??;
    if header.trim() != TRAJECTORY_HEADER {
        return Err(Error::TrajectoryFile {
            file: file_name.clone(),
            row: 0,
            msg: format!("bad header {header:?}, expected {TRAJECTORY_HEADER:?}"),
        });
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::TrajectoryFile {
                file: file_name.clone(),
                row: i,
                msg: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 5];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f.trim().parse().map_err(|e| Error::TrajectoryFile {
                file: file_name.clone(),
                row: i,
                msg: format!("field {j} ({f:?}): {e}"),
            })?;
        }
        times.push(vals[0]);
        rows.push(DensityMatrix {
            rho00: vals[1],
            rho11: vals[2],
            rho10: Complex64::new(vals[3], vals[4]),
        });
    }
    Ok((times, rows))
}

/// Load a tabulated trajectory, validating every row at tolerance `tol`.
pub fn load_trajectory(path: &Path, tol: f64) -> Result<Trajectory> {
    let (times, rows) = read_trajectory_csv(path)?;
    let table = Tabulated::from_samples(&times, &rows, tol).map_err(|e| match e {
        Error::TrajectoryFile { row, msg, .. } => Error::TrajectoryFile {
            file: path.display().to_string(),
            row,
            msg,
        },
        Error::Usage(msg) => Error::TrajectoryFile {
            file: path.display().to_string(),
            row: 0,
            msg,
        },
        other => other,
    })?;
    Ok(Trajectory::tabulated(table))
}

/// Per-path drive samples, grouped by path id.
pub fn write_field_trace_csv(path: &Path, traces: &[PathTrace]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FIELD_TRACE_HEADER}")?;
    for trace in traces {
        for f in &trace.fields {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                trace.draw.id, trace.draw.z, f.t, f.bx, f.by, f.bz
            )?;
        }
    }
    Ok(())
}

/// Per-path state amplitudes on the grid.
pub fn write_states_csv(path: &Path, traces: &[PathTrace]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{STATE_DUMP_HEADER}")?;
    for trace in traces {
        for (t, s) in trace.times.iter().zip(&trace.states) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                trace.draw.id, t, s.a.re, s.a.im, s.b.re, s.b.im
            )?;
        }
    }
    Ok(())
}

/// Reference-vs-estimate table, one row per grid time.
pub fn write_result_csv(
    path: &Path,
    estimate: &EnsembleEstimate,
    traj: &Trajectory,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RESULT_HEADER}")?;
    for (k, (&t, est)) in estimate.times.iter().zip(&estimate.estimates).enumerate() {
        let reference = traj.density(t)?;
        let se = estimate
            .std_errors
            .as_ref()
            .map(|errs| errs[k])
            .unwrap_or([0.0; 3]);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t,
            reference.rho00,
            reference.rho11,
            reference.rho10.re,
            reference.rho10.im,
            est.rho00,
            est.rho11,
            est.rho10.re,
            est.rho10.im,
            se[0],
            se[1],
            se[2],
            reference.entropy_clamped(),
            est.entropy_clamped()
        )?;
    }
    Ok(())
}
