//! Phase-plane report for a list of constant controls.

use std::fs::File;
use std::path::{Path, PathBuf};

use lv_optctl::dynamics::{fixed_points, nullclines, phase_trajectory, FixedPointReport, KineticsParams, Nullcline, PhaseBox};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOptions {
    /// Constant controls to analyze; empty means `(0, 0)` only.
    pub controls: Vec<[f64; 2]>,
    pub start: [f64; 2],
    pub t_end: f64,
    pub dt_out: f64,
    pub phase_box: PhaseBox,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            controls: Vec::new(),
            start: [16.125, 24.0],
            t_end: 100.0,
            dt_out: 0.1,
            phase_box: PhaseBox {
                y1: (0.0, 60.0),
                y2: (0.0, 50.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlReport {
    pub control: [f64; 2],
    pub fixed_points: Vec<FixedPointReport>,
    pub nullclines: Vec<Nullcline>,
    pub trajectory: Vec<(f64, [f64; 2])>,
}

pub fn run_dynamics_report(base: &KineticsParams, opts: &DynamicsOptions) -> CliResult<Vec<ControlReport>> {
    let controls = if opts.controls.is_empty() {
        vec![[0.0, 0.0]]
    } else {
        opts.controls.clone()
    };
    controls
        .into_iter()
        .map(|g| {
            let p = base.with_control(g[0], g[1]);
            Ok(ControlReport {
                control: g,
                fixed_points: fixed_points(&p)?,
                nullclines: nullclines(&p, opts.phase_box),
                trajectory: phase_trajectory(&p, opts.start, opts.t_end, opts.dt_out)?,
            })
        })
        .collect()
}

/// Writes `fixed_points.csv`, `nullclines.csv` and `trajectories.csv`.
pub fn write_dynamics_report(reports: &[ControlReport], dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let paths = [
        dir.join("fixed_points.csv"),
        dir.join("nullclines.csv"),
        dir.join("trajectories.csv"),
    ];

    let mut w = csv::Writer::from_writer(File::create(&paths[0])?);
    w.write_record(["g1", "g2", "y1", "y2", "trace", "determinant", "discriminant", "class"])?;
    for r in reports {
        for fp in &r.fixed_points {
            w.write_record([
                r.control[0].to_string(),
                r.control[1].to_string(),
                format!("{:.10}", fp.location[0]),
                format!("{:.10}", fp.location[1]),
                format!("{:.6e}", fp.trace),
                format!("{:.6e}", fp.determinant),
                format!("{:.6e}", fp.discriminant),
                fp.class.label().to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(&paths[1])?);
    w.write_record(["g1", "g2", "species", "branch", "y1", "y2"])?;
    for r in reports {
        for nc in &r.nullclines {
            for y in &nc.points {
                w.write_record([
                    r.control[0].to_string(),
                    r.control[1].to_string(),
                    nc.species.to_string(),
                    nc.branch.to_string(),
                    format!("{:.8}", y[0]),
                    format!("{:.8}", y[1]),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(&paths[2])?);
    w.write_record(["g1", "g2", "t", "y1", "y2"])?;
    for r in reports {
        for (t, y) in &r.trajectory {
            w.write_record([
                r.control[0].to_string(),
                r.control[1].to_string(),
                format!("{t:.6}"),
                format!("{:.10}", y[0]),
                format!("{:.10}", y[1]),
            ])?;
        }
    }
    w.flush()?;
    Ok(paths.to_vec())
}
