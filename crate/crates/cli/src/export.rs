//! Snapshot export: node tables and legacy ASCII VTK files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lv_optctl::adjoint::AdjointPair;
use lv_optctl::discretization::Discretization;
use lv_optctl::model::ControlKind;
use lv_optctl::objective::ControlPair;
use lv_optctl::state::StatePair;
use lv_optctl::time::SpaceTimeField;

use crate::error::{CliError, CliResult};

/// Nodal values of one field at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: &'static str,
    pub coords: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

/// Right limit at `t = 0`, left-continuous value otherwise.
fn field_at(disc: &Discretization, f: &SpaceTimeField, t: f64) -> CliResult<Vec<f64>> {
    if t == 0.0 {
        Ok(f.start_value(0).to_vec())
    } else {
        Ok(f.eval(&disc.grid, t)?)
    }
}

/// All fields at time `t`. States at `t = 0` are the interpolated initial data.
pub fn snapshots(
    disc: &Discretization,
    state: &StatePair,
    adjoint: &AdjointPair,
    controls: &ControlPair,
    t: f64,
) -> CliResult<Vec<Snapshot>> {
    if !(0.0..=disc.grid.final_time()).contains(&t) {
        return Err(CliError::Config(format!(
            "snapshot time {t} outside [0, {}]",
            disc.grid.final_time()
        )));
    }
    let coords = disc.space.dof_coords().to_vec();
    let control_coords: Vec<[f64; 2]> = match disc.control.kind {
        ControlKind::Distributed => coords.clone(),
        ControlKind::Robin => disc.space.trace_map().iter().map(|&d| coords[d]).collect(),
    };
    let mut out = Vec::with_capacity(6);
    for (s, name) in [(0, "y1"), (1, "y2")] {
        let values = if t == 0.0 {
            disc.y0[s].clone()
        } else {
            field_at(disc, state.species(s), t)?
        };
        out.push(Snapshot {
            name,
            coords: coords.clone(),
            values,
        });
    }
    for (s, name) in [(0, "mu1"), (1, "mu2")] {
        out.push(Snapshot {
            name,
            coords: coords.clone(),
            values: field_at(disc, adjoint.species(s), t)?,
        });
    }
    for (s, name) in [(0, "g1"), (1, "g2")] {
        out.push(Snapshot {
            name,
            coords: control_coords.clone(),
            values: field_at(disc, controls.species(s), t)?,
        });
    }
    Ok(out)
}

fn write_table(path: &Path, s: &Snapshot) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["x1", "x2", "value"])?;
    for (x, v) in s.coords.iter().zip(&s.values) {
        w.write_record([format!("{:.8}", x[0]), format!("{:.8}", x[1]), format!("{v:.12e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Legacy VTK unstructured grid on the mesh vertices with one triangle per
/// cell. Fields living on every vertex are written as point data.
pub fn write_vtk<W: Write>(disc: &Discretization, fields: &[Snapshot], t: f64, out: W) -> CliResult<()> {
    let mesh = disc.space.mesh();
    let nv = mesh.n_vertices();
    let mut w = BufWriter::new(out);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "lv-optctl fields at t = {t}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for tri in &mesh.triangles {
        writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    // vertex DOFs come first in both P1 and P2 numbering
    for f in fields.iter().filter(|f| f.values.len() >= nv && f.coords.len() == disc.n_dofs()) {
        writeln!(w, "SCALARS {} double 1", f.name)?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &f.values[..nv] {
            writeln!(w, "{v:e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `snapshots.csv` (index and time), one node table per field and
/// snapshot (`<field>_<index>.csv`) and, if requested, `fields_<index>.vtk`.
pub fn export_fields(
    disc: &Discretization,
    state: &StatePair,
    adjoint: &AdjointPair,
    controls: &ControlPair,
    times: &[f64],
    dir: &Path,
    vtk: bool,
) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let index_path = dir.join("snapshots.csv");
    let mut index = csv::Writer::from_writer(File::create(&index_path)?);
    index.write_record(["index", "t"])?;
    for (i, &t) in times.iter().enumerate() {
        let fields = snapshots(disc, state, adjoint, controls, t)?;
        index.write_record([i.to_string(), t.to_string()])?;
        for f in &fields {
            let path = dir.join(format!("{}_{i:04}.csv", f.name));
            write_table(&path, f)?;
            written.push(path);
        }
        if vtk {
            let path = dir.join(format!("fields_{i:04}.vtk"));
            write_vtk(disc, &fields, t, File::create(&path)?)?;
            written.push(path);
        }
    }
    index.flush()?;
    written.push(index_path);
    Ok(written)
}
