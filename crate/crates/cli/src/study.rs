//! Single optimization runs and mesh-convergence studies.

use std::io::Write;
use std::time::Instant;

use lv_optctl::discretization::Discretization;
use lv_optctl::objective::{project, projected_adjoint, vi_residual, ControlPair};
use lv_optctl::optimizer::{optimize_observed, OptRun, Termination};

use crate::error::CliResult;
use crate::preset::ExperimentPreset;

/// One optimization on one mesh.
pub struct RowRun {
    pub n: usize,
    pub disc: Discretization,
    pub run: OptRun,
    pub wall_time: f64,
}

impl RowRun {
    pub fn row(&self) -> ResultRow {
        let [d1, d2] = self.run.cost.distances();
        ResultRow {
            n: self.n,
            h: self.disc.h(),
            n_intervals: self.disc.n_intervals(),
            dist_y1: d1,
            dist_y2: d2,
            j: self.run.cost.total(),
            iterations: self.run.iterations,
            termination: Some(self.run.termination),
            wall_time: self.wall_time,
            error: None,
        }
    }

    /// `max |g − clamp(−μ/γ)|` and the sampled VI residual, for bounded runs.
    pub fn optimality(&self, seed: u64) -> CliResult<Option<(f64, f64)>> {
        if self.run.controls.bounds.is_none() {
            return Ok(None);
        }
        let mut gap = projected_adjoint(&self.disc, &self.run.adjoint);
        gap.axpy(-1.0, &self.run.controls);
        let vi = vi_residual(&self.disc, &self.run.controls, &self.run.gradient, seed)?;
        Ok(Some((gap.max_abs(), vi)))
    }
}

/// Builds the discretization for mesh `n` and optimizes from the preset's
/// initial control, calling `observe` on every iterate.
pub fn solve_row(preset: &ExperimentPreset, n: usize, observe: impl FnMut(&ControlPair)) -> CliResult<RowRun> {
    let start = Instant::now();
    let disc = preset.discretization(n)?;
    let g0 = project(&ControlPair::constant(&disc, preset.optimizer.g0));
    let run = optimize_observed(&disc, g0, &preset.optimizer, observe)?;
    Ok(RowRun {
        n,
        disc,
        run,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub h: f64,
    pub n_intervals: usize,
    /// `‖y₁ − y₁d‖` in L²(0,T; L²(Ω)).
    pub dist_y1: f64,
    pub dist_y2: f64,
    pub j: f64,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(n: usize, error: String) -> Self {
        Self {
            n,
            h: std::f64::consts::SQRT_2 / n as f64,
            n_intervals: 0,
            dist_y1: f64::NAN,
            dist_y2: f64::NAN,
            j: f64::NAN,
            iterations: 0,
            termination: None,
            wall_time: 0.0,
            error: Some(error),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none() && self.termination == Some(Termination::Converged)
    }
}

pub fn termination_label(t: Option<Termination>) -> &'static str {
    match t {
        Some(Termination::Converged) => "converged",
        Some(Termination::MaxIterations) => "max-iterations",
        Some(Termination::LineSearchFailure) => "line-search-failure",
        None => "error",
    }
}

/// Runs every mesh of the preset, coarsest first. A failing row is recorded
/// and the study continues. `inspect` sees each successful run.
pub fn run_convergence_study(preset: &ExperimentPreset, mut inspect: impl FnMut(&RowRun)) -> Vec<ResultRow> {
    let mut meshes = preset.meshes.clone();
    meshes.sort_unstable();
    meshes.dedup();
    meshes
        .into_iter()
        .map(|n| match solve_row(preset, n, |_| {}) {
            Ok(r) => {
                inspect(&r);
                r.row()
            }
            Err(e) => ResultRow::failed(n, e.to_string()),
        })
        .collect()
}

/// CSV with a fixed header. Wall times are only written when `timing` is set
/// so that repeated runs produce identical files.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W, timing: bool) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "n",
        "h",
        "intervals",
        "dist_y1",
        "dist_y2",
        "J",
        "iterations",
        "termination",
        "error",
    ];
    if timing {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            format!("{:.6}", r.h),
            r.n_intervals.to_string(),
            format!("{:.10e}", r.dist_y1),
            format!("{:.10e}", r.dist_y2),
            format!("{:.10e}", r.j),
            r.iterations.to_string(),
            termination_label(r.termination).to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        if timing {
            rec.push(format!("{:.3}", r.wall_time));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration optimizer history as CSV.
pub fn write_history<W: Write>(run: &OptRun, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "J", "projected_gradient_norm", "step", "beta", "trials", "restarted"])?;
    for r in &run.records {
        w.write_record([
            r.iteration.to_string(),
            format!("{:.12e}", r.j),
            format!("{:.6e}", r.grad_norm),
            format!("{:.6e}", r.step),
            format!("{:.6e}", r.beta),
            r.trials.to_string(),
            r.restarted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::{Config, PresetName};

    #[test]
    fn failing_rows_are_recorded() {
        let mut p = crate::preset::ExperimentPreset::new(PresetName::D);
        p.meshes = vec![3, 2];
        p.params.eps1 = -1.0;
        let rows = run_convergence_study(&p, |_| {});
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
        assert!(rows.iter().all(|r| r.error.is_some() && !r.ok()));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,h,intervals,dist_y1,dist_y2,J,iterations,termination,error\n"));
        assert!(text.contains("invalid argument"));
    }

    #[test]
    fn stationary_custom_problem() {
        let cfg = Config::parse(
            r#"
            [experiment]
            initial = [16.0, 25.0]
            targets = "initial"
            [model]
            control = "robin"
            a = 0.0
            b = 0.0
            c = 0.0
            d = 0.0
            lambda1 = 0.0
            lambda2 = 0.0
            forcing = false
            [discretization]
            meshes = [4]
            "#,
        )
        .unwrap();
        let p = cfg.resolve(None).unwrap();
        let r = solve_row(&p, 4, |_| {}).unwrap();
        let [d1, d2] = r.run.cost.distances();
        assert!(d1 < 1e-12 && d2 < 1e-12);
        // only the control penalty at g⁰ = 1: γ/2 · T · |Γ| per species
        let j0 = r.run.j_history[0];
        assert!((j0 - 2.0 * 0.5 * 0.01 * 0.1 * 4.0).abs() < 1e-12, "{j0}");
        assert!(r.run.cost.total() < 1e-10 * j0);
    }
}
