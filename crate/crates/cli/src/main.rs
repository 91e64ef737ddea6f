use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lv_optctl::adjoint::AdjointMode;
use lv_optctl::dynamics::KineticsParams;
use lv_optctl::model::ControlKind;
use lv_optctl::objective::SecondOrderMode;
use lv_optctl::optimizer::Termination;
use lv_optctl_cli::checks::{gradient_check, second_order_check, CheckSetup, GRADIENT_TOL, SECOND_ORDER_TOL};
use lv_optctl_cli::export::export_fields;
use lv_optctl_cli::preset::{Config, ExperimentPreset, PresetName};
use lv_optctl_cli::report::{run_dynamics_report, write_dynamics_report, DynamicsOptions};
use lv_optctl_cli::study::{run_convergence_study, solve_row, termination_label, write_csv, write_history};
use lv_optctl_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "lv-optctl", version, about = "Optimal control of a Lotka-Volterra reaction-diffusion system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one preset on one mesh.
    Run(RunArgs),
    /// Optimize on every mesh of a preset and write a CSV table.
    Study(StudyArgs),
    /// Fixed points, nullclines and orbits of the kinetics under constant controls.
    Dynamics(DynamicsArgs),
    /// Optimize (or just solve) and write field snapshots.
    Export(ExportArgs),
    /// Compare the adjoint gradient with central differences.
    GradientCheck(CheckArgs),
    /// Compare the second directional derivative with second differences.
    SecondOrderCheck(CheckArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment preset; overrides the preset named in the config file.
    #[arg(long, value_enum)]
    preset: Option<PresetName>,
    /// TOML file with [experiment], [model], [discretization] and [optimizer] overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Adjoint used for the optimizer gradient.
    #[arg(long, value_enum)]
    adjoint: Option<AdjointArg>,
    /// Seed for the sampled variational-inequality probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ExperimentArgs {
    fn resolve(&self) -> CliResult<ExperimentPreset> {
        let cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let mut p = cfg.resolve(self.preset)?;
        if let Some(a) = self.adjoint {
            p.optimizer.adjoint_mode = a.into();
        }
        Ok(p)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Mesh size (cells per side); defaults to the first mesh of the preset.
    #[arg(long)]
    n: Option<usize>,
    /// Write the iteration history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Mesh sizes, overriding the preset list.
    #[arg(long, value_delimiter = ',')]
    meshes: Vec<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Add a wall-time column (makes the file run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Kinetic constants are read from the [model] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constant control pair `g1,g2`; repeat for several.
    #[arg(long = "control", value_parser = parse_pair)]
    controls: Vec<[f64; 2]>,
    /// Initial point of the phase-plane orbit.
    #[arg(long, value_parser = parse_pair, default_value = "16.125,24")]
    start: [f64; 2],
    /// Final time of the orbit.
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Output spacing of the orbit.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Directory for the CSV files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Mesh size (cells per side); defaults to the first mesh of the preset.
    #[arg(long)]
    n: Option<usize>,
    /// Snapshot times in [0, T].
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1")]
    times: Vec<f64>,
    /// Directory for the snapshot files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write legacy VTK files.
    #[arg(long)]
    vtk: bool,
    /// Export the state at the initial control instead of the optimum.
    #[arg(long)]
    no_optimize: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Control kind(s) to check.
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    /// Mesh size (cells per side).
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Spatial polynomial degree (1 or 2).
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// dG degree in time (0 or 1).
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Number of random directions.
    #[arg(long, default_value_t = 10)]
    directions: usize,
    /// Seed for the random directions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient check: adjoint that decides pass/fail.
    #[arg(long, value_enum, default_value = "full")]
    adjoint: AdjointArg,
    /// Second-order check: value that decides pass/fail.
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjointArg {
    Full,
    Diagonal,
}

impl From<AdjointArg> for AdjointMode {
    fn from(a: AdjointArg) -> Self {
        match a {
            AdjointArg::Full => AdjointMode::Full,
            AdjointArg::Diagonal => AdjointMode::Diagonal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Distributed,
    Robin,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<ControlKind> {
        match self {
            KindArg::Distributed => vec![ControlKind::Distributed],
            KindArg::Robin => vec![ControlKind::Robin],
            KindArg::Both => vec![ControlKind::Distributed, ControlKind::Robin],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Formula,
    Exact,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|e| format!("{a:?}: {e}"))?,
            b.parse().map_err(|e| format!("{b:?}: {e}"))?,
        ]),
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

fn require_converged(t: Termination) -> CliResult<()> {
    if t == Termination::Converged {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("optimizer stopped without converging ({})", termination_label(Some(t)))))
    }
}

fn run(args: RunArgs) -> CliResult<()> {
    let p = args.experiment.resolve()?;
    let n = args.n.unwrap_or(p.meshes[0]);
    let r = solve_row(&p, n, |_| {})?;
    let row = r.row();
    println!("preset {} n = {n} h = {:.6} intervals = {}", p.name.label(), row.h, row.n_intervals);
    for rec in &r.run.records {
        println!(
            "  it {:3}  J = {:.10e}  |Pg| = {:.3e}  step = {:.3e}  beta = {:.3e}  trials = {}",
            rec.iteration, rec.j, rec.grad_norm, rec.step, rec.beta, rec.trials
        );
    }
    println!("|y1 - y1d| = {:.10e}", row.dist_y1);
    println!("|y2 - y2d| = {:.10e}", row.dist_y2);
    println!("J          = {:.10e}", row.j);
    println!("iterations = {} ({})", row.iterations, termination_label(row.termination));
    if let Some((gap, vi)) = r.optimality(args.experiment.seed)? {
        println!("max |g - clamp(-mu/gamma)| = {gap:.3e}, VI residual = {:.3e}", vi + 0.0);
    }
    println!("wall time  = {:.2} s", row.wall_time);
    if let Some(path) = &args.history {
        write_history(&r.run, File::create(path)?)?;
    }
    require_converged(r.run.termination)
}

fn study(args: StudyArgs) -> CliResult<()> {
    let mut p = args.experiment.resolve()?;
    if !args.meshes.is_empty() {
        p.meshes = args.meshes.clone();
    }
    let rows = run_convergence_study(&p, |r| {
        eprintln!("n = {:3}: J = {:.6e} after {} iterations ({:.1} s)", r.n, r.run.cost.total(), r.run.iterations, r.wall_time);
    });
    write_csv(&rows, File::create(&args.out)?, args.timing)?;
    println!("{:>4} {:>10} {:>16} {:>16} {:>16} {:>5}  status", "n", "h", "|y1-y1d|", "|y2-y2d|", "J", "its");
    for r in &rows {
        println!(
            "{:>4} {:>10.6} {:>16.8e} {:>16.8e} {:>16.8e} {:>5}  {}",
            r.n,
            r.h,
            r.dist_y1,
            r.dist_y2,
            r.j,
            r.iterations,
            r.error.as_deref().unwrap_or(termination_label(r.termination))
        );
    }
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} rows failed", rows.len())));
    }
    Ok(())
}

fn dynamics(args: DynamicsArgs) -> CliResult<()> {
    let cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let params = KineticsParams::from_model(&cfg.resolve(Some(PresetName::Custom))?.params);
    let opts = DynamicsOptions {
        controls: args.controls,
        start: args.start,
        t_end: args.t_end,
        dt_out: args.dt,
        ..DynamicsOptions::default()
    };
    let reports = run_dynamics_report(&params, &opts)?;
    for r in &reports {
        println!("g = ({}, {})", r.control[0], r.control[1]);
        for fp in &r.fixed_points {
            println!(
                "  ({:.4}, {:.4})  T = {:.4e}  det = {:.4e}  D = {:.4e}  {}",
                fp.location[0],
                fp.location[1],
                fp.trace,
                fp.determinant,
                fp.discriminant,
                fp.class.label()
            );
        }
    }
    write_dynamics_report(&reports, &args.out_dir)?;
    Ok(())
}

fn export(args: ExportArgs) -> CliResult<()> {
    let p = args.experiment.resolve()?;
    let n = args.n.unwrap_or(p.meshes[0]);
    let (disc, state, adjoint, controls) = if args.no_optimize {
        let disc = p.discretization(n)?;
        let g = lv_optctl::objective::project(&lv_optctl::objective::ControlPair::constant(&disc, p.optimizer.g0));
        let state = lv_optctl::state::solve_state(&disc, &g)?;
        let adjoint = lv_optctl::adjoint::solve_adjoint(&disc, &state, p.optimizer.adjoint_mode)?;
        (disc, state, adjoint, g)
    } else {
        let r = solve_row(&p, n, |_| {})?;
        (r.disc, r.run.state, r.run.adjoint, r.run.controls)
    };
    let files = export_fields(&disc, &state, &adjoint, &controls, &args.times, &args.out_dir, args.vtk)?;
    println!("wrote {} files to {}", files.len(), args.out_dir.display());
    Ok(())
}

fn setups(args: &CheckArgs) -> Vec<CheckSetup> {
    args.kind
        .kinds()
        .into_iter()
        .map(|kind| CheckSetup {
            n: args.n,
            degree: args.degree,
            k: args.k,
            directions: args.directions,
            ..CheckSetup::coarse(kind, args.seed)
        })
        .collect()
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check_gradient(args: CheckArgs) -> CliResult<()> {
    let mode: AdjointMode = args.adjoint.into();
    let mut all = true;
    for setup in setups(&args) {
        let c = gradient_check(&setup)?;
        println!("{:?} control, n = {}, P{}, dG({})", setup.kind, setup.n, setup.degree, setup.k);
        println!("  {:>3} {:>18} {:>18} {:>18}", "dir", "central diff", "full adjoint", "diagonal adjoint");
        for (i, s) in c.samples.iter().enumerate() {
            println!("  {:>3} {:>18.10e} {:>18.10e} {:>18.10e}", i, s.finite_difference, s.full, s.diagonal);
        }
        let (full, diag) = (c.max_rel(AdjointMode::Full), c.max_rel(AdjointMode::Diagonal));
        println!("  max relative error: full {full:.3e}, diagonal {diag:.3e}");
        let ok = c.passed(mode);
        all &= ok;
        println!("  {} ({:?} adjoint, tolerance {GRADIENT_TOL:e})", verdict(ok), mode);
    }
    if all {
        Ok(())
    } else {
        Err(CliError::CheckFailed("gradient check failed".into()))
    }
}

fn check_second_order(args: CheckArgs) -> CliResult<()> {
    let mode = match args.mode {
        ModeArg::Formula => SecondOrderMode::Formula,
        ModeArg::Exact => SecondOrderMode::Exact,
    };
    let mut all = true;
    for setup in setups(&args) {
        let c = second_order_check(&setup)?;
        println!("{:?} control, n = {}, P{}, dG({})", setup.kind, setup.n, setup.degree, setup.k);
        println!("  {:>3} {:>18} {:>18} {:>18}", "dir", "second diff", "formula", "exact");
        for (i, s) in c.samples.iter().enumerate() {
            println!("  {:>3} {:>18.10e} {:>18.10e} {:>18.10e}", i, s.second_difference, s.formula, s.exact);
        }
        println!(
            "  max relative error: formula {:.3e}, exact {:.3e}",
            c.max_rel(SecondOrderMode::Formula),
            c.max_rel(SecondOrderMode::Exact)
        );
        let ok = c.passed(mode);
        all &= ok;
        println!("  {} ({:?}, tolerance {SECOND_ORDER_TOL:e})", verdict(ok), mode);
    }
    if all {
        Ok(())
    } else {
        Err(CliError::CheckFailed("second-order check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Study(a) => study(a),
        Command::Dynamics(a) => dynamics(a),
        Command::Export(a) => export(a),
        Command::GradientCheck(a) => check_gradient(a),
        Command::SecondOrderCheck(a) => check_second_order(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
