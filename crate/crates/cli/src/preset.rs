//! Experiment presets and the TOML configuration that overrides them.
//!
//! A configuration file has up to four sections, every key optional:
//!
//! ```toml
//! [experiment]
//! preset = "D"            # A, B, D, E1, E2 or custom
//! initial = "rough"       # smooth, rough or [y1, y2] constants
//! targets = "experiment"  # experiment, initial or [y1d, y2d] constants
//!
//! [model]
//! a = 0.47
//! control = "robin"       # distributed or robin
//! bounds = [0.0, 0.1]     # or "none"
//! forcing = true
//!
//! [discretization]
//! degree = 1
//! k = 0
//! meshes = [6, 10, 24, 48]
//! tau_divisor = 2.0       # τ ≤ h² / tau_divisor
//! control_mass = "consistent"
//!
//! [optimizer]
//! tol = 1e-5
//! eps0 = 100.0
//! line_search = "adaptive"
//! adjoint = "full"
//! ```

use std::path::Path;
use std::sync::Arc;

use lv_optctl::adjoint::AdjointMode;
use lv_optctl::discretization::{ControlMass, Discretization};
use lv_optctl::mesh::build_structured;
use lv_optctl::model::{constant_fn, ControlKind, InitialData, ModelParams, ProblemData, SpaceTimeFn};
use lv_optctl::optimizer::{LineSearchKind, NcgConfig};
use lv_optctl::time::TimeGrid;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
pub enum PresetName {
    #[serde(alias = "a")]
    #[value(name = "A", alias = "a")]
    A,
    #[serde(alias = "b")]
    #[value(name = "B", alias = "b")]
    B,
    #[serde(alias = "d")]
    #[value(name = "D", alias = "d")]
    D,
    #[serde(alias = "e1")]
    #[value(name = "E1", alias = "e1")]
    E1,
    #[serde(alias = "e2")]
    #[value(name = "E2", alias = "e2")]
    E2,
    #[serde(rename = "custom")]
    #[value(name = "custom")]
    Custom,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [PresetName::A, PresetName::B, PresetName::D, PresetName::E1, PresetName::E2];

    pub fn label(self) -> &'static str {
        match self {
            PresetName::A => "A",
            PresetName::B => "B",
            PresetName::D => "D",
            PresetName::E1 => "E1",
            PresetName::E2 => "E2",
            PresetName::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Family(InitialData),
    Constant([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Targets {
    /// `(0, 20)`.
    Experiment,
    /// The initial data.
    Initial,
    Constant([f64; 2]),
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub params: ModelParams,
    /// Spatial polynomial degree ℓ.
    pub degree: usize,
    /// Temporal polynomial degree.
    pub k: usize,
    pub meshes: Vec<usize>,
    /// Time steps satisfy `τ ≤ h² / tau_divisor`.
    pub tau_divisor: f64,
    pub initial: Initial,
    pub targets: Targets,
    pub forcing: bool,
    pub final_time: f64,
    pub control_mass: ControlMass,
    pub optimizer: NcgConfig,
}

/// Initial step `1 / min γ`, at which a gradient step is the
/// projection-formula update.
pub fn natural_step(p: &ModelParams) -> f64 {
    1.0 / p.gamma1.min(p.gamma2)
}

impl ExperimentPreset {
    pub fn new(name: PresetName) -> Self {
        let mut params = ModelParams::default();
        let (degree, k, tau_divisor, initial) = match name {
            PresetName::A => {
                params.bounds = Some((0.0, 0.1));
                (1, 0, 8.0, InitialData::Smooth)
            }
            PresetName::B => (2, 1, 8.0, InitialData::Smooth),
            PresetName::D => {
                params.control_kind = ControlKind::Robin;
                (1, 0, 2.0, InitialData::Rough)
            }
            PresetName::E1 => {
                params.control_kind = ControlKind::Robin;
                (1, 1, 2.0, InitialData::Smooth)
            }
            PresetName::E2 => {
                params.control_kind = ControlKind::Robin;
                (2, 1, 2.0, InitialData::Smooth)
            }
            PresetName::Custom => (1, 0, 8.0, InitialData::Smooth),
        };
        let control_mass = if name == PresetName::A {
            ControlMass::Lumped
        } else {
            ControlMass::Consistent
        };
        let optimizer = NcgConfig {
            eps0: natural_step(&params),
            ..NcgConfig::default()
        };
        Self {
            name,
            params,
            degree,
            k,
            meshes: vec![6, 10, 24, 48],
            tau_divisor,
            initial: Initial::Family(initial),
            targets: Targets::Experiment,
            forcing: true,
            final_time: 0.1,
            control_mass,
            optimizer,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        self.optimizer.validate()?;
        if !(1..=2).contains(&self.degree) || self.k > 1 {
            return Err(CliError::Config(format!(
                "unsupported degrees: spatial {}, temporal {}",
                self.degree, self.k
            )));
        }
        if self.meshes.is_empty() || self.meshes.contains(&0) {
            return Err(CliError::Config("meshes must be a nonempty list of positive sizes".into()));
        }
        if !(self.tau_divisor > 0.0 && self.tau_divisor.is_finite()) {
            return Err(CliError::Config("tau_divisor must be positive".into()));
        }
        if self.control_mass == ControlMass::Lumped && self.degree != 1 {
            return Err(CliError::Config("lumped control mass requires degree 1".into()));
        }
        Ok(())
    }

    pub fn problem_data(&self) -> ProblemData {
        let mut data = ProblemData::experiment(&self.params, InitialData::Smooth);
        data.final_time = self.final_time;
        match self.initial {
            Initial::Family(f) => (data.y10, data.y20) = f.functions(),
            Initial::Constant([v1, v2]) => {
                data.y10 = Arc::new(move |_| v1);
                data.y20 = Arc::new(move |_| v2);
            }
        }
        if !self.forcing {
            data.f1 = constant_fn(0.0);
            data.f2 = constant_fn(0.0);
        }
        match self.targets {
            Targets::Experiment => {}
            Targets::Initial => {
                let (y10, y20) = (data.y10.clone(), data.y20.clone());
                data.y1d = Arc::new(move |_, x| y10(x)) as SpaceTimeFn;
                data.y2d = Arc::new(move |_, x| y20(x)) as SpaceTimeFn;
            }
            Targets::Constant([v1, v2]) => {
                data.y1d = constant_fn(v1);
                data.y2d = constant_fn(v2);
            }
        }
        data
    }

    /// Discretization on the `n × n` mesh with the preset's time-step law.
    pub fn discretization(&self, n: usize) -> CliResult<Discretization> {
        self.validate()?;
        let mesh = Arc::new(build_structured(n)?);
        let tau = mesh.h * mesh.h / self.tau_divisor;
        let grid = TimeGrid::with_max_step(self.final_time, tau)?;
        Ok(Discretization::new(
            self.params.clone(),
            self.problem_data(),
            mesh,
            self.degree,
            self.k,
            grid,
            self.control_mass,
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NamedOrPair {
    Named(String),
    Pair([f64; 2]),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    preset: Option<PresetName>,
    initial: Option<NamedOrPair>,
    targets: Option<NamedOrPair>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    control: Option<String>,
    bounds: Option<NamedOrPair>,
    forcing: Option<bool>,
    final_time: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscretizationSection {
    degree: Option<usize>,
    k: Option<usize>,
    meshes: Option<Vec<usize>>,
    tau_divisor: Option<f64>,
    control_mass: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    sigma: Option<f64>,
    rho: Option<f64>,
    tol: Option<f64>,
    eps0: Option<f64>,
    step_shrink: Option<f64>,
    step_grow: Option<f64>,
    g0: Option<f64>,
    max_outer: Option<usize>,
    max_line: Option<usize>,
    restart_on_active_set: Option<bool>,
    line_search: Option<String>,
    adjoint: Option<String>,
}

/// Parsed configuration file; every value is an override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    discretization: DiscretizationSection,
    #[serde(default)]
    optimizer: OptimizerSection,
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn parse_adjoint_mode(s: &str) -> CliResult<AdjointMode> {
    match s {
        "full" => Ok(AdjointMode::Full),
        "diagonal" => Ok(AdjointMode::Diagonal),
        _ => Err(CliError::Config(format!("adjoint must be full or diagonal, got {s:?}"))),
    }
}

pub fn parse_control_kind(s: &str) -> CliResult<ControlKind> {
    match s {
        "distributed" => Ok(ControlKind::Distributed),
        "robin" => Ok(ControlKind::Robin),
        _ => Err(CliError::Config(format!("control must be distributed or robin, got {s:?}"))),
    }
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Preset named by `preset` (or by the file, or `custom`) with the file's
    /// overrides applied.
    pub fn resolve(&self, preset: Option<PresetName>) -> CliResult<ExperimentPreset> {
        let name = preset.or(self.experiment.preset).unwrap_or(PresetName::Custom);
        let mut e = ExperimentPreset::new(name);

        let m = &self.model;
        let p = &mut e.params;
        set(&mut p.a, m.a);
        set(&mut p.b, m.b);
        set(&mut p.c, m.c);
        set(&mut p.d, m.d);
        set(&mut p.eps1, m.eps1);
        set(&mut p.eps2, m.eps2);
        set(&mut p.lambda1, m.lambda1);
        set(&mut p.lambda2, m.lambda2);
        set(&mut p.gamma1, m.gamma1);
        set(&mut p.gamma2, m.gamma2);
        if let Some(c) = &m.control {
            p.control_kind = parse_control_kind(c)?;
        }
        match &m.bounds {
            None => {}
            Some(NamedOrPair::Named(s)) if s == "none" => p.bounds = None,
            Some(NamedOrPair::Pair([lo, hi])) => p.bounds = Some((*lo, *hi)),
            Some(NamedOrPair::Named(s)) => {
                return Err(CliError::Config(format!("bounds must be \"none\" or [lo, hi], got {s:?}")));
            }
        }
        set(&mut e.forcing, m.forcing);
        set(&mut e.final_time, m.final_time);

        match &self.experiment.initial {
            None => {}
            Some(NamedOrPair::Named(s)) => {
                e.initial = Initial::Family(match s.as_str() {
                    "smooth" => InitialData::Smooth,
                    "rough" => InitialData::Rough,
                    _ => return Err(CliError::Config(format!("initial must be smooth, rough or [y1, y2], got {s:?}"))),
                })
            }
            Some(NamedOrPair::Pair(v)) => e.initial = Initial::Constant(*v),
        }
        match &self.experiment.targets {
            None => {}
            Some(NamedOrPair::Named(s)) => {
                e.targets = match s.as_str() {
                    "experiment" => Targets::Experiment,
                    "initial" => Targets::Initial,
                    _ => {
                        return Err(CliError::Config(format!(
                            "targets must be experiment, initial or [y1d, y2d], got {s:?}"
                        )))
                    }
                }
            }
            Some(NamedOrPair::Pair(v)) => e.targets = Targets::Constant(*v),
        }

        let d = &self.discretization;
        set(&mut e.degree, d.degree);
        set(&mut e.k, d.k);
        if let Some(meshes) = &d.meshes {
            e.meshes = meshes.clone();
        }
        set(&mut e.tau_divisor, d.tau_divisor);
        if let Some(s) = &d.control_mass {
            e.control_mass = match s.as_str() {
                "consistent" => ControlMass::Consistent,
                "lumped" => ControlMass::Lumped,
                _ => return Err(CliError::Config(format!("control_mass must be consistent or lumped, got {s:?}"))),
            };
        }

        let o = &self.optimizer;
        let cfg = &mut e.optimizer;
        cfg.eps0 = o.eps0.unwrap_or_else(|| natural_step(&e.params));
        set(&mut cfg.sigma, o.sigma);
        set(&mut cfg.rho, o.rho);
        set(&mut cfg.tol, o.tol);
        set(&mut cfg.step_shrink, o.step_shrink);
        set(&mut cfg.step_grow, o.step_grow);
        set(&mut cfg.g0, o.g0);
        set(&mut cfg.max_outer, o.max_outer);
        set(&mut cfg.max_line, o.max_line);
        set(&mut cfg.restart_on_active_set, o.restart_on_active_set);
        if let Some(s) = &o.line_search {
            cfg.line_search = match s.as_str() {
                "adaptive" => LineSearchKind::Adaptive,
                "bracketing" => LineSearchKind::Bracketing,
                _ => return Err(CliError::Config(format!("line_search must be adaptive or bracketing, got {s:?}"))),
            };
        }
        if let Some(s) = &o.adjoint {
            cfg.adjoint_mode = parse_adjoint_mode(s)?;
        }
        e.validate()?;
        Ok(e)
    }
}
