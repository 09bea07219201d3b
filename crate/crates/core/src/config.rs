//! Scenario configuration read from TOML documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::doubling::{double_metric, doubled_grid};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, GridSpec};
use crate::io::FieldDocument;
use crate::norms::dyadic_scales;
use crate::parabolic::TimeMesh;
use crate::presets;
use crate::rotsym::{self, RotDomain, WarpedMetric};
use crate::tensor::{mollify, BackgroundMetric, MetricField};

/// Fewest nodes per periodic axis.
pub const MIN_PERIODIC_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Closed flat torus `T^n`.
    Torus,
    /// Half torus `[0, L] x T^(n-1)` doubled across both mirror slices.
    TorusDoubled,
    /// Rotationally symmetric metric on `S^n`.
    RotsymSphere,
    /// Rotationally symmetric hemisphere, doubled across the equator.
    RotsymHemisphereDoubled,
}

impl Domain {
    pub fn is_rotsym(self) -> bool {
        matches!(self, Domain::RotsymSphere | Domain::RotsymHemisphereDoubled)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    /// Flat for torus domains, round for rotsym domains.
    #[default]
    Auto,
    Flat,
    Round,
}

/// Named initial metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMetric {
    // braces so unknown keys are still rejected
    Flat {},
    KinkedWarp { a: f64 },
    ConformalBump { eps: f64, mode: usize },
    RandomSmooth { amplitude: f64, max_mode: usize },
    HolderCusp { a: f64, beta: f64 },
    Round {
        #[serde(default = "one")]
        r0: f64,
        /// Coordinate perturbation `chi = x + regauge sin 2x`.
        #[serde(default)]
        regauge: f64,
    },
    CapCorner { slope: f64 },
    DentedCap {
        #[serde(default = "dent_eps")]
        eps: f64,
        #[serde(default = "dent_delta")]
        delta: f64,
        #[serde(default = "dent_sb")]
        s_b: f64,
    },
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}
fn dent_eps() -> f64 {
    0.8
}
fn dent_delta() -> f64 {
    0.6
}
fn dent_sb() -> f64 {
    1.3
}
fn yes() -> bool {
    true
}
fn every_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Curvature and cone margins every this many steps (0 disables; rotsym
    /// always evaluates them).
    #[serde(default)]
    pub curvature_every: usize,
    /// PIC-family margins (`n >= 4`).
    #[serde(default)]
    pub pic: bool,
    /// Pull the trajectory back to Ricci flow and report its residual.
    #[serde(default)]
    pub gauge: bool,
    #[serde(default = "every_one")]
    pub store_every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { curvature_every: 0, pic: false, gauge: false, store_every: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Metric files at the dyadic times `T 2^-j`.
    #[serde(default = "yes")]
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, checkpoints: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Smoothing,
    Contraction,
    Preservation,
    SphereBench,
    Uniqueness,
    Convergence,
}

/// Sign-monitored quantity of a preservation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    CurvatureOperator,
    Scalar,
    Pic,
    Pic1,
    Pic2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    /// Resolution sweep; defaults to `[r, 2r, 4r]` from the scenario.
    #[serde(default)]
    pub resolutions: Vec<usize>,
    /// Final-time sweep (contraction).
    #[serde(default)]
    pub t_values: Vec<f64>,
    /// Mollification widths in cells (preservation).
    #[serde(default = "mollify_levels")]
    pub mollify_cells: Vec<f64>,
    #[serde(default = "monitor")]
    pub monitor: Monitor,
    /// Hölder exponent and inner weight of the contraction norm.
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "gamma")]
    pub gamma: f64,
    /// Perturbation size of the contraction pair.
    #[serde(default = "perturbation")]
    pub perturbation: f64,
    /// Fit window of the smoothing study.
    #[serde(default = "fit_window")]
    pub fit_window: [f64; 2],
}

fn mollify_levels() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}
fn monitor() -> Monitor {
    Monitor::CurvatureOperator
}
fn alpha() -> f64 {
    0.75
}
fn gamma() -> f64 {
    0.5
}
fn perturbation() -> f64 {
    0.01
}
fn fit_window() -> [f64; 2] {
    [1e-4, 1e-1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: Domain,
    /// Manifold dimension.
    pub n: usize,
    /// Nodes per periodic axis, nodes-minus-one across a half torus, or cells
    /// on a rotsym axis.
    pub resolution: usize,
    /// Nodes per transverse axis of a doubled torus (default `resolution`).
    #[serde(default)]
    pub transverse_resolution: Option<usize>,
    /// Torus side length (torus domains only).
    #[serde(default = "one")]
    pub extent: f64,
    pub t_end: f64,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Grading exponent `rho` of `t_k = T (k/N)^rho`.
    #[serde(default = "one")]
    pub grading: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub background: Background,
    pub initial: InitialMetric,
    /// Heat mollification width in cells.
    #[serde(default)]
    pub mollify_cells: Option<f64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
}

/// Initial state of a scenario.
#[derive(Clone, Debug)]
pub enum InitialState {
    Metric { g: MetricField, bg: BackgroundMetric, doubled: bool },
    Warped(WarpedMetric),
}

fn cfg<T>(msg: String) -> Result<T> {
    Err(Error::Config(msg))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<ScenarioConfig> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = ScenarioConfig::from_toml(&text)?;
        // relative file presets resolve against the config location
        if let InitialMetric::File { path: p } = &mut c.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn background(&self) -> Background {
        match self.background {
            Background::Auto if self.domain.is_rotsym() => Background::Round,
            Background::Auto => Background::Flat,
            b => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain;
        if d.is_rotsym() && self.n < 2 {
            return cfg(format!("rotsym domains need n >= 2, got {}", self.n));
        }
        if !d.is_rotsym() && !(1..=4).contains(&self.n) {
            return cfg(format!("torus domains support n in 1..=4, got {}", self.n));
        }
        if d == Domain::TorusDoubled && self.n < 2 {
            return cfg("a doubled torus needs n >= 2".into());
        }
        if self.diagnostics.pic && self.n < 4 {
            return cfg(format!("PIC margins need n >= 4, got {}", self.n));
        }
        if let Some(s) = &self.study {
            if matches!(s.monitor, Monitor::Pic | Monitor::Pic1 | Monitor::Pic2) && s.kind == StudyKind::Preservation && self.n < 4 {
                return cfg(format!("PIC monitoring needs n >= 4, got {}", self.n));
            }
        }
        match (d.is_rotsym(), self.background()) {
            (true, Background::Flat) => return cfg("rotsym domains use the round background".into()),
            (false, Background::Round) => return cfg("torus domains use the flat background".into()),
            _ => {}
        }
        if self.diagnostics.gauge && d != Domain::Torus {
            return cfg("the gauge stage runs on closed torus domains only".into());
        }
        if !(self.extent > 0.0) || !(self.t_end > 0.0) {
            return cfg(format!("extent {} and t_end {} must be positive", self.extent, self.t_end));
        }
        if self.steps.is_some() == self.dt.is_some() {
            return cfg("give exactly one of steps and dt".into());
        }
        let rotsym_only = matches!(
            self.initial,
            InitialMetric::Round { .. } | InitialMetric::CapCorner { .. } | InitialMetric::DentedCap { .. }
        );
        let torus_only = matches!(
            self.initial,
            InitialMetric::Flat {}
                | InitialMetric::KinkedWarp { .. }
                | InitialMetric::ConformalBump { .. }
                | InitialMetric::RandomSmooth { .. }
                | InitialMetric::HolderCusp { .. }
        );
        if (d.is_rotsym() && torus_only) || (!d.is_rotsym() && rotsym_only) {
            return cfg(format!("initial preset {:?} does not apply to domain {d:?}", self.initial));
        }
        if matches!(self.initial, InitialMetric::KinkedWarp { .. }) && d != Domain::TorusDoubled {
            return cfg("kinked_warp is defined on the half torus of a doubled domain".into());
        }
        if matches!(self.initial, InitialMetric::CapCorner { .. } | InitialMetric::DentedCap { .. })
            && d != Domain::RotsymHemisphereDoubled
        {
            return cfg("cap presets live on the hemisphere".into());
        }
        if let Some(e) = self.mollify_cells {
            if !(e >= 1.0) {
                return cfg(format!("mollification width {e} cells below one cell"));
            }
        }
        let mesh = self.mesh()?;
        dyadic_scales(&mesh.times).map_err(|e| Error::Config(e.to_string()))?;
        self.grid_check()
    }

    fn grid_check(&self) -> Result<()> {
        if self.domain.is_rotsym() {
            if self.resolution < 8 {
                return cfg(format!("rotsym resolution {} below 8 cells", self.resolution));
            }
            return Ok(());
        }
        let t = self.transverse_resolution.unwrap_or(self.resolution);
        if self.resolution < MIN_PERIODIC_NODES || t < MIN_PERIODIC_NODES {
            return cfg(format!("torus resolution below {MIN_PERIODIC_NODES} nodes"));
        }
        Ok(())
    }

    /// Same scenario at another resolution; a fixed `dt` is kept, a step
    /// count is scaled with `h^2`.
    pub fn with_resolution(&self, resolution: usize) -> ScenarioConfig {
        let mut c = self.clone();
        if let Some(s) = self.steps {
            let r = resolution as f64 / self.resolution as f64;
            c.steps = Some(((s as f64) * r * r).round().max(1.0) as usize);
        }
        c.resolution = resolution;
        c
    }

    pub fn mesh(&self) -> Result<TimeMesh> {
        let steps = match (self.steps, self.dt) {
            (Some(s), _) => s,
            (None, Some(dt)) if dt > 0.0 => (self.t_end / dt).round().max(1.0) as usize,
            _ => return cfg("time step must be positive".into()),
        };
        if self.grading == 1.0 {
            TimeMesh::uniform(self.t_end, steps)
        } else {
            TimeMesh::graded(self.t_end, steps, self.grading)
        }
    }

    /// Grid of the evolved metric (the doubled grid for a doubled torus).
    pub fn grid(&self) -> Result<Grid> {
        match self.domain {
            Domain::Torus => GridSpec::torus(self.n, self.extent, self.resolution),
            Domain::TorusDoubled => doubled_grid(&*self.half_grid()?),
            Domain::RotsymSphere => GridSpec::new(vec![RotDomain::Sphere.axis(self.resolution)]),
            Domain::RotsymHemisphereDoubled => GridSpec::new(vec![RotDomain::Hemisphere.axis(self.resolution)]),
        }
    }

    pub fn half_grid(&self) -> Result<Grid> {
        let t = self.transverse_resolution.unwrap_or(self.resolution);
        let mut axes = vec![Axis::reflect(self.extent, self.resolution + 1)];
        axes.extend((1..self.n).map(|_| Axis::periodic(self.extent, t)));
        GridSpec::new(axes)
    }

    /// Cell or node width along axis 0.
    pub fn h(&self) -> Result<f64> {
        Ok(self.grid()?.h(0))
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        if self.domain.is_rotsym() {
            return self.initial_warp().map(InitialState::Warped);
        }
        let doubled = self.domain == Domain::TorusDoubled;
        let base = if doubled { self.half_grid()? } else { self.grid()? };
        let g = match &self.initial {
            InitialMetric::Flat {} => presets::flat(&base),
            InitialMetric::KinkedWarp { a } => presets::kinked_warp(&base, *a)?,
            InitialMetric::ConformalBump { eps, mode } => presets::conformal_bump(&base, *eps, *mode)?,
            InitialMetric::RandomSmooth { amplitude, max_mode } => presets::random_smooth(&base, *amplitude, *max_mode, self.seed)?,
            InitialMetric::HolderCusp { a, beta } => presets::holder_cusp(&base, *a, *beta)?,
            InitialMetric::File { path } => {
                let g = FieldDocument::read(path)?.to_metric()?;
                if g.grid().as_ref() != base.as_ref() && g.grid().as_ref() != self.grid()?.as_ref() {
                    return cfg(format!("metric file {} does not match the scenario grid", path.display()));
                }
                g
            }
            _ => unreachable!("validated preset"),
        };
        let mut g = if doubled && g.grid().as_ref() == base.as_ref() { double_metric(&g)? } else { g };
        if let Some(e) = self.mollify_cells {
            g = mollify(&g, e * g.grid().h(0))?;
        }
        Ok(InitialState::Metric { g, bg: BackgroundMetric::Flat, doubled })
    }

    fn initial_warp(&self) -> Result<WarpedMetric> {
        let grid = self.grid()?;
        let axis = grid.axes[0];
        let n = self.n;
        let wm = match &self.initial {
            InitialMetric::Round { r0, regauge } if *regauge == 0.0 => rotsym::round(axis, n, *r0)?,
            InitialMetric::Round { r0, regauge } => rotsym::round_regauged(axis, n, *r0, *regauge)?,
            InitialMetric::CapCorner { slope } => rotsym::cap_corner(axis, n, *slope)?,
            InitialMetric::DentedCap { eps, delta, s_b } => rotsym::dented_cap(axis, n, *eps, *delta, *s_b)?,
            InitialMetric::File { path } => {
                let w = FieldDocument::read(path)?.to_warped()?;
                if w.axis != axis || w.n != n {
                    return cfg(format!("warped file {} does not match the scenario", path.display()));
                }
                w
            }
            _ => unreachable!("validated preset"),
        };
        match self.mollify_cells {
            Some(e) => rotsym::mollify_warp(&wm, e * axis.h()),
            None => Ok(wm),
        }
    }
}
