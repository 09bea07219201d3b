//! Experiment drivers: single runs with per-step diagnostics and dyadic
//! checkpoints, parameter studies with threshold checks, and file reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{Domain, InitialMetric, InitialState, Monitor, ScenarioConfig, StudyConfig, StudyKind};
use crate::curvature::{boundary_form, cone_margins, riemann, Side};
use crate::deturck::{contraction_ratio, deturck_vectorfield, flow, FlowOptions, FlowTrajectory, NormSpec};
use crate::doubling::{mirror_slices, restrict};
use crate::error::{Error, Result};
use crate::gauge::{integrate_deturck_ode, invert, pullback_metric, ricci_residual};
use crate::grid::{NodeIndex, Topology};
use crate::harmonicmap::hmhf_flow;
use crate::io::{FieldDocument, FieldKind};
use crate::norms::{dyadic_scales, PRODUCT_K};
use crate::parabolic::{certify_parabolicity, TimeMesh};
use crate::pic::PicVariant;
use crate::presets::random_smooth;
use crate::rotsym::{
    curvature_radius_squared, equator_form, reduced_flow, warped_curvature, RotDomain, RotOptions, RotTrajectory, WarpedPic,
};
use crate::tensor::{BackgroundMetric, MetricField, SymField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerance of monitored non-negativity.
pub const SIGN_TOL: f64 = 1e-8;
/// Accepted observed order of second-order schemes.
pub const ORDER_RANGE: (f64, f64) = (1.7, 2.3);
/// Accepted error ratio per grid doubling.
pub const RATIO_RANGE: (f64, f64) = (3.0, 5.0);
/// Accepted smoothing slope of `max |hat-nabla^2 g|` against `t`.
pub const SLOPE_RANGE: (f64, f64) = (-0.7, -0.3);
pub const CONTRACTION_MAX: f64 = 0.9;
pub const EXPONENT_TOL: f64 = 0.25;
pub const SPHERE_REL_TOL: f64 = 1e-3;
pub const UNIQUENESS_GAP_MAX: f64 = 1e-2;
/// Regauging amplitude of the sphere order measurement.
pub const SPHERE_REGAUGE: f64 = 0.1;

pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "min_scal",
    "min_curv_op_eig",
    "pic_margin",
    "pic1_margin",
    "pic2_margin",
    "boundary_A_norm",
    "H_min",
    "symmetry_residual",
    "lambda_parabolicity",
    "max_grad_g",
    "max_hess_g",
    "ricci_residual",
    "drift",
    "c2",
];

/// One CSV row; empty cells are quantities not evaluated at that step.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub min_scal: Option<f64>,
    pub min_curv_op_eig: Option<f64>,
    pub pic_margin: Option<f64>,
    pub pic1_margin: Option<f64>,
    pub pic2_margin: Option<f64>,
    pub boundary_a_norm: Option<f64>,
    pub h_min: Option<f64>,
    pub symmetry_residual: Option<f64>,
    pub lambda: Option<f64>,
    pub max_grad_g: Option<f64>,
    pub max_hess_g: Option<f64>,
    pub ricci_residual: Option<f64>,
    /// `max |g(t) - g(0)|` at stored steps.
    pub drift: Option<f64>,
    /// `n (n-1) / R_mean` (rotsym).
    pub c2: Option<f64>,
}

impl Row {
    fn cells(&self) -> [Option<f64>; 15] {
        [
            Some(self.t),
            self.min_scal,
            self.min_curv_op_eig,
            self.pic_margin,
            self.pic1_margin,
            self.pic2_margin,
            self.boundary_a_norm,
            self.h_min,
            self.symmetry_residual,
            self.lambda,
            self.max_grad_g,
            self.max_hess_g,
            self.ricci_residual,
            self.drift,
            self.c2,
        ]
    }
}

/// Report header: code version and the full configuration, as `#` lines.
pub fn header(cfg: &ScenarioConfig) -> String {
    let mut s = format!("# riccilab {VERSION}\n# config:\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(s, "#   {line}");
    }
    s
}

pub fn csv_text(cfg: &ScenarioConfig, rows: &[Row]) -> String {
    let mut s = header(cfg);
    s.push_str(&CSV_COLUMNS.join(","));
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.cells().iter().map(|c| c.map_or(String::new(), |v| v.to_string())).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    /// Dyadic checkpoints `(j, t, file)` at `t ~ T 2^-j`.
    pub checkpoints: Vec<(usize, f64, FieldDocument)>,
    pub final_state: Option<FieldDocument>,
    /// Runtime failure; rows and checkpoints are then partial.
    pub failure: Option<Error>,
}

/// Stored mesh index nearest to each dyadic time.
fn checkpoint_indices(mesh: &TimeMesh, stored: &[usize]) -> Vec<(usize, usize)> {
    let Ok(scales) = dyadic_scales(&mesh.times) else { return Vec::new() };
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (j, s) in scales.iter().enumerate() {
        let best = stored.iter().copied().min_by(|&a, &b| (mesh.times[a] - s).abs().total_cmp(&(mesh.times[b] - s).abs()));
        if let Some(k) = best {
            if k > 0 && !out.iter().any(|&(_, q)| q == k) {
                out.push((j, k));
            }
        }
    }
    out
}

/// Ricci residual of the trajectory pulled back by the DeTurck maps, per mesh
/// level. Needs every level stored.
pub fn gauge_residual(traj: &FlowTrajectory, bg: &BackgroundMetric) -> Result<Vec<Option<f64>>> {
    if traj.metrics.len() != traj.mesh.times.len() {
        return Err(Error::Shape("gauge stage needs every level stored".into()));
    }
    let w: Vec<_> = traj.metrics.iter().map(|g| deturck_vectorfield(g, bg)).collect();
    let psi = integrate_deturck_ode(&w, &traj.mesh, traj.metrics[0].grid(), 0)?;
    let pulled = psi.iter().zip(&traj.metrics).map(|(p, g)| pullback_metric(p, g)).collect::<Result<Vec<_>>>()?;
    Ok(ricci_residual(&traj.mesh.times, &pulled)?.per_step)
}

fn metric_flow_options(cfg: &ScenarioConfig, g0: &MetricField, bg: &BackgroundMetric, doubled: bool) -> FlowOptions {
    FlowOptions {
        bg: bg.clone(),
        store_every: if cfg.diagnostics.gauge { 1 } else { cfg.diagnostics.store_every },
        curvature_every: cfg.diagnostics.curvature_every,
        mirrors: doubled.then(|| mirror_slices(g0.grid())),
        seed: cfg.seed,
    }
}

fn run_metric(cfg: &ScenarioConfig, g0: MetricField, bg: BackgroundMetric, doubled: bool) -> Result<RunOutput> {
    let mesh = cfg.mesh()?;
    let mut traj = flow(&g0, &mesh, &metric_flow_options(cfg, &g0, &bg, doubled));
    let mut rows: Vec<Row> = traj
        .diagnostics
        .iter()
        .map(|d| Row {
            t: d.t,
            min_scal: d.min_scal,
            min_curv_op_eig: d.min_curv_op_eig,
            pic_margin: d.pic_margin,
            pic1_margin: d.pic1_margin,
            pic2_margin: d.pic2_margin,
            boundary_a_norm: d.boundary_a_norm,
            h_min: d.h_min,
            symmetry_residual: d.symmetry_residual,
            lambda: Some(d.lambda),
            max_grad_g: Some(d.max_grad_g),
            max_hess_g: Some(d.max_hess_g),
            ..Default::default()
        })
        .collect();
    for (&k, g) in traj.stored.iter().zip(&traj.metrics) {
        if let Some(r) = rows.get_mut(k) {
            r.drift = Some(g.max_abs_diff(&g0));
        }
    }
    let mut failure = traj.failure.take();
    if cfg.diagnostics.gauge && failure.is_none() {
        match gauge_residual(&traj, &bg) {
            Ok(res) => rows.iter_mut().zip(res).for_each(|(r, v)| r.ricci_residual = v),
            Err(e) => failure = Some(e),
        }
    }
    let kind = if doubled { FieldKind::DoubledMetric } else { FieldKind::Metric };
    let doc = |k: usize| traj.metrics.iter().zip(&traj.stored).find(|(_, &s)| s == k).map(|(g, _)| FieldDocument::from_metric(g, kind, Some(mesh.times[k])));
    let checkpoints = checkpoint_indices(&mesh, &traj.stored).into_iter().filter_map(|(j, k)| doc(k).map(|d| (j, mesh.times[k], d))).collect();
    let final_state = traj.stored.last().and_then(|&k| doc(k));
    Ok(RunOutput { rows, checkpoints, final_state, failure })
}

fn rot_options(cfg: &ScenarioConfig, pic: bool) -> RotOptions {
    RotOptions { store_every: cfg.diagnostics.store_every, pic, seed: cfg.seed }
}

fn run_rotsym(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let InitialState::Warped(w0) = cfg.initial_state()? else { unreachable!("rotsym domain") };
    let mesh = cfg.mesh()?;
    let mut traj = reduced_flow(&w0, &mesh, &rot_options(cfg, cfg.diagnostics.pic));
    let mut rows: Vec<Row> = traj
        .diagnostics
        .iter()
        .map(|d| Row {
            t: d.t,
            min_scal: Some(d.min_scal),
            min_curv_op_eig: Some(d.min_curv_op_eig),
            pic_margin: d.pic_margin,
            pic1_margin: d.pic1_margin,
            pic2_margin: d.pic2_margin,
            boundary_a_norm: d.boundary_a.map(f64::abs),
            h_min: d.boundary_h,
            ..Default::default()
        })
        .collect();
    for (&k, w) in traj.stored.iter().zip(&traj.states) {
        if let Some(r) = rows.get_mut(k) {
            let df = w.f.iter().zip(&w0.f).chain(w.c.iter().zip(&w0.c)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            r.drift = Some(df);
            r.c2 = Some(curvature_radius_squared(w));
        }
    }
    let doc = |k: usize| traj.states.iter().zip(&traj.stored).find(|(_, &s)| s == k).map(|(w, _)| FieldDocument::from_warped(w, Some(mesh.times[k])));
    let checkpoints = checkpoint_indices(&mesh, &traj.stored).into_iter().filter_map(|(j, k)| doc(k).map(|d| (j, mesh.times[k], d))).collect();
    let final_state = traj.stored.last().and_then(|&k| doc(k));
    Ok(RunOutput { rows, checkpoints, final_state, failure: traj.failure.take() })
}

/// Runs one scenario. Configuration errors are returned; runtime failures
/// are recorded in the output alongside the partial results.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.initial_state()? {
        InitialState::Metric { g, bg, doubled } => run_metric(cfg, g, bg, doubled),
        InitialState::Warped(_) => run_rotsym(cfg),
    }
}

/// Writes `diagnostics.csv`, `config.toml`, dyadic checkpoints and the final
/// state into `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("diagnostics.csv"), csv_text(cfg, &out.rows))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    if cfg.output.checkpoints {
        for (j, _, doc) in &out.checkpoints {
            doc.write(&dir.join(format!("checkpoint_j{j:02}.rlmf")))?;
        }
    }
    if let Some(doc) = &out.final_state {
        doc.write(&dir.join("final.rlmf"))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    fn within(name: &str, value: f64, (lo, hi): (f64, f64)) -> Check {
        Check { name: name.into(), value, bound: format!("in [{lo}, {hi}]"), pass: value >= lo && value <= hi }
    }
    fn open(name: &str, value: f64, (lo, hi): (f64, f64)) -> Check {
        Check { name: name.into(), value, bound: format!("in ({lo}, {hi})"), pass: value > lo && value < hi }
    }
    fn below(name: &str, value: f64, max: f64) -> Check {
        Check { name: name.into(), value, bound: format!("< {max:e}"), pass: value < max }
    }
    fn above(name: &str, value: f64, min: f64) -> Check {
        Check { name: name.into(), value, bound: format!("> {min:e}"), pass: value > min }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub version: &'static str,
    pub config: String,
    pub columns: Vec<String>,
    /// Table rows; `None` cells are members that failed.
    pub rows: Vec<Vec<Option<f64>>>,
    /// Fitted exponents, orders and similar derived numbers.
    pub fitted: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    /// Member runs that failed, with their error.
    pub failures: Vec<String>,
}

impl StudyReport {
    fn new(kind: StudyKind, cfg: &ScenarioConfig, columns: &[&str]) -> StudyReport {
        StudyReport {
            kind,
            version: VERSION,
            config: cfg.to_toml(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fitted: Vec::new(),
            checks: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# riccilab {} study {:?}\n# config:\n", self.version, self.kind);
        for line in self.config.lines() {
            let _ = writeln!(s, "#   {line}");
        }
        let _ = writeln!(s, "{}", self.columns.join("\t"));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.map_or("failed".into(), |v| format!("{v:.6e}"))).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        for (name, v) in &self.fitted {
            let _ = writeln!(s, "{name} = {v:.6}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {} = {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
        }
        for f in &self.failures {
            let _ = writeln!(s, "[FAIL] member: {f}");
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    fn fail(&mut self, what: String, e: &Error) {
        self.failures.push(format!("{what}: {e}"));
    }
}

/// Runs members on scoped worker threads and returns results in order.
fn parallel<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    std::thread::scope(|s| {
        let handles: Vec<_> = items.into_iter().map(|it| s.spawn(|| f(it))).collect();
        handles.into_iter().map(|h| h.join().expect("study member panicked")).collect()
    })
}

fn study_of(cfg: &ScenarioConfig) -> Result<&StudyConfig> {
    cfg.study.as_ref().ok_or_else(|| Error::Config("missing [study] section".into()))
}

fn sweep(cfg: &ScenarioConfig, s: &StudyConfig) -> Result<Vec<usize>> {
    let r = if s.resolutions.is_empty() { vec![cfg.resolution, 2 * cfg.resolution, 4 * cfg.resolution] } else { s.resolutions.clone() };
    if r.len() < 2 || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("resolution sweep {r:?} must increase with 2 or more members")));
    }
    Ok(r)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs a parameter study and evaluates its thresholds.
pub fn study(cfg: &ScenarioConfig) -> Result<StudyReport> {
    cfg.validate()?;
    match study_of(cfg)?.kind {
        StudyKind::SphereBench => sphere_bench(cfg),
        StudyKind::Convergence => convergence(cfg),
        StudyKind::Smoothing => smoothing(cfg),
        StudyKind::Contraction => contraction(cfg),
        StudyKind::Preservation => preservation(cfg),
        StudyKind::Uniqueness => uniqueness(cfg),
    }
}

fn final_c2(cfg: &ScenarioConfig) -> Result<f64> {
    let InitialState::Warped(w0) = cfg.initial_state()? else { unreachable!("rotsym domain") };
    let traj = reduced_flow(&w0, &cfg.mesh()?, &RotOptions { store_every: usize::MAX, pic: false, seed: cfg.seed }).into_result()?;
    Ok(curvature_radius_squared(traj.last()))
}

/// Round-sphere benchmark: `c^2(T)` against `r0^2 - 2(n-1)T` at the scenario
/// resolution, and the spatial order from self-convergence of the regauged
/// sphere over the sweep at a common time mesh.
fn sphere_bench(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    let InitialMetric::Round { r0, regauge } = cfg.initial else {
        return Err(Error::Config("sphere_bench needs the round preset".into()));
    };
    if cfg.domain != Domain::RotsymSphere {
        return Err(Error::Config("sphere_bench runs on rotsym_sphere".into()));
    }
    let res = sweep(cfg, s)?;
    if res.len() < 3 {
        return Err(Error::Config("sphere_bench needs 3 resolutions".into()));
    }
    let mut rep = StudyReport::new(StudyKind::SphereBench, cfg, &["resolution", "next", "difference"]);
    let exact = r0 * r0 - 2.0 * (cfg.n as f64 - 1.0) * cfg.t_end;
    match final_c2(cfg) {
        Ok(c2) => {
            rep.fitted.push((format!("c2 at {} cells", cfg.resolution), c2));
            rep.fitted.push(("c2 exact".into(), exact));
            rep.checks.push(Check::below("c2 relative error", (c2 - exact).abs() / exact.abs(), SPHERE_REL_TOL));
        }
        Err(e) => rep.fail(format!("resolution {}", cfg.resolution), &e),
    }
    let eps = if regauge != 0.0 { regauge } else { SPHERE_REGAUGE };
    let members: Vec<ScenarioConfig> = res
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.resolution = r;
            c.initial = InitialMetric::Round { r0, regauge: eps };
            c
        })
        .collect();
    let q = parallel(members, |c| final_c2(&c));
    order_checks(&mut rep, &res, q, "regauged resolution", |a, b| (a - b).abs());
    Ok(rep)
}

/// Appends per-member rows, successive differences and observed orders.
fn order_checks<T>(rep: &mut StudyReport, res: &[usize], q: Vec<Result<T>>, label: &str, diff: impl Fn(&T, &T) -> f64) {
    let mut ok = Vec::new();
    for (r, v) in res.iter().zip(q) {
        match v {
            Ok(v) => ok.push(Some(v)),
            Err(e) => {
                rep.fail(format!("{label} {r}"), &e);
                ok.push(None);
            }
        }
    }
    let d: Vec<Option<f64>> = ok.windows(2).map(|w| match (&w[0], &w[1]) {
        (Some(a), Some(b)) => Some(diff(a, b)),
        _ => None,
    }).collect();
    for (i, di) in d.iter().enumerate() {
        rep.rows.push(vec![Some(res[i] as f64), Some(res[i + 1] as f64), *di]);
    }
    for (i, w) in d.windows(2).enumerate() {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            let order = (a / b).log2();
            rep.fitted.push((format!("order {}-{}-{}", res[i], res[i + 1], res[i + 2]), order));
            rep.checks.push(Check::within(&format!("observed order at {}", res[i + 2]), order, ORDER_RANGE));
        }
    }
}

/// Final metric on the coarsest grid of the sweep, by injection.
fn final_on(cfg: &ScenarioConfig, coarse: &ScenarioConfig) -> Result<SymField> {
    let InitialState::Metric { g, bg, doubled } = cfg.initial_state()? else { unreachable!("torus domain") };
    let opts = FlowOptions { bg, store_every: usize::MAX, ..Default::default() };
    let traj = flow(&g, &cfg.mesh()?, &opts).into_result()?;
    let last = if doubled { restrict(traj.last())? } else { traj.last().clone() };
    let cg = if doubled { coarse.half_grid()? } else { coarse.grid()? };
    let fg = last.grid();
    let factor: Vec<usize> = (0..fg.dim)
        .map(|a| {
            let (f, c) = (&fg.axes[a], &cg.axes[a]);
            if f.topology == Topology::Periodic { f.resolution / c.resolution } else { (f.resolution - 1) / (c.resolution - 1) }
        })
        .collect();
    let mut out = SymField::zeros(&cg);
    for lin in 0..cg.len() {
        let idx = NodeIndex::from_linear(&cg, lin);
        let fl = NodeIndex(idx.0.iter().zip(&factor).map(|(i, f)| i * f).collect()).linear(fg);
        for c in 0..out.comps.len() {
            out.comps[c][lin] = last.sym().comps[c][fl];
        }
    }
    Ok(out)
}

/// Self-convergence over the resolution sweep with `dt ~ h^2` (step counts
/// scale with the resolution squared; a fixed `dt` is kept as given).
fn convergence(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    let res = sweep(cfg, s)?;
    let mut rep = StudyReport::new(StudyKind::Convergence, cfg, &["resolution", "next", "difference"]);
    let members: Vec<ScenarioConfig> = res.iter().map(|&r| cfg.with_resolution(r)).collect();
    if cfg.domain.is_rotsym() {
        let q = parallel(members, |c| final_c2(&c));
        order_checks(&mut rep, &res, q, "resolution", |a, b| (a - b).abs());
    } else {
        let coarse = members[0].clone();
        let q = parallel(members, |c| final_on(&c, &coarse));
        order_checks(&mut rep, &res, q, "resolution", |a, b| a.max_abs_diff(b));
    }
    Ok(rep)
}

/// Smoothing rate: slope of `ln max |hat-nabla^2 g|` against `ln t`.
fn smoothing(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    let InitialState::Metric { g, bg, doubled } = cfg.initial_state()? else {
        return Err(Error::Config("smoothing runs on torus domains".into()));
    };
    let mut rep = StudyReport::new(StudyKind::Smoothing, cfg, &["t", "max_hess_g"]);
    let mut opts = metric_flow_options(cfg, &g, &bg, doubled);
    opts.store_every = usize::MAX;
    opts.curvature_every = 0;
    let traj = flow(&g, &cfg.mesh()?, &opts);
    if let Some(e) = &traj.failure {
        rep.fail("flow".into(), e);
        return Ok(rep);
    }
    let [t1, t2] = s.fit_window;
    let pts: Vec<(f64, f64)> =
        traj.diagnostics.iter().filter(|d| d.t >= t1 * (1.0 - 1e-12) && d.t <= t2 * (1.0 + 1e-12) && d.t > 0.0).map(|d| (d.t, d.max_hess_g)).collect();
    if pts.len() < 3 {
        return Err(Error::Config(format!("only {} steps inside the fit window", pts.len())));
    }
    rep.rows = pts.iter().map(|&(t, h)| vec![Some(t), Some(h)]).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(t, h)| (t.ln(), h.ln())).unzip();
    let slope = fit_slope(&x, &y);
    rep.fitted.push(("slope".into(), slope));
    rep.checks.push(Check::open("smoothing slope", slope, SLOPE_RANGE));
    Ok(rep)
}

/// Contraction pair `w1 = g0`, `w2 = g0 + eps t^(alpha/2) zeta` at each final
/// time of the sweep.
pub fn contraction_pair(cfg: &ScenarioConfig, mesh: &TimeMesh, alpha: f64, eps: f64) -> Result<(MetricField, Vec<MetricField>, Vec<MetricField>)> {
    let InitialState::Metric { g, .. } = cfg.initial_state()? else {
        return Err(Error::Config("contraction runs on torus domains".into()));
    };
    let grid = g.grid().clone();
    let amp = 0.25;
    let zeta = random_smooth(&grid, amp, 2, cfg.seed.wrapping_add(1))?.into_sym().sub(&SymField::identity(&grid)).scale(1.0 / amp);
    let w1 = mesh.times.iter().map(|&t| MetricField::new_at(g.sym().clone(), t)).collect::<Result<Vec<_>>>()?;
    let w2 = mesh
        .times
        .iter()
        .map(|&t| MetricField::new_at(g.sym().add(&zeta.scale(eps * t.powf(alpha / 2.0))), t))
        .collect::<Result<Vec<_>>>()?;
    Ok((g, w1, w2))
}

fn contraction(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    if cfg.domain != Domain::Torus {
        return Err(Error::Config("contraction runs on the closed torus".into()));
    }
    let mut ts = if s.t_values.is_empty() { vec![0.02, 0.01, 0.005] } else { s.t_values.clone() };
    ts.sort_by(|a, b| b.total_cmp(a));
    let mut rep = StudyReport::new(StudyKind::Contraction, cfg, &["T", "ratio", "numerator", "denominator"]);
    let spec = NormSpec { alpha: s.alpha, gamma: s.gamma };
    let members: Vec<ScenarioConfig> = ts
        .iter()
        .map(|&t| {
            let mut c = cfg.clone();
            c.t_end = t;
            c
        })
        .collect();
    let out = parallel(members, |c| -> Result<_> {
        let mesh = c.mesh()?;
        let (g0, w1, w2) = contraction_pair(&c, &mesh, spec.alpha, s.perturbation)?;
        contraction_ratio(&w1, &w2, &g0, &mesh, spec, &BackgroundMetric::Flat)
    });
    let mut ratios = Vec::new();
    for (t, r) in ts.iter().zip(out) {
        match r {
            Ok(r) => {
                rep.rows.push(vec![Some(*t), Some(r.ratio), Some(r.numerator), Some(r.denominator)]);
                ratios.push((*t, r.ratio));
            }
            Err(e) => {
                rep.rows.push(vec![Some(*t), None, None, None]);
                rep.fail(format!("T = {t}"), &e);
            }
        }
    }
    for &(t, r) in &ratios {
        rep.checks.push(Check::below(&format!("ratio at T = {t}"), r, CONTRACTION_MAX));
    }
    if ratios.len() >= 2 {
        let worst = ratios.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
        rep.checks.push(Check::below("largest ratio quotient as T halves", worst, 1.0));
        let (x, y): (Vec<f64>, Vec<f64>) = ratios.iter().map(|&(t, r)| (t.ln(), r.ln())).unzip();
        let e = fit_slope(&x, &y);
        rep.fitted.push(("exponent".into(), e));
        let target = spec.gamma / 2.0;
        rep.checks.push(Check::within("fitted exponent", e, (target - EXPONENT_TOL, target + EXPONENT_TOL)));
    }
    Ok(rep)
}

fn monitored(d: &crate::rotsym::RotDiagnostics, m: Monitor) -> Option<f64> {
    match m {
        Monitor::CurvatureOperator => Some(d.min_curv_op_eig),
        Monitor::Scalar => Some(d.min_scal),
        Monitor::Pic => d.pic_margin,
        Monitor::Pic1 => d.pic1_margin,
        Monitor::Pic2 => d.pic2_margin,
    }
}

/// Minimum of the monitored margin over a run.
pub fn run_margin(traj: &RotTrajectory, m: Monitor) -> f64 {
    traj.diagnostics.iter().filter_map(|d| monitored(d, m)).fold(f64::INFINITY, f64::min)
}

/// Preservation under the flow for each mollification level.
fn preservation(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    if !cfg.domain.is_rotsym() {
        return Err(Error::Config("preservation runs on rotsym domains".into()));
    }
    let pic = matches!(s.monitor, Monitor::Pic | Monitor::Pic1 | Monitor::Pic2);
    let mut levels = s.mollify_cells.clone();
    levels.sort_by(|a, b| b.total_cmp(a));
    let mut rep = StudyReport::new(StudyKind::Preservation, cfg, &["mollify_cells", "initial_margin", "min_margin", "final_margin"]);
    let out = parallel(levels.clone(), |e| -> Result<RotTrajectory> {
        let mut c = cfg.clone();
        c.mollify_cells = Some(e);
        let InitialState::Warped(w0) = c.initial_state()? else { unreachable!("rotsym domain") };
        reduced_flow(&w0, &c.mesh()?, &RotOptions { store_every: usize::MAX, pic, seed: c.seed }).into_result()
    });
    let mut mins = Vec::new();
    for (e, r) in levels.iter().zip(out) {
        match r {
            Ok(traj) => {
                let m = run_margin(&traj, s.monitor);
                let first = traj.diagnostics.first().and_then(|d| monitored(d, s.monitor));
                let last = traj.diagnostics.last().and_then(|d| monitored(d, s.monitor));
                rep.rows.push(vec![Some(*e), first, Some(m), last]);
                rep.checks.push(Check::above(&format!("min {:?} margin at eps = {e}h", s.monitor), m, -SIGN_TOL));
                mins.push(m);
            }
            Err(err) => {
                rep.rows.push(vec![Some(*e), None, None, None]);
                rep.fail(format!("eps = {e}h"), &err);
            }
        }
    }
    let changes: Vec<f64> = mins.windows(2).map(|w| w[1] - w[0]).collect();
    for (i, d) in changes.iter().enumerate() {
        rep.fitted.push((format!("margin change {}h -> {}h", levels[i], levels[i + 1]), *d));
    }
    if rep.failures.is_empty() && changes.len() >= 2 {
        // the numerical echo of the mollified family converging to the data
        let worst = changes.windows(2).map(|w| w[1].abs() / w[0].abs()).fold(0.0, f64::max);
        rep.checks.push(Check::below("largest margin-change quotient as eps halves", worst, 1.0));
    }
    Ok(rep)
}

/// Sup gap between the direct Ricci-DeTurck solution and its reconstruction
/// through Ricci flow and the harmonic map heat flow, at the mid and final
/// levels.
pub fn route_gap(g0: &MetricField, mesh: &TimeMesh) -> Result<f64> {
    let bg = BackgroundMetric::Flat;
    let a = flow(g0, mesh, &FlowOptions::default()).into_result()?;
    let w: Vec<_> = a.metrics.iter().map(|g| deturck_vectorfield(g, &bg)).collect();
    let psi = integrate_deturck_ode(&w, mesh, g0.grid(), 0)?;
    let ricci = psi.iter().zip(&a.metrics).map(|(p, g)| pullback_metric(p, g)).collect::<Result<Vec<_>>>()?;
    let phi = hmhf_flow(&psi[0], &ricci, mesh, &bg)?;
    let steps = mesh.steps();
    let mut gap: f64 = 0.0;
    for k in [steps / 2, steps] {
        let b = pullback_metric(&invert(&phi[k])?, &ricci[k])?;
        gap = gap.max(b.max_abs_diff(&a.metrics[k]));
    }
    Ok(gap)
}

fn uniqueness(cfg: &ScenarioConfig) -> Result<StudyReport> {
    let s = study_of(cfg)?;
    if cfg.domain != Domain::Torus {
        return Err(Error::Config("uniqueness runs on the closed torus".into()));
    }
    let res = sweep(cfg, s)?;
    let mut rep = StudyReport::new(StudyKind::Uniqueness, cfg, &["resolution", "gap"]);
    let members: Vec<ScenarioConfig> = res.iter().map(|&r| cfg.with_resolution(r)).collect();
    let out = parallel(members, |c| -> Result<f64> {
        let InitialState::Metric { g, .. } = c.initial_state()? else { unreachable!("torus domain") };
        route_gap(&g, &c.mesh()?)
    });
    let mut gaps = Vec::new();
    for (r, g) in res.iter().zip(out) {
        match g {
            Ok(g) => {
                rep.rows.push(vec![Some(*r as f64), Some(g)]);
                gaps.push(Some(g));
            }
            Err(e) => {
                rep.rows.push(vec![Some(*r as f64), None]);
                rep.fail(format!("resolution {r}"), &e);
                gaps.push(None);
            }
        }
    }
    for (i, w) in gaps.windows(2).enumerate() {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            rep.checks.push(Check::within(&format!("gap ratio {}->{}", res[i], res[i + 1]), a / b, RATIO_RANGE));
        }
    }
    if let Some(Some(g)) = gaps.last() {
        rep.checks.push(Check::below(&format!("gap at {}", res[res.len() - 1]), *g, UNIQUENESS_GAP_MAX));
    }
    Ok(rep)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.6e}"))
}

/// Cone margins, boundary classification and parabolicity of a field file.
pub fn check(path: &Path, seed: u64) -> Result<String> {
    let doc = FieldDocument::read(path)?;
    let mut s = format!("file: {}\nkind: {:?}\n", path.display(), doc.header.kind);
    match doc.header.kind {
        FieldKind::Metric | FieldKind::HalfMetric | FieldKind::DoubledMetric => {
            let g = doc.to_metric()?;
            let m = cone_margins(&riemann(&g), &g, seed);
            let lambda = certify_parabolicity(&[&g], &BackgroundMetric::Flat)?.lambda;
            let _ = writeln!(s, "dim: {}\nmin_scal: {:.6e}\nmin_curv_op_eig: {:.6e}", g.dim(), m.min_scalar, m.min_curv_op_eig);
            let _ = writeln!(s, "pic_margin: {}\npic1_margin: {}\npic2_margin: {}", fmt_opt(m.pic), fmt_opt(m.pic1), fmt_opt(m.pic2));
            let _ = writeln!(s, "lambda_parabolicity: {lambda:.6}");
            if doc.header.kind == FieldKind::HalfMetric {
                let last = g.grid().axes[0].resolution - 1;
                for (slice, side) in [(0, Side::Plus), (last, Side::Minus)] {
                    let bf = boundary_form(&g, 0, slice, side)?;
                    let _ = writeln!(
                        s,
                        "boundary slice {slice}: |A| = {:.6e}, H_min = {:.6e}, convex = {}, two_convex = {}, mean_convex = {}",
                        bf.norm(),
                        bf.h_min(),
                        bf.is_convex(),
                        bf.is_two_convex(),
                        bf.is_mean_convex()
                    );
                }
            }
        }
        FieldKind::Warped => {
            let w = doc.to_warped()?;
            let k = warped_curvature(&w);
            let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
            let k1 = if w.n > 2 { Some(min(&k.k1)) } else { None };
            let op = k1.map_or(min(&k.k0), |k1| k1.min(min(&k.k0)));
            let _ = writeln!(s, "n: {}\nmin_scal: {:.6e}\nk0_min: {:.6e}\nk1_min: {}\nmin_curv_op_eig: {op:.6e}", w.n, min(&k.scalar), min(&k.k0), fmt_opt(k1));
            if w.n >= 4 {
                let p = WarpedPic::calibrate(w.n, seed)?;
                for (name, v) in [("pic", PicVariant::Pic), ("pic1", PicVariant::Pic1), ("pic2", PicVariant::Pic2)] {
                    let m = (0..k.k0.len()).map(|i| p.margin(k.k0[i], k.k1[i], v)).fold(f64::INFINITY, f64::min);
                    let _ = writeln!(s, "{name}_margin: {m:.6e}");
                }
            }
            let _ = writeln!(s, "c2: {:.10}", curvature_radius_squared(&w));
            if w.domain() == RotDomain::Hemisphere {
                let (lam, h) = equator_form(&w)?;
                let _ = writeln!(s, "equator: A eigenvalue = {lam:.6e}, H = {h:.6e}, convex = {}", lam >= -crate::curvature::CLASSIFY_TOL);
            }
        }
        FieldKind::Diffeo => {
            let d = doc.to_diffeo()?;
            let b = d.bounds();
            let _ = writeln!(s, "det_min: {:.6e} (node {})\nbilipschitz: {:.6}", b.det_min, b.det_node, b.bilipschitz);
        }
    }
    Ok(s)
}

pub fn info() -> String {
    let mut s = format!("riccilab {VERSION}\n");
    s.push_str("domains: torus, torus_doubled, rotsym_sphere, rotsym_hemisphere_doubled\n");
    s.push_str("presets: flat, kinked_warp, conformal_bump, random_smooth, holder_cusp, round, cap_corner, dented_cap, file\n");
    s.push_str("studies: smoothing, contraction, preservation, sphere_bench, uniqueness, convergence\n");
    let _ = writeln!(s, "csv columns: {}", CSV_COLUMNS.join(","));
    let _ = writeln!(s, "product constant K: {PRODUCT_K}");
    let _ = writeln!(s, "PIC multi-starts: {}", crate::pic::STARTS);
    let _ = writeln!(s, "rotsym oracle gate: {} warps, ratio > {}", crate::rotsym::GATE_WARPS, crate::rotsym::GATE_MIN_RATIO);
    s
}
