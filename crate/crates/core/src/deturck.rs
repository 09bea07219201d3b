//! Ricci-DeTurck flow in the background-covariant form
//! `d_t g = g^kl hat-nabla_k hat-nabla_l g + Q(g, hat-nabla g)`, the DeTurck
//! vector field, the Lie-derivative oracle, and the Picard operator.

use crate::curvature::{self, cone_margins, riemann, Side};
use crate::doubling;
use crate::error::{Error, Result};
use crate::grid::Parity;
use crate::jets::{Local, MetricJets};
use crate::norms::{x_norm, FieldPath};
use crate::parabolic::{certify_parabolicity, connection_part, derivative_sups, implicit_solve, trace_hessian, TimeMesh};
use crate::tensor::{hat_gradient, sym_index, sym_pairs, BackgroundMetric, MetricField, SymField};

/// `hat-nabla_k g_ij` at every node, `out[(k*n+i)*n+j][node]`.
fn hat_derivs(g: &MetricField, bg: &BackgroundMetric) -> Option<Vec<Vec<f64>>> {
    if bg.is_flat() {
        return None;
    }
    Some(hat_gradient(g.sym(), bg).comps)
}

/// The quadratic-plus-background-curvature term `Q(g, hat-nabla g)`,
/// symmetrised in `(i, j)`.
pub fn q_term(g: &MetricField, bg: &BackgroundMetric) -> SymField {
    let n = g.dim();
    let grid = g.grid();
    let jets = MetricJets::new(g, false);
    let hd = hat_derivs(g, bg);
    let mut loc = Local::new(n);
    let mut out = SymField::zeros(grid);
    let mut d = vec![0.0; n * n * n];
    let pairs = sym_pairs(n);
    for node in 0..grid.len() {
        jets.fill(node, &mut loc);
        match &hd {
            None => d.copy_from_slice(&loc.dg),
            Some(h) => {
                for (c, v) in d.iter_mut().enumerate() {
                    *v = h[c][node];
                }
            }
        }
        let di = |k: usize, i: usize, j: usize| d[(k * n + i) * n + j];
        let gi = |i: usize, j: usize| loc.gi[i * n + j];
        let qp = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let gkl = gi(k, l);
                    for p in 0..n {
                        for q in 0..n {
                            let t = di(i, p, k) * di(j, q, l) + 2.0 * di(k, i, p) * di(q, j, l)
                                - 2.0 * di(k, i, p) * di(l, j, q)
                                - 4.0 * di(i, p, k) * di(l, j, q);
                            s += gkl * gi(p, q) * t;
                        }
                    }
                }
            }
            0.5 * s
        };
        for (c, &(i, j)) in pairs.iter().enumerate() {
            out.comps[c][node] = 0.5 * (qp(i, j) + qp(j, i));
        }
    }
    if let (Some(riem), Some(gh)) = (bg.riemann(), bg.metric()) {
        // -g^kl g_ip gh^pq Rh_jkql - g^kl g_jp gh^pq Rh_ikql
        for (c, &(i, j)) in pairs.iter().enumerate() {
            for node in 0..grid.len() {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        for p in 0..n {
                            for q in 0..n {
                                let a = g.inv(k, l)[node] * gh.inv(p, q)[node];
                                s -= a
                                    * (g.get(i, p)[node] * riem.comp(&[j, k, q, l])[node]
                                        + g.get(j, p)[node] * riem.comp(&[i, k, q, l])[node]);
                            }
                        }
                    }
                }
                out.comps[c][node] += s;
            }
        }
    }
    out
}

/// `W^k = g^ij (Gamma^k_ij - hat-Gamma^k_ij)`.
pub fn deturck_vectorfield(g: &MetricField, bg: &BackgroundMetric) -> Vec<Vec<f64>> {
    let n = g.dim();
    let grid = g.grid();
    let jets = MetricJets::new(g, false);
    let mut loc = Local::new(n);
    let mut w = vec![vec![0.0; grid.len()]; n];
    for node in 0..grid.len() {
        jets.fill(node, &mut loc);
        for (k, wk) in w.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut gam = loc.gam[(k * n + i) * n + j];
                    if let Some(gh) = bg.gamma() {
                        gam -= gh.comp(&[k, i, j])[node];
                    }
                    s += loc.gi[i * n + j] * gam;
                }
            }
            wk[node] = s;
        }
    }
    w
}

/// Parity of the `k`-th component of a vector field.
pub fn vector_parity(k: usize) -> Parity {
    Parity::of_component(&[k])
}

/// `(L_W g)_ij = W^k d_k g_ij + g_kj d_i W^k + g_ik d_j W^k`.
pub fn lie_derivative(g: &MetricField, w: &[Vec<f64>]) -> SymField {
    let n = g.dim();
    let grid = g.grid();
    let jets = MetricJets::new(g, false);
    let dw: Vec<Vec<Vec<f64>>> =
        (0..n).map(|i| (0..n).map(|k| grid.d1(&w[k], i, vector_parity(k))).collect()).collect();
    let mut out = SymField::zeros(grid);
    for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        for node in 0..grid.len() {
            let mut s = 0.0;
            for k in 0..n {
                s += w[k][node] * jets.dg[k][sym_index(n, i, j)][node]
                    + g.get(k, j)[node] * dw[i][k][node]
                    + g.get(i, k)[node] * dw[j][k][node];
            }
            out.comps[c][node] = s;
        }
    }
    out
}

/// `-2 Ric(g) + L_W g`, the identity's left side, used only as an oracle.
pub fn ricci_deturck_oracle(g: &MetricField, bg: &BackgroundMetric) -> SymField {
    let ric = curvature::ricci(g);
    let lw = lie_derivative(g, &deturck_vectorfield(g, bg));
    lw.zip_map(&ric, |a, r| a - 2.0 * r)
}

/// `tr_g hat-nabla^2 g + Q(g, hat-nabla g)`.
pub fn deturck_rhs(g: &MetricField, bg: &BackgroundMetric) -> SymField {
    trace_hessian(g.sym(), g, bg).add(&q_term(g, bg))
}

/// Per-step record. Curvature entries are filled on curvature steps only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub min_scal: Option<f64>,
    pub min_curv_op_eig: Option<f64>,
    pub pic_margin: Option<f64>,
    pub pic1_margin: Option<f64>,
    pub pic2_margin: Option<f64>,
    pub boundary_a_norm: Option<f64>,
    pub h_min: Option<f64>,
    pub symmetry_residual: Option<f64>,
    pub lambda: f64,
    pub max_grad_g: f64,
    pub max_hess_g: f64,
    pub ricci_residual: Option<f64>,
}

/// Mirror slices to monitor on a doubled grid: `(node index, side)`.
pub type MirrorSlices = Vec<(usize, Side)>;

#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub bg: BackgroundMetric,
    /// Store every `store_every`-th metric plus the last (1 stores all).
    pub store_every: usize,
    /// Curvature diagnostics every this many steps (0 disables).
    pub curvature_every: usize,
    /// Doubled-domain monitoring: symmetry residual and boundary forms.
    pub mirrors: Option<MirrorSlices>,
    pub seed: u64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { bg: BackgroundMetric::Flat, store_every: 1, curvature_every: 0, mirrors: None, seed: 0 }
    }
}

#[derive(Debug)]
pub struct FlowTrajectory {
    pub mesh: TimeMesh,
    /// Mesh indices of stored metrics.
    pub stored: Vec<usize>,
    pub metrics: Vec<MetricField>,
    pub diagnostics: Vec<Diagnostics>,
    /// Set when the run halted early; the trajectory is then partial.
    pub failure: Option<Error>,
}

impl FlowTrajectory {
    pub fn last(&self) -> &MetricField {
        self.metrics.last().expect("trajectory holds the initial metric")
    }

    pub fn into_result(self) -> Result<FlowTrajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    /// Stored metric at mesh index `k`, if kept.
    pub fn at(&self, k: usize) -> Option<&MetricField> {
        self.stored.iter().position(|&s| s == k).map(|p| &self.metrics[p])
    }
}

fn diagnose(g: &MetricField, t: f64, step: usize, opts: &FlowOptions) -> Result<Diagnostics> {
    let (mg, mh) = derivative_sups(g.sym());
    let mut d = Diagnostics {
        t,
        lambda: certify_parabolicity(&[g], &opts.bg)?.lambda,
        max_grad_g: mg,
        max_hess_g: mh,
        ..Default::default()
    };
    if let Some(mirrors) = &opts.mirrors {
        let res = doubling::symmetry_residual(g)?;
        d.symmetry_residual = Some(res);
        if res <= doubling::MONITOR_TOL {
            let mut a: f64 = 0.0;
            let mut h = f64::INFINITY;
            for &(slice, side) in mirrors {
                let bf = curvature::boundary_form(g, 0, slice, side)?;
                a = a.max(bf.norm());
                h = h.min(bf.h_min());
            }
            d.boundary_a_norm = Some(a);
            d.h_min = Some(h);
        }
    }
    if opts.curvature_every > 0 && step % opts.curvature_every == 0 {
        let b = riemann(g);
        let m = cone_margins(&b, g, opts.seed);
        d.min_scal = Some(m.min_scalar);
        d.min_curv_op_eig = Some(m.min_curv_op_eig);
        d.pic_margin = m.pic;
        d.pic1_margin = m.pic1;
        d.pic2_margin = m.pic2;
    }
    Ok(d)
}

/// One linearly implicit step: coefficient frozen at `g`, `Q` and the
/// background connection part explicit.
pub fn flow_step(g: &MetricField, dt: f64, bg: &BackgroundMetric, t_next: f64) -> Result<MetricField> {
    let grid = g.grid();
    let lambda = certify_parabolicity(&[g], bg)?.lambda;
    let q = q_term(g, bg);
    let conn = connection_part(g.sym(), g, bg);
    let a = g.inverse();
    let mut next = SymField::zeros(grid);
    for c in 0..q.comps.len() {
        let u = &g.sym().comps[c];
        let rhs: Vec<f64> = (0..grid.len()).map(|x| u[x] + dt * (q.comps[c][x] + conn.comps[c][x])).collect();
        next.comps[c] = implicit_solve(grid, a, dt, g.sym().parity(c), &rhs, u, lambda)?;
    }
    MetricField::new_at(next, t_next)
}

/// Ricci-DeTurck flow over a mesh with per-step diagnostics. A positivity or
/// solver failure halts the run and is recorded in `failure`.
pub fn flow(g0: &MetricField, mesh: &TimeMesh, opts: &FlowOptions) -> FlowTrajectory {
    let mut traj = FlowTrajectory {
        mesh: mesh.clone(),
        stored: vec![0],
        metrics: vec![g0.clone()],
        diagnostics: Vec::new(),
        failure: None,
    };
    match diagnose(g0, 0.0, 0, opts) {
        Ok(d) => traj.diagnostics.push(d),
        Err(e) => {
            traj.failure = Some(e);
            return traj;
        }
    }
    let mut cur = g0.clone();
    let every = opts.store_every.max(1);
    for k in 0..mesh.steps() {
        let t = mesh.times[k + 1];
        let next = match flow_step(&cur, mesh.dt(k), &opts.bg, t).and_then(|g| diagnose(&g, t, k + 1, opts).map(|d| (g, d))) {
            Ok((g, d)) => {
                traj.diagnostics.push(d);
                g
            }
            Err(e) => {
                traj.failure = Some(e);
                return traj;
            }
        };
        if (k + 1) % every == 0 || k + 1 == mesh.steps() {
            traj.stored.push(k + 1);
            traj.metrics.push(next.clone());
        }
        cur = next;
    }
    traj
}

/// The Picard map: solves `d_t eta - tr_g0 D^2 eta = tr_w hat-nabla^2 w - tr_g0 D^2 w + Q(w)`
/// from `eta(0) = g0`. Step `n -> n+1` uses `w^n` for the coefficient and `Q`,
/// and `w^{n+1}` inside the second derivatives, so a discrete flow trajectory
/// is an exact fixed point.
pub fn picard_operator(w: &[MetricField], g0: &MetricField, mesh: &TimeMesh, bg: &BackgroundMetric) -> Result<Vec<SymField>> {
    if w.len() != mesh.times.len() {
        return Err(Error::Shape(format!("path has {} slices for {} levels", w.len(), mesh.times.len())));
    }
    let grid = g0.grid();
    let lambda = certify_parabolicity(&[g0], bg)?.lambda;
    let a0 = g0.inverse();
    let mut eta = vec![g0.sym().clone()];
    for k in 0..mesh.steps() {
        let dt = mesh.dt(k);
        let wn = &w[k];
        let wnext = w[k + 1].sym();
        let q = q_term(wn, bg);
        let conn = connection_part(wn.sym(), wn, bg);
        let tr_w = trace_hessian(wnext, wn, &BackgroundMetric::Flat);
        let tr_0 = trace_hessian(wnext, g0, &BackgroundMetric::Flat);
        let prev = eta.last().unwrap();
        let mut next = SymField::zeros(grid);
        for c in 0..q.comps.len() {
            let rhs: Vec<f64> = (0..grid.len())
                .map(|x| {
                    prev.comps[c][x] + dt * ((tr_w.comps[c][x] - tr_0.comps[c][x]) + q.comps[c][x] + conn.comps[c][x])
                })
                .collect();
            next.comps[c] = implicit_solve(grid, a0, dt, prev.parity(c), &rhs, &prev.comps[c], lambda)?;
        }
        eta.push(next);
    }
    Ok(eta)
}

/// Norm used for contraction measurements: the discrete solution-space norm
/// with two derivatives, Hölder exponent `alpha`, inner exponent `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionResult {
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `w1 == w2`, ratio defined as zero.
    pub degenerate: bool,
}

pub fn contraction_ratio(
    w1: &[MetricField],
    w2: &[MetricField],
    g0: &MetricField,
    mesh: &TimeMesh,
    spec: NormSpec,
    bg: &BackgroundMetric,
) -> Result<ContractionResult> {
    let to_path = |v: &[SymField]| FieldPath::from_sym(&mesh.times, v);
    let s1: Vec<SymField> = w1.iter().map(|m| m.sym().clone()).collect();
    let s2: Vec<SymField> = w2.iter().map(|m| m.sym().clone()).collect();
    let diff_in = to_path(&s1).sub(&to_path(&s2));
    let denominator = x_norm(&diff_in, 2, spec.alpha, spec.gamma)?;
    if denominator == 0.0 {
        return Ok(ContractionResult { ratio: 0.0, numerator: 0.0, denominator, degenerate: true });
    }
    let r1 = picard_operator(w1, g0, mesh, bg)?;
    let r2 = picard_operator(w2, g0, mesh, bg)?;
    let numerator = x_norm(&to_path(&r1).sub(&to_path(&r2)), 2, spec.alpha, spec.gamma)?;
    Ok(ContractionResult { ratio: numerator / denominator, numerator, denominator, degenerate: false })
}
