//! Linear parabolic systems `d_t eta = tr_w hat-nabla^2 eta + F` on symmetric
//! 2-tensors: graded time meshes, the parabolicity certificate and a
//! theta-scheme stepper with implicit principal part.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FdOrder, Grid, Parity};
use crate::linsolve;
use crate::tensor::{hat_hessian, sym_pairs, BackgroundMetric, MetricField, SymField};

/// Strictly increasing time levels from `0` to `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    pub times: Vec<f64>,
    pub rho: Option<f64>,
}

impl TimeMesh {
    pub fn uniform(t_end: f64, steps: usize) -> Result<TimeMesh> {
        Self::check(t_end, steps)?;
        Ok(TimeMesh { times: (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect(), rho: None })
    }

    /// `t_k = T (k/N)^rho`.
    pub fn graded(t_end: f64, steps: usize, rho: f64) -> Result<TimeMesh> {
        Self::check(t_end, steps)?;
        if !(rho >= 1.0) {
            return Err(Error::Config(format!("grading exponent {rho} below 1")));
        }
        let mut times: Vec<f64> =
            (0..=steps).map(|k| t_end * (k as f64 / steps as f64).powf(rho)).collect();
        times[steps] = t_end;
        Ok(TimeMesh { times, rho: Some(rho) })
    }

    pub fn from_times(times: Vec<f64>) -> Result<TimeMesh> {
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time levels must increase strictly from 0".into()));
        }
        Ok(TimeMesh { times, rho: None })
    }

    fn check(t_end: f64, steps: usize) -> Result<()> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::Config(format!("time mesh needs T > 0 and steps > 0, got {t_end}, {steps}")));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicityCertificate {
    pub lambda: f64,
    pub node: usize,
    pub time_index: usize,
}

/// Extreme eigenvalues of `w` relative to the background metric at a node.
fn relative_eigs(w: &MetricField, bg: &BackgroundMetric, node: usize) -> (f64, f64) {
    let n = w.dim();
    let wm = DMatrix::from_fn(n, n, |i, j| w.get(i, j)[node]);
    let m = match bg.metric() {
        None => wm,
        Some(gh) => {
            let l = DMatrix::from_row_slice(n, n, gh.cholesky_at(node));
            let li = l.try_inverse().expect("background factor invertible");
            &li * wm * li.transpose()
        }
    };
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

/// `lambda` with `lambda |xi|^2 >= w^kl xi_k xi_l >= |xi|^2 / lambda` along a path.
pub fn certify_parabolicity(path: &[&MetricField], bg: &BackgroundMetric) -> Result<ParabolicityCertificate> {
    let mut best = ParabolicityCertificate { lambda: 1.0, node: 0, time_index: 0 };
    for (k, w) in path.iter().enumerate() {
        for node in 0..w.grid().len() {
            let (lo, hi) = relative_eigs(w, bg, node);
            if !(lo > 0.0) {
                return Err(Error::Positivity { node, time: k as f64 });
            }
            // eigenvalues of w^-1 are 1/hi .. 1/lo
            let lam = (1.0 / lo).max(hi);
            if lam > best.lambda {
                best = ParabolicityCertificate { lambda: lam, node, time_index: k };
            }
        }
    }
    Ok(best)
}

/// Applies `u - c * a^kl D_k D_l u` with symmetric coordinate stencils.
pub(crate) fn implicit_apply(grid: &Grid, a: &SymField, c: f64, parity: Parity, u: &[f64], out: &mut [f64]) {
    let n = grid.dim;
    out.copy_from_slice(u);
    for k in 0..n {
        for l in k..n {
            let coef = a.get(k, l);
            let w = if k == l { c } else { 2.0 * c };
            let d = grid.d2(u, k, l, parity);
            for x in 0..out.len() {
                out[x] -= w * coef[x] * d[x];
            }
        }
    }
}

pub(crate) fn implicit_diag(grid: &Grid, a: &SymField, c: f64) -> Vec<f64> {
    let centre = match grid.order {
        FdOrder::Second => 2.0,
        FdOrder::Fourth => 30.0 / 12.0,
    };
    let mut d = vec![1.0; grid.len()];
    for k in 0..grid.dim {
        let h2 = grid.h(k) * grid.h(k);
        let akk = a.get(k, k);
        for x in 0..d.len() {
            d[x] += c * akk[x] * centre / h2;
        }
    }
    d
}

/// Solves `(I - c a^kl D_k D_l) u = rhs` for one scalar component.
pub(crate) fn implicit_solve(
    grid: &Grid,
    a: &SymField,
    c: f64,
    parity: Parity,
    rhs: &[f64],
    guess: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let diag = implicit_diag(grid, a, c);
    let mut x = guess.to_vec();
    linsolve::solve(|v, o| implicit_apply(grid, a, c, parity, v, o), &diag, rhs, &mut x, lambda)?;
    Ok(x)
}

/// `w^kl (hat-nabla^2_kl - D_k D_l) eta`, the connection part of the
/// principal operator (zero in flat mode).
pub fn connection_part(eta: &SymField, w: &MetricField, bg: &BackgroundMetric) -> SymField {
    let n = eta.dim();
    let mut out = SymField::zeros(&eta.grid);
    if bg.is_flat() {
        return out;
    }
    let hh = hat_hessian(eta, bg);
    let flat = hat_hessian(eta, &BackgroundMetric::Flat);
    for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        for k in 0..n {
            for l in 0..n {
                let a = w.inv(k, l);
                let p = hh.comp(&[k, l, i, j]);
                let q = flat.comp(&[k, l, i, j]);
                let o = &mut out.comps[c];
                for x in 0..o.len() {
                    o[x] += a[x] * (p[x] - q[x]);
                }
            }
        }
    }
    out
}

/// `tr_w hat-nabla^2 eta`.
pub fn trace_hessian(eta: &SymField, w: &MetricField, bg: &BackgroundMetric) -> SymField {
    let n = eta.dim();
    let grid = &eta.grid;
    let mut out = connection_part(eta, w, bg);
    for (c, f) in eta.comps.iter().enumerate() {
        let par = eta.parity(c);
        for k in 0..n {
            for l in k..n {
                let a = w.inv(k, l);
                let d = grid.d2(f, k, l, par);
                let m = if k == l { 1.0 } else { 2.0 };
                let o = &mut out.comps[c];
                for x in 0..o.len() {
                    o[x] += m * a[x] * d[x];
                }
            }
        }
    }
    out
}

/// One theta-scheme step of `d_t eta = tr_w hat-nabla^2 eta + F`: the
/// coordinate principal part is treated with weight `theta`, the background
/// connection part and `F` explicitly.
pub fn step_linear(
    eta: &SymField,
    w: &MetricField,
    f: &SymField,
    dt: f64,
    theta: f64,
    bg: &BackgroundMetric,
) -> Result<SymField> {
    if !(dt > 0.0) || !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("invalid step dt={dt}, theta={theta}")));
    }
    let lambda = certify_parabolicity(&[w], bg)?.lambda;
    let grid = &eta.grid;
    let a = w.inverse();
    let conn = connection_part(eta, w, bg);
    let mut out = SymField::zeros(grid);
    let mut expl = vec![0.0; grid.len()];
    for c in 0..eta.comps.len() {
        let par = eta.parity(c);
        let u = &eta.comps[c];
        let mut rhs: Vec<f64> = (0..grid.len()).map(|x| u[x] + dt * (f.comps[c][x] + conn.comps[c][x])).collect();
        if theta < 1.0 {
            implicit_apply(grid, a, -(1.0 - theta) * dt, par, u, &mut expl);
            for x in 0..rhs.len() {
                rhs[x] += expl[x] - u[x];
            }
        }
        out.comps[c] = implicit_solve(grid, a, theta * dt, par, &rhs, u, lambda)?;
    }
    Ok(out)
}

/// Sup norms of all first and second coordinate derivatives.
pub fn derivative_sups(eta: &SymField) -> (f64, f64) {
    let grid = &eta.grid;
    let n = eta.dim();
    let (mut g1, mut g2): (f64, f64) = (0.0, 0.0);
    for (c, f) in eta.comps.iter().enumerate() {
        let par = eta.parity(c);
        for k in 0..n {
            g1 = g1.max(grid.d1(f, k, par).iter().fold(0.0, |m, v| m.max(v.abs())));
            for l in k..n {
                g2 = g2.max(grid.d2(f, k, l, par).iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
    }
    (g1, g2)
}

#[derive(Clone, Debug)]
pub struct LinearTrajectory {
    pub mesh: TimeMesh,
    pub states: Vec<SymField>,
    pub max_grad: Vec<f64>,
    pub max_hess: Vec<f64>,
}

/// Advances over a mesh; step `k` uses coefficient `w[k]` and source `f[k]`.
pub fn solve_path(
    eta0: &SymField,
    w: &[&MetricField],
    f: &[SymField],
    mesh: &TimeMesh,
    theta: f64,
    bg: &BackgroundMetric,
) -> Result<LinearTrajectory> {
    let steps = mesh.steps();
    if w.len() < steps || f.len() < steps {
        return Err(Error::Shape(format!("paths cover {} / {} of {steps} steps", w.len(), f.len())));
    }
    let mut states = vec![eta0.clone()];
    let (g1, g2) = derivative_sups(eta0);
    let mut max_grad = vec![g1];
    let mut max_hess = vec![g2];
    for k in 0..steps {
        let next = step_linear(states.last().unwrap(), w[k], &f[k], mesh.dt(k), theta, bg)?;
        let (g1, g2) = derivative_sups(&next);
        max_grad.push(g1);
        max_hess.push(g2);
        states.push(next);
    }
    Ok(LinearTrajectory { mesh: mesh.clone(), states, max_grad, max_hess })
}
