//! From Ricci-DeTurck flow back to Ricci flow: the DeTurck ODE integrated
//! backward from the identity, pullback of metrics by grid maps, map
//! inversion and the Ricci residual of a metric path.

use nalgebra::DMatrix;

use crate::curvature::ricci;
use crate::deturck::vector_parity;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::parabolic::TimeMesh;
use crate::tensor::{sym_pairs, MetricField, SymField};

/// Damping of the fixed-point map inversion.
pub const INVERSION_DAMPING: f64 = 0.8;
pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAX_ITER: usize = 500;

/// Grid map `x -> x + u(x)`, wrapped by the grid topology.
#[derive(Clone, Debug)]
pub struct DiffeoField {
    pub grid: Grid,
    /// `u[k][node]`
    pub u: Vec<Vec<f64>>,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianBounds {
    pub det_min: f64,
    pub det_node: usize,
    /// `K` with `1/K <= |D psi v| / |v| <= K` at every node.
    pub bilipschitz: f64,
}

impl DiffeoField {
    pub fn identity(grid: &Grid, time: f64) -> DiffeoField {
        DiffeoField { grid: grid.clone(), u: vec![vec![0.0; grid.len()]; grid.dim], time }
    }

    pub fn from_fn(grid: &Grid, time: f64, f: impl Fn(&[f64], usize) -> f64) -> DiffeoField {
        let u = (0..grid.dim).map(|k| (0..grid.len()).map(|x| f(&grid.point(x), k)).collect()).collect();
        DiffeoField { grid: grid.clone(), u, time }
    }

    /// Displacement at a continuous point.
    pub fn displacement(&self, p: &[f64]) -> Vec<f64> {
        (0..self.grid.dim).map(|k| self.grid.interpolate(&self.u[k], p, vector_parity(k))).collect()
    }

    /// `psi(p)` at a continuous point.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.displacement(p).iter().zip(p).map(|(d, x)| x + d).collect()
    }

    /// `psi(x_node)`.
    pub fn image(&self, node: usize) -> Vec<f64> {
        let p = self.grid.point(node);
        (0..self.grid.dim).map(|k| p[k] + self.u[k][node]).collect()
    }

    /// `jac[k][i][node] = d_i psi^k`.
    pub fn jacobian(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.grid.dim;
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let mut d = self.grid.d1(&self.u[k], i, vector_parity(k));
                        if i == k {
                            d.iter_mut().for_each(|v| *v += 1.0);
                        }
                        d
                    })
                    .collect()
            })
            .collect()
    }

    pub fn bounds(&self) -> JacobianBounds {
        let n = self.grid.dim;
        let jac = self.jacobian();
        let mut b = JacobianBounds { det_min: f64::INFINITY, det_node: 0, bilipschitz: 1.0 };
        for node in 0..self.grid.len() {
            let m = DMatrix::from_fn(n, n, |k, i| jac[k][i][node]);
            let det = m.determinant();
            if det < b.det_min {
                b.det_min = det;
                b.det_node = node;
            }
            let sv = m.singular_values();
            let (lo, hi) = (sv.min(), sv.max());
            b.bilipschitz = b.bilipschitz.max(hi).max(if lo > 0.0 { 1.0 / lo } else { f64::INFINITY });
        }
        b
    }

    /// Fails with a gauge-degeneration error unless `det D psi > 0` everywhere.
    pub fn check(&self) -> Result<JacobianBounds> {
        let b = self.bounds();
        if !(b.det_min > 0.0) {
            return Err(Error::GaugeDegeneration { node: b.det_node, time: self.time, det: b.det_min });
        }
        Ok(b)
    }

    pub fn max_abs_diff(&self, other: &DiffeoField) -> f64 {
        self.u.iter().flatten().zip(other.u.iter().flatten()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Vector field `w` evaluated at `psi(x)` for every node.
fn along(grid: &Grid, w: &[Vec<f64>], psi: &DiffeoField) -> Vec<Vec<f64>> {
    let n = grid.dim;
    let mut out = vec![vec![0.0; grid.len()]; n];
    for node in 0..grid.len() {
        let p = psi.image(node);
        for k in 0..n {
            out[k][node] = grid.interpolate(&w[k], &p, vector_parity(k));
        }
    }
    out
}

/// Integrates `d_t psi = -W(psi, t)` backward from `psi(t_N) = id` down to
/// mesh index `k_min` with Heun's method. `w[k]` is the field at `t_k`.
/// Returns `psi` at indices `k_min..=N`, in increasing time order.
pub fn integrate_deturck_ode(w: &[Vec<Vec<f64>>], mesh: &TimeMesh, grid: &Grid, k_min: usize) -> Result<Vec<DiffeoField>> {
    let steps = mesh.steps();
    if w.len() != steps + 1 || k_min > steps {
        return Err(Error::Shape(format!("{} vector fields for {} levels, k_min {k_min}", w.len(), steps + 1)));
    }
    let n = grid.dim;
    let mut path = vec![DiffeoField::identity(grid, mesh.t_end())];
    for k in (k_min..steps).rev() {
        let cur = path.last().unwrap();
        let dt = mesh.dt(k);
        let w1 = along(grid, &w[k + 1], cur);
        let mut pred = cur.clone();
        for a in 0..n {
            for x in 0..grid.len() {
                pred.u[a][x] += dt * w1[a][x];
            }
        }
        let w0 = along(grid, &w[k], &pred);
        let mut next = cur.clone();
        next.time = mesh.times[k];
        for a in 0..n {
            for x in 0..grid.len() {
                next.u[a][x] += 0.5 * dt * (w1[a][x] + w0[a][x]);
            }
        }
        next.check()?;
        path.push(next);
    }
    path.reverse();
    Ok(path)
}

/// Linear extrapolation of `psi` to `t = 0` from the two earliest levels.
pub fn extrapolate_initial(path: &[DiffeoField]) -> Result<DiffeoField> {
    if path.len() < 2 {
        return Err(Error::Shape("extrapolation needs two levels".into()));
    }
    let (a, b) = (&path[0], &path[1]);
    let s = a.time / (b.time - a.time);
    let mut out = a.clone();
    for (o, (ua, ub)) in out.u.iter_mut().zip(a.u.iter().zip(&b.u)) {
        for x in 0..o.len() {
            o[x] = ua[x] - s * (ub[x] - ua[x]);
        }
    }
    out.time = 0.0;
    Ok(out)
}

/// `(psi^* g)_ij = g_kl(psi) d_i psi^k d_j psi^l`.
pub fn pullback_metric(psi: &DiffeoField, g: &MetricField) -> Result<MetricField> {
    let grid = g.grid();
    let n = g.dim();
    let jac = psi.jacobian();
    let gs = g.sym();
    let mut at = SymField::zeros(grid);
    for node in 0..grid.len() {
        let p = psi.image(node);
        for c in 0..gs.comps.len() {
            at.comps[c][node] = grid.interpolate(&gs.comps[c], &p, gs.parity(c));
        }
    }
    let mut out = SymField::zeros(grid);
    for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        for node in 0..grid.len() {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += at.get(k, l)[node] * jac[k][i][node] * jac[l][j][node];
                }
            }
            out.comps[c][node] = s;
        }
    }
    MetricField::new_at(out, psi.time)
}

/// Numerical inverse by damped fixed-point iteration
/// `x <- x - d (psi(x) - y)` at every node `y`.
pub fn invert(psi: &DiffeoField) -> Result<DiffeoField> {
    let grid = &psi.grid;
    let n = grid.dim;
    let mut inv = DiffeoField::identity(grid, psi.time);
    for node in 0..grid.len() {
        let y = grid.point(node);
        let mut x: Vec<f64> = (0..n).map(|k| y[k] - psi.u[k][node]).collect();
        let mut done = false;
        for _ in 0..INVERSION_MAX_ITER {
            let r: Vec<f64> = psi.apply(&x).iter().zip(&y).map(|(a, b)| a - b).collect();
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= INVERSION_TOL {
                done = true;
                break;
            }
            for k in 0..n {
                x[k] -= INVERSION_DAMPING * r[k];
            }
        }
        if !done {
            return Err(Error::Inversion { node });
        }
        for k in 0..n {
            inv.u[k][node] = x[k] - y[k];
        }
    }
    Ok(inv)
}

/// Three-point time derivative at interior level `k` of a nonuniform mesh.
pub fn time_derivative(times: &[f64], path: &[&SymField], k: usize) -> SymField {
    let h1 = times[k] - times[k - 1];
    let h2 = times[k + 1] - times[k];
    let a = -h2 / (h1 * (h1 + h2));
    let b = (h2 - h1) / (h1 * h2);
    let c = h1 / (h2 * (h1 + h2));
    path[k - 1].scale(a).add(&path[k].scale(b)).add(&path[k + 1].scale(c))
}

#[derive(Clone, Debug)]
pub struct RicciResidual {
    /// `None` at the two end levels.
    pub per_step: Vec<Option<f64>>,
    pub max: f64,
    /// Residual field at the level attaining the maximum.
    pub field: Option<SymField>,
}

/// `|d_t g + 2 Ric(g)|` along a path sampled at `times`.
pub fn ricci_residual(times: &[f64], path: &[MetricField]) -> Result<RicciResidual> {
    if path.len() < 3 || times.len() != path.len() {
        return Err(Error::Shape(format!("residual needs 3 or more levels with times, got {}", path.len())));
    }
    let syms: Vec<&SymField> = path.iter().map(|g| g.sym()).collect();
    let mut out = RicciResidual { per_step: vec![None; path.len()], max: 0.0, field: None };
    for k in 1..path.len() - 1 {
        let r = time_derivative(times, &syms, k).add(&ricci(&path[k]).scale(2.0));
        let m = r.max_abs();
        out.per_step[k] = Some(m);
        if out.field.is_none() || m > out.max {
            out.max = m;
            out.field = Some(r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn identity_map_has_unit_jacobian() {
        let grid = GridSpec::torus(2, 1.0, 8).unwrap();
        let b = DiffeoField::identity(&grid, 0.0).check().unwrap();
        assert_eq!(b.det_min, 1.0);
        assert_eq!(b.bilipschitz, 1.0);
    }
}
