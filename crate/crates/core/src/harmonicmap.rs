//! Harmonic map heat flow `d_t phi = Delta_{g(t), flat} phi` of grid maps and
//! the pullback of a Ricci flow by the inverse maps.

use crate::deturck::{deturck_rhs, vector_parity};
use crate::error::{Error, Result};
use crate::gauge::{invert, pullback_metric, time_derivative, DiffeoField};
use crate::jets::{Local, MetricJets};
use crate::parabolic::{certify_parabolicity, implicit_solve, TimeMesh};
use crate::tensor::{BackgroundMetric, MetricField, SymField};

/// Grid map advanced by the harmonic map heat flow.
pub type MapField = DiffeoField;

/// `-g^ij Gamma^a_ij (delta + du)^a_k`, the explicit transport part.
fn transport(phi: &MapField, g: &MetricField) -> Vec<Vec<f64>> {
    let grid = g.grid();
    let n = g.dim();
    let jac = phi.jacobian();
    let jets = MetricJets::new(g, false);
    let mut loc = Local::new(n);
    let mut out = vec![vec![0.0; grid.len()]; n];
    for node in 0..grid.len() {
        jets.fill(node, &mut loc);
        for k in 0..n {
            let mut wk = 0.0;
            for i in 0..n {
                for j in 0..n {
                    wk += loc.gi[i * n + j] * loc.gam[(k * n + i) * n + j];
                }
            }
            for (a, o) in out.iter_mut().enumerate() {
                o[node] -= wk * jac[a][k][node];
            }
        }
    }
    out
}

/// `(Delta_{g, flat} phi)^a = g^ij (d_i d_j phi^a - Gamma^k_ij d_k phi^a)`.
pub fn hmhf_rhs(phi: &MapField, g: &MetricField, bg: &BackgroundMetric) -> Result<Vec<Vec<f64>>> {
    if !bg.is_flat() {
        return Err(Error::UnsupportedMode("harmonic map heat flow"));
    }
    let grid = g.grid();
    let n = g.dim();
    let mut out = transport(phi, g);
    for (a, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let m = if i == j { 1.0 } else { 2.0 };
                let d = grid.d2(&phi.u[a], i, j, vector_parity(a));
                let gij = g.inv(i, j);
                for x in 0..o.len() {
                    o[x] += m * gij[x] * d[x];
                }
            }
        }
    }
    Ok(out)
}

/// Advances `phi` over the mesh, implicit in `g^ij d_i d_j` with the
/// coefficient at the new level, transport explicit. `g[k]` lives at `t_k`.
pub fn hmhf_flow(phi0: &MapField, g: &[MetricField], mesh: &TimeMesh, bg: &BackgroundMetric) -> Result<Vec<MapField>> {
    if !bg.is_flat() {
        return Err(Error::UnsupportedMode("harmonic map heat flow"));
    }
    if g.len() != mesh.times.len() {
        return Err(Error::Shape(format!("{} metrics for {} levels", g.len(), mesh.times.len())));
    }
    let grid = phi0.grid.clone();
    let mut path = vec![phi0.clone()];
    for k in 0..mesh.steps() {
        let dt = mesh.dt(k);
        let cur = path.last().unwrap();
        let gk = &g[k + 1];
        let lambda = certify_parabolicity(&[gk], bg)?.lambda;
        let tr = transport(cur, gk);
        let mut next = cur.clone();
        next.time = mesh.times[k + 1];
        for a in 0..grid.dim {
            let rhs: Vec<f64> = (0..grid.len()).map(|x| cur.u[a][x] + dt * tr[a][x]).collect();
            next.u[a] = implicit_solve(&grid, gk.inverse(), dt, vector_parity(a), &rhs, &cur.u[a], lambda)?;
        }
        next.check()?;
        path.push(next);
    }
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct DeturckPullback {
    pub metrics: Vec<MetricField>,
    /// `|d_t g - tr_g D^2 g - Q|` at interior levels.
    pub defect: Vec<Option<f64>>,
}

/// `(phi_t^-1)^* g(t)` at every level, with its Ricci-DeTurck defect.
pub fn pullback_to_deturck(
    phi: &[MapField],
    g: &[MetricField],
    times: &[f64],
    bg: &BackgroundMetric,
) -> Result<DeturckPullback> {
    if phi.len() != g.len() || times.len() != g.len() {
        return Err(Error::Shape(format!("{} maps, {} metrics, {} times", phi.len(), g.len(), times.len())));
    }
    let metrics = phi
        .iter()
        .zip(g)
        .map(|(p, m)| pullback_metric(&invert(p)?, m))
        .collect::<Result<Vec<_>>>()?;
    let syms: Vec<&SymField> = metrics.iter().map(|m| m.sym()).collect();
    let mut defect = vec![None; metrics.len()];
    for k in 1..metrics.len().saturating_sub(1) {
        let d = time_derivative(times, &syms, k).sub(&deturck_rhs(&metrics[k], bg));
        defect[k] = Some(d.max_abs());
    }
    Ok(DeturckPullback { metrics, defect })
}
