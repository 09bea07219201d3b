//! Doubling across the boundary: reflect half-domain metrics to a periodic
//! domain of twice the length, restrict back, measure reflection symmetry and
//! monitor the second fundamental form of the mirror slices.

use std::sync::Arc;

use crate::curvature::{boundary_form, Side};
use crate::deturck::FlowTrajectory;
use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, Topology};
use crate::tensor::{MetricField, SymField};

/// Mixed components above this on a mirror slice make reflection ill-posed.
pub const MIXED_TOL: f64 = 1e-10;
/// Largest symmetry residual for which the mirror form is meaningful.
pub const MONITOR_TOL: f64 = 1e-8;

/// Periodic grid of period `2L` matching a half grid on `[0, L]`.
pub fn doubled_grid(half: &GridSpec) -> Result<Arc<GridSpec>> {
    let a0 = &half.axes[0];
    if a0.topology.is_periodic() || a0.topology == Topology::Polar {
        return Err(Error::Config("half domain needs a reflecting axis 0".into()));
    }
    let mut axes = half.axes.clone();
    axes[0] = Axis::periodic(2.0 * a0.extent, 2 * (a0.resolution - 1));
    GridSpec::with_order(axes, half.order)
}

/// Reflecting half grid matching a doubled periodic grid.
pub fn half_grid(doubled: &GridSpec) -> Result<Arc<GridSpec>> {
    let a0 = &doubled.axes[0];
    if !a0.topology.is_periodic() || a0.resolution % 2 != 0 {
        return Err(Error::Config("doubled axis 0 must be periodic with an even node count".into()));
    }
    let mut axes = doubled.axes.clone();
    axes[0] = Axis::reflect(a0.extent / 2.0, a0.resolution / 2 + 1);
    GridSpec::with_order(axes, doubled.order)
}

/// Mirror slices of a doubled grid: `x = 0` with the half on the plus side
/// and `x = L` with the half on the minus side.
pub fn mirror_slices(doubled: &GridSpec) -> Vec<(usize, Side)> {
    vec![(0, Side::Plus), (doubled.axes[0].resolution / 2, Side::Minus)]
}

/// Node of the reflection partner `x -> -x` on a doubled grid.
fn partner(grid: &GridSpec, lin: usize) -> usize {
    let m = grid.axes[0].resolution;
    let i = grid.axis_index(lin, 0);
    let j = (m - i) % m;
    lin - i * grid.stride(0) + j * grid.stride(0)
}

/// Extends a half metric by parity: `g_00`, `g_ab` even, `g_0a` odd.
pub fn double_metric(half: &MetricField) -> Result<MetricField> {
    let hg = half.grid();
    let dg = doubled_grid(hg)?;
    let n = half.dim();
    let nh = hg.axes[0].resolution;
    for lin in 0..hg.len() {
        let i = hg.axis_index(lin, 0);
        if i == 0 || i == nh - 1 {
            for a in 1..n {
                let v = half.get(0, a)[lin];
                if v.abs() > MIXED_TOL {
                    return Err(Error::IllPosedReflection { slice: i, component: a, value: v });
                }
            }
        }
    }
    let s = half.sym();
    let mut out = SymField::zeros(&dg);
    for (c, f) in s.comps.iter().enumerate() {
        let sign = s.parity(c).sign();
        let o = &mut out.comps[c];
        for (lin, v) in o.iter_mut().enumerate() {
            let i = dg.axis_index(lin, 0);
            let (src, sg) = if i < nh { (i, 1.0) } else { (2 * (nh - 1) - i, sign) };
            let hl = lin - i * dg.stride(0) + src * hg.stride(0);
            // mirror slices hold exact zeros in odd components
            *v = if sign < 0.0 && (src == 0 || src == nh - 1) { 0.0 } else { sg * f[hl] };
        }
    }
    MetricField::new(out)
}

/// Restriction of a doubled metric to the half `[0, L]`.
pub fn restrict(doubled: &MetricField) -> Result<MetricField> {
    let dg = doubled.grid();
    let hg = half_grid(dg)?;
    let s = doubled.sym();
    let mut out = SymField::zeros(&hg);
    for (c, f) in s.comps.iter().enumerate() {
        for (lin, v) in out.comps[c].iter_mut().enumerate() {
            let i = hg.axis_index(lin, 0);
            let dl = lin - i * hg.stride(0) + i * dg.stride(0);
            *v = f[dl];
        }
    }
    MetricField::new(out)
}

/// `max |g - reflect(g)|` over nodes and components.
pub fn symmetry_residual(g: &MetricField) -> Result<f64> {
    let grid = g.grid();
    if !grid.axes[0].topology.is_periodic() {
        return Err(Error::Config("symmetry residual needs a doubled periodic axis 0".into()));
    }
    let s = g.sym();
    let mut r: f64 = 0.0;
    for (c, f) in s.comps.iter().enumerate() {
        let sign = s.parity(c).sign();
        for lin in 0..grid.len() {
            r = r.max((f[lin] - sign * f[partner(grid, lin)]).abs());
        }
    }
    Ok(r)
}

/// Exact reflection of a doubled metric.
pub fn reflect(g: &MetricField) -> Result<MetricField> {
    let grid = g.grid();
    let s = g.sym();
    let mut out = SymField::zeros(grid);
    for (c, f) in s.comps.iter().enumerate() {
        let sign = s.parity(c).sign();
        for lin in 0..grid.len() {
            out.comps[c][lin] = sign * f[partner(grid, lin)];
        }
    }
    MetricField::new(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub a_norm: f64,
    pub h_min: f64,
    pub h_max_abs: f64,
}

/// Boundary form at both mirror slices of every stored metric, evaluated on
/// the restricted half metric.
pub fn boundary_monitor(traj: &FlowTrajectory) -> Result<Vec<MonitorRow>> {
    let mut rows = Vec::new();
    for (k, g) in traj.stored.iter().zip(&traj.metrics) {
        let res = symmetry_residual(g)?;
        if res > MONITOR_TOL {
            return Err(Error::Asymmetric(res));
        }
        let half = restrict(g)?;
        let nh = half.grid().axes[0].resolution;
        let mut row = MonitorRow { t: traj.mesh.times[*k], a_norm: 0.0, h_min: f64::INFINITY, h_max_abs: 0.0 };
        for (slice, side) in [(0, Side::Plus), (nh - 1, Side::Minus)] {
            let bf = boundary_form(&half, 0, slice, side)?;
            row.a_norm = row.a_norm.max(bf.norm());
            row.h_min = row.h_min.min(bf.h_min());
            row.h_max_abs = bf.h.iter().fold(row.h_max_abs, |m, v| m.max(v.abs()));
        }
        rows.push(row);
    }
    Ok(rows)
}
