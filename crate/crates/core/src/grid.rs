//! Structured grids with periodic, reflecting and polar axes.
//!
//! Periodic and reflecting axes are vertex-centred. A reflecting axis has its
//! mirrors on the first and last node, so `h = L/(N-1)`. A polar axis is
//! cell-centred, `x_i = (i + 1/2) h` with `h = L/N`, and mirrors sit on the
//! two end faces. Off-grid values come from ghost cells whose sign is fixed by
//! the declared parity of the field.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Periodic,
    ReflectEven,
    ReflectOddCapable,
    Polar,
}

impl Topology {
    pub fn is_periodic(self) -> bool {
        matches!(self, Topology::Periodic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn from_odd(odd: bool) -> Parity {
        if odd {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn is_odd(self) -> bool {
        matches!(self, Parity::Odd)
    }

    /// Parity of a tensor component under reflection of axis 0: odd iff the
    /// index 0 occurs an odd number of times.
    pub fn of_component(indices: &[usize]) -> Parity {
        Parity::from_odd(indices.iter().filter(|&&i| i == 0).count() % 2 == 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdOrder {
    #[default]
    Second,
    Fourth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub topology: Topology,
    pub extent: f64,
    pub resolution: usize,
}

impl Axis {
    pub fn periodic(extent: f64, resolution: usize) -> Axis {
        Axis { topology: Topology::Periodic, extent, resolution }
    }

    pub fn reflect(extent: f64, resolution: usize) -> Axis {
        Axis { topology: Topology::ReflectOddCapable, extent, resolution }
    }

    pub fn polar(extent: f64, resolution: usize) -> Axis {
        Axis { topology: Topology::Polar, extent, resolution }
    }

    pub fn h(&self) -> f64 {
        match self.topology {
            Topology::Periodic | Topology::Polar => self.extent / self.resolution as f64,
            Topology::ReflectEven | Topology::ReflectOddCapable => {
                self.extent / (self.resolution - 1) as f64
            }
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match self.topology {
            Topology::Polar => (i as f64 + 0.5) * self.h(),
            _ => i as f64 * self.h(),
        }
    }

    /// Maps an unbounded index onto a stored node; the flag reports whether
    /// the map crossed an odd number of mirrors (so odd fields change sign).
    pub fn map_index(&self, k: i64) -> (usize, bool) {
        let n = self.resolution as i64;
        match self.topology {
            Topology::Periodic => (k.rem_euclid(n) as usize, false),
            Topology::ReflectEven | Topology::ReflectOddCapable => {
                let period = 2 * (n - 1);
                let m = k.rem_euclid(period);
                if m <= n - 1 {
                    (m as usize, false)
                } else {
                    ((period - m) as usize, true)
                }
            }
            Topology::Polar => {
                let period = 2 * n;
                let m = k.rem_euclid(period);
                if m < n {
                    (m as usize, false)
                } else {
                    ((period - 1 - m) as usize, true)
                }
            }
        }
    }

    /// Folds a coordinate into the fundamental domain; the flag reports an
    /// odd number of mirror crossings.
    pub fn fold(&self, x: f64) -> (f64, bool) {
        let l = self.extent;
        match self.topology {
            Topology::Periodic => (x.rem_euclid(l), false),
            _ => {
                let m = x.rem_euclid(2.0 * l);
                if m <= l {
                    (m, false)
                } else {
                    (2.0 * l - m, true)
                }
            }
        }
    }
}

/// Multi-index into a grid, row-major with axis 0 slowest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeIndex(pub Vec<usize>);

impl NodeIndex {
    pub fn linear(&self, grid: &GridSpec) -> usize {
        self.0.iter().zip(&grid.strides).map(|(i, s)| i * s).sum()
    }

    pub fn from_linear(grid: &GridSpec, mut lin: usize) -> NodeIndex {
        let mut idx = vec![0; grid.dim];
        for a in 0..grid.dim {
            idx[a] = lin / grid.strides[a];
            lin %= grid.strides[a];
        }
        NodeIndex(idx)
    }
}

/// Neighbour table along one axis for one offset.
#[derive(Debug)]
pub(crate) struct Nbr {
    pub idx: Vec<u32>,
    pub refl: Vec<bool>,
}

#[derive(Debug)]
pub(crate) struct Tables {
    /// `nbr[axis][k]` for offsets `[-2, -1, 1, 2]`.
    pub nbr: Vec<[Nbr; 4]>,
}

const OFFSETS: [i64; 4] = [-2, -1, 1, 2];

fn slot(off: i64) -> usize {
    match off {
        -2 => 0,
        -1 => 1,
        1 => 2,
        2 => 3,
        _ => unreachable!("stencil offset out of range"),
    }
}

#[derive(Debug)]
pub struct GridSpec {
    pub dim: usize,
    pub axes: Vec<Axis>,
    pub order: FdOrder,
    strides: Vec<usize>,
    tables: OnceLock<Tables>,
}

pub type Grid = Arc<GridSpec>;

impl Clone for GridSpec {
    fn clone(&self) -> Self {
        GridSpec::build(self.axes.clone(), self.order).expect("cloned grid was valid")
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes && self.order == other.order
    }
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Grid> {
        Ok(Arc::new(GridSpec::build(axes, FdOrder::Second)?))
    }

    pub fn with_order(axes: Vec<Axis>, order: FdOrder) -> Result<Grid> {
        Ok(Arc::new(GridSpec::build(axes, order)?))
    }

    /// Periodic box `[0, extent)^n` with `resolution` nodes per axis.
    pub fn torus(dim: usize, extent: f64, resolution: usize) -> Result<Grid> {
        GridSpec::new(vec![Axis::periodic(extent, resolution); dim])
    }

    fn build(axes: Vec<Axis>, order: FdOrder) -> Result<GridSpec> {
        let dim = axes.len();
        if dim == 0 {
            return Err(Error::Config("grid needs at least one axis".into()));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.resolution < 8 {
                return Err(Error::Config(format!(
                    "axis {a} has {} nodes, need at least 8",
                    ax.resolution
                )));
            }
            if !(ax.extent > 0.0) || !ax.extent.is_finite() {
                return Err(Error::Config(format!("axis {a} extent must be positive")));
            }
            if a > 0 && !ax.topology.is_periodic() {
                return Err(Error::Config(format!(
                    "only axis 0 may be non-periodic (axis {a} is {:?})",
                    ax.topology
                )));
            }
        }
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].resolution;
        }
        Ok(GridSpec { dim, axes, order, strides, tables: OnceLock::new() })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.resolution).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.resolution).collect()
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.axes[axis].h()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn axis_index(&self, lin: usize, axis: usize) -> usize {
        (lin / self.strides[axis]) % self.axes[axis].resolution
    }

    pub fn coord(&self, lin: usize, axis: usize) -> f64 {
        self.axes[axis].coord(self.axis_index(lin, axis))
    }

    pub fn point(&self, lin: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coord(lin, a)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        (0..self.len())
            .map(|i| {
                for (a, pa) in p.iter_mut().enumerate() {
                    *pa = self.coord(i, a);
                }
                f(&p)
            })
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    pub(crate) fn tables(&self) -> &Tables {
        self.tables.get_or_init(|| {
            let nbr = (0..self.dim)
                .map(|a| {
                    OFFSETS.map(|off| {
                        let mut idx = Vec::with_capacity(self.len());
                        let mut refl = Vec::with_capacity(self.len());
                        for lin in 0..self.len() {
                            let i = self.axis_index(lin, a) as i64;
                            let (j, r) = self.axes[a].map_index(i + off);
                            let base = lin - (i as usize) * self.strides[a];
                            idx.push((base + j * self.strides[a]) as u32);
                            refl.push(r);
                        }
                        Nbr { idx, refl }
                    })
                })
                .collect();
            Tables { nbr }
        })
    }

    /// Resolves the parity to use on a field. Periodic axes ignore parity;
    /// reflecting-even axes default to even; odd-capable and polar axes need
    /// an explicit declaration.
    pub fn resolve_parity(&self, axis: usize, parity: Option<Parity>) -> Result<Parity> {
        match (self.axes[axis].topology, parity) {
            (Topology::Periodic, p) => Ok(p.unwrap_or(Parity::Even)),
            (Topology::ReflectEven, None) | (Topology::ReflectEven, Some(Parity::Even)) => {
                Ok(Parity::Even)
            }
            (Topology::ReflectEven, Some(Parity::Odd)) => Err(Error::Config(
                "odd parity requested on a reflect_even axis".into(),
            )),
            (_, Some(p)) => Ok(p),
            (_, None) => Err(Error::ParityUndeclared { axis }),
        }
    }

    #[inline(always)]
    pub(crate) fn nb(&self, f: &[f64], lin: usize, axis: usize, off: i64, odd: bool) -> f64 {
        let t = &self.tables().nbr[axis][slot(off)];
        let v = f[t.idx[lin] as usize];
        if odd && t.refl[lin] {
            -v
        } else {
            v
        }
    }

    /// Value at the diagonal neighbour `(+-1 along a, +-1 along b)`.
    #[inline(always)]
    pub(crate) fn nb2(&self, f: &[f64], lin: usize, a: usize, oa: i64, b: usize, ob: i64, odd: bool) -> f64 {
        let tabs = self.tables();
        let ta = &tabs.nbr[a][slot(oa)];
        let mid = ta.idx[lin] as usize;
        let tb = &tabs.nbr[b][slot(ob)];
        let v = f[tb.idx[mid] as usize];
        let flips = ta.refl[lin] ^ tb.refl[mid];
        if odd && flips {
            -v
        } else {
            v
        }
    }

    pub fn diff1(&self, f: &[f64], axis: usize, parity: Option<Parity>) -> Result<Vec<f64>> {
        let p = self.resolve_parity(axis, parity)?;
        Ok(self.d1(f, axis, p))
    }

    pub fn diff2(&self, f: &[f64], a: usize, b: usize, parity: Option<Parity>) -> Result<Vec<f64>> {
        let p = self.resolve_parity(a, parity)?;
        let p = if self.axes[b].topology.is_periodic() { p } else { self.resolve_parity(b, parity)? };
        Ok(self.d2(f, a, b, p))
    }

    /// First derivative with resolved parity.
    pub fn d1(&self, f: &[f64], axis: usize, parity: Parity) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "field length does not match grid");
        let odd = parity.is_odd();
        let h = self.h(axis);
        match self.order {
            FdOrder::Second => {
                let c = 1.0 / (2.0 * h);
                (0..f.len())
                    .map(|i| (self.nb(f, i, axis, 1, odd) - self.nb(f, i, axis, -1, odd)) * c)
                    .collect()
            }
            FdOrder::Fourth => {
                let c = 1.0 / (12.0 * h);
                (0..f.len())
                    .map(|i| {
                        let d1 = self.nb(f, i, axis, 1, odd) - self.nb(f, i, axis, -1, odd);
                        let d2 = self.nb(f, i, axis, 2, odd) - self.nb(f, i, axis, -2, odd);
                        (8.0 * d1 - d2) * c
                    })
                    .collect()
            }
        }
    }

    /// Second derivative `d^2/dx_a dx_b` with resolved parity.
    pub fn d2(&self, f: &[f64], a: usize, b: usize, parity: Parity) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "field length does not match grid");
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let odd = parity.is_odd();
        if a == b {
            let h = self.h(a);
            match self.order {
                FdOrder::Second => {
                    let c = 1.0 / (h * h);
                    (0..f.len())
                        .map(|i| {
                            ((self.nb(f, i, a, 1, odd) + self.nb(f, i, a, -1, odd)) - 2.0 * f[i]) * c
                        })
                        .collect()
                }
                FdOrder::Fourth => {
                    let c = 1.0 / (12.0 * h * h);
                    (0..f.len())
                        .map(|i| {
                            let s1 = self.nb(f, i, a, 1, odd) + self.nb(f, i, a, -1, odd);
                            let s2 = self.nb(f, i, a, 2, odd) + self.nb(f, i, a, -2, odd);
                            (16.0 * s1 - s2 - 30.0 * f[i]) * c
                        })
                        .collect()
                }
            }
        } else {
            match self.order {
                FdOrder::Second => {
                    let c = 1.0 / (4.0 * self.h(a) * self.h(b));
                    (0..f.len()).map(|i| self.mixed2(f, i, a, b, odd) * c).collect()
                }
                FdOrder::Fourth => {
                    // a and b differ, and at most one of them reflects, so the
                    // intermediate derivative carries the flipped parity only
                    // when it is taken along axis 0
                    let pb = if b == 0 { parity.flip() } else { parity };
                    let db = self.d1(f, b, parity);
                    self.d1(&db, a, pb)
                }
            }
        }
    }

    #[inline(always)]
    pub(crate) fn mixed2(&self, f: &[f64], i: usize, a: usize, b: usize, odd: bool) -> f64 {
        let pp = self.nb2(f, i, a, 1, b, 1, odd);
        let pm = self.nb2(f, i, a, 1, b, -1, odd);
        let mp = self.nb2(f, i, a, -1, b, 1, odd);
        let mm = self.nb2(f, i, a, -1, b, -1, odd);
        (pp - pm) - (mp - mm)
    }

    /// Tensor-product cubic Lagrange interpolation at a continuous point.
    pub fn interpolate(&self, f: &[f64], point: &[f64], parity: Parity) -> f64 {
        assert_eq!(point.len(), self.dim);
        let mut base = [0i64; 8];
        let mut w = [[0.0f64; 4]; 8];
        let mut sign = 1.0;
        for a in 0..self.dim {
            let ax = &self.axes[a];
            let (x, flipped) = ax.fold(point[a]);
            if flipped && parity.is_odd() {
                sign = -sign;
            }
            let u = match ax.topology {
                Topology::Polar => x / ax.h() - 0.5,
                _ => x / ax.h(),
            };
            let i0 = u.floor();
            let s = u - i0;
            base[a] = i0 as i64 - 1;
            w[a] = cubic_weights(s);
        }
        let odd = parity.is_odd();
        let mut acc = 0.0;
        let mut counter = [0usize; 8];
        let total = 4usize.pow(self.dim as u32);
        for _ in 0..total {
            let mut lin = 0;
            let mut wt = 1.0;
            let mut refl = false;
            for a in 0..self.dim {
                let (j, r) = self.axes[a].map_index(base[a] + counter[a] as i64);
                lin += j * self.strides[a];
                wt *= w[a][counter[a]];
                refl ^= r;
            }
            let v = if odd && refl { -f[lin] } else { f[lin] };
            acc += wt * v;
            for c in counter.iter_mut().take(self.dim) {
                *c += 1;
                if *c < 4 {
                    break;
                }
                *c = 0;
            }
        }
        sign * acc
    }
}

/// Lagrange weights for nodes at -1, 0, 1, 2 evaluated at `s` in [0, 1).
fn cubic_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn map_index_reflect() {
        let ax = Axis::reflect(1.0, 8);
        assert_eq!(ax.map_index(-1), (1, true));
        assert_eq!(ax.map_index(0), (0, false));
        assert_eq!(ax.map_index(7), (7, false));
        assert_eq!(ax.map_index(8), (6, true));
        assert_eq!(ax.map_index(-2), (2, true));
    }

    #[test]
    fn map_index_polar() {
        let ax = Axis::polar(PI, 8);
        assert_eq!(ax.map_index(-1), (0, true));
        assert_eq!(ax.map_index(-2), (1, true));
        assert_eq!(ax.map_index(8), (7, true));
        assert_eq!(ax.map_index(3), (3, false));
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = GridSpec::torus(2, 1.0, 16).unwrap();
        let f = vec![3.5; g.len()];
        assert!(g.d1(&f, 0, Parity::Even).iter().all(|&v| v == 0.0));
        assert!(g.d2(&f, 0, 1, Parity::Even).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sin_derivative_periodic() {
        let n = 64;
        let g = GridSpec::new(vec![Axis::periodic(2.0 * PI, n)]).unwrap();
        let f = g.sample(|p| p[0].sin());
        let d = g.d1(&f, 0, Parity::Even);
        let err = (0..n).map(|i| (d[i] - g.coord(i, 0).cos()).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn even_extension_zero_at_mirror() {
        let g = GridSpec::new(vec![Axis::reflect(1.0, 16), Axis::periodic(1.0, 8)]).unwrap();
        let f = g.sample(|p| p[0]);
        let d = g.diff1(&f, 0, Some(Parity::Even)).unwrap();
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn undeclared_parity_is_error() {
        let g = GridSpec::new(vec![Axis::reflect(1.0, 16), Axis::periodic(1.0, 8)]).unwrap();
        let f = vec![0.0; g.len()];
        assert!(matches!(g.diff1(&f, 0, None), Err(Error::ParityUndeclared { .. })));
        assert!(g.diff1(&f, 1, None).is_ok());
    }

    #[test]
    fn only_axis_zero_may_reflect() {
        assert!(GridSpec::new(vec![Axis::periodic(1.0, 8), Axis::reflect(1.0, 8)]).is_err());
        assert!(GridSpec::new(vec![Axis::periodic(1.0, 4)]).is_err());
    }

    #[test]
    fn interpolation_exact_at_nodes() {
        let g = GridSpec::torus(2, 1.0, 12).unwrap();
        let f = g.sample(|p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos() + p[0]);
        for lin in [0, 5, 37, 100] {
            let v = g.interpolate(&f, &g.point(lin), Parity::Even);
            assert!((v - f[lin]).abs() < 1e-14);
        }
    }
}
