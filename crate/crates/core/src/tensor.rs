//! Tensor fields on a grid, metrics with cached inverses and frames, the
//! background connection, and parity-respecting heat smoothing.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity};

/// Packed index of the symmetric pair `(i, j)`, upper triangle row by row.
#[inline(always)]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

/// General tensor field of type `(upper, lower)`, all `n^(p+q)` components
/// stored, upper indices first.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub grid: Grid,
    pub upper: usize,
    pub lower: usize,
    pub comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: &Grid, upper: usize, lower: usize) -> TensorField {
        let n = grid.dim;
        let count = n.pow((upper + lower) as u32);
        TensorField { grid: grid.clone(), upper, lower, comps: vec![vec![0.0; grid.len()]; count] }
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let n = self.grid.dim;
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn unindex(&self, mut c: usize) -> Vec<usize> {
        let n = self.grid.dim;
        let mut idx = vec![0; self.rank()];
        for slot in idx.iter_mut().rev() {
            *slot = c % n;
            c /= n;
        }
        idx
    }

    pub fn comp(&self, idx: &[usize]) -> &[f64] {
        &self.comps[self.index(idx)]
    }

    pub fn comp_mut(&mut self, idx: &[usize]) -> &mut Vec<f64> {
        let c = self.index(idx);
        &mut self.comps[c]
    }

    pub fn parity(&self, c: usize) -> Parity {
        Parity::of_component(&self.unindex(c))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Symmetric covariant 2-tensor field stored as packed components.
#[derive(Clone, Debug)]
pub struct SymField {
    pub grid: Grid,
    pub comps: Vec<Vec<f64>>,
}

impl SymField {
    pub fn zeros(grid: &Grid) -> SymField {
        SymField { grid: grid.clone(), comps: vec![vec![0.0; grid.len()]; sym_len(grid.dim)] }
    }

    pub fn constant(grid: &Grid, m: &[Vec<f64>]) -> SymField {
        let n = grid.dim;
        let mut s = SymField::zeros(grid);
        for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
            s.comps[c].iter_mut().for_each(|v| *v = m[i][j]);
        }
        s
    }

    pub fn identity(grid: &Grid) -> SymField {
        let n = grid.dim;
        let m: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        SymField::constant(grid, &m)
    }

    /// Builds the field from a pointwise matrix function of the coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64], usize, usize) -> f64) -> SymField {
        let mut s = SymField::zeros(grid);
        for (c, (i, j)) in sym_pairs(grid.dim).into_iter().enumerate() {
            s.comps[c] = grid.sample(|p| f(p, i, j));
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.dim(), i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        let c = sym_index(self.dim(), i, j);
        &mut self.comps[c]
    }

    pub fn parity(&self, c: usize) -> Parity {
        let (i, j) = sym_pairs(self.dim())[c];
        Parity::of_component(&[i, j])
    }

    pub fn at(&self, node: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)[node]).collect()).collect()
    }

    pub fn zip_map(&self, other: &SymField, f: impl Fn(f64, f64) -> f64) -> SymField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        SymField { grid: self.grid.clone(), comps }
    }

    pub fn sub(&self, other: &SymField) -> SymField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &SymField) -> SymField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> SymField {
        SymField {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_tensor(&self) -> TensorField {
        let n = self.dim();
        let mut t = TensorField::zeros(&self.grid, 0, 2);
        for i in 0..n {
            for j in 0..n {
                *t.comp_mut(&[i, j]) = self.get(i, j).to_vec();
            }
        }
        t
    }
}

/// Pointwise inverse and positivity of a small symmetric matrix given by its
/// packed components; `None` when not positive definite.
pub fn sym_inverse(n: usize, m: &[f64], out: &mut [f64]) -> bool {
    match n {
        1 => {
            if !(m[0] > 0.0) {
                return false;
            }
            out[0] = 1.0 / m[0];
            true
        }
        2 => {
            let (a, b, d) = (m[0], m[1], m[2]);
            let det = a * d - b * b;
            if !(a > 0.0 && det > 0.0) {
                return false;
            }
            out[0] = d / det;
            out[1] = -b / det;
            out[2] = a / det;
            true
        }
        3 => {
            let (a, b, c, d, e, f) = (m[0], m[1], m[2], m[3], m[4], m[5]);
            // [[a b c] [b d e] [c e f]]
            let m2 = a * d - b * b;
            let c00 = d * f - e * e;
            let c01 = c * e - b * f;
            let c02 = b * e - c * d;
            let det = a * c00 + b * c01 + c * c02;
            if !(a > 0.0 && m2 > 0.0 && det > 0.0) {
                return false;
            }
            out[0] = c00 / det;
            out[1] = c01 / det;
            out[2] = c02 / det;
            out[3] = (a * f - c * c) / det;
            out[4] = (b * c - a * e) / det;
            out[5] = m2 / det;
            true
        }
        _ => {
            let full = unpack(n, m);
            let Some(l) = cholesky(n, &full) else { return false };
            // inverse = L^{-T} L^{-1}
            let linv = lower_inverse(n, &l);
            for i in 0..n {
                for j in i..n {
                    let s: f64 = (j..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
                    out[sym_index(n, i, j)] = s;
                }
            }
            true
        }
    }
}

fn unpack(n: usize, m: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            full[i * n + j] = m[sym_index(n, i, j)];
        }
    }
    full
}

/// Dense Cholesky `A = L L^T`, row-major lower factor.
pub fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn lower_inverse(n: usize, l: &[f64]) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        inv[j * n + j] = 1.0 / l[j * n + j];
        for i in j + 1..n {
            let s: f64 = (j..i).map(|k| l[i * n + k] * inv[k * n + j]).sum();
            inv[i * n + j] = -s / l[i * n + i];
        }
    }
    inv
}

/// Riemannian metric on a grid: symmetric, positive definite at every node,
/// with the inverse computed eagerly and Cholesky frames on demand. The type
/// is immutable, so cached frames can never go stale.
#[derive(Debug)]
pub struct MetricField {
    g: SymField,
    inv: SymField,
    chol: OnceLock<Vec<f64>>,
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        MetricField { g: self.g.clone(), inv: self.inv.clone(), chol: OnceLock::new() }
    }
}

impl MetricField {
    pub fn new(g: SymField) -> Result<MetricField> {
        MetricField::new_at(g, f64::NAN)
    }

    /// As [`MetricField::new`], labelling a positivity failure with a time.
    pub fn new_at(g: SymField, time: f64) -> Result<MetricField> {
        let n = g.dim();
        let len = g.grid.len();
        let k = sym_len(n);
        let mut inv = SymField::zeros(&g.grid);
        let mut m = vec![0.0; k];
        let mut o = vec![0.0; k];
        for node in 0..len {
            for c in 0..k {
                m[c] = g.comps[c][node];
            }
            if !sym_inverse(n, &m, &mut o) || o.iter().any(|v| !v.is_finite()) {
                return Err(Error::Positivity { node, time });
            }
            for c in 0..k {
                inv.comps[c][node] = o[c];
            }
        }
        Ok(MetricField { g, inv, chol: OnceLock::new() })
    }

    pub fn identity(grid: &Grid) -> MetricField {
        MetricField::new(SymField::identity(grid)).expect("identity is positive definite")
    }

    pub fn grid(&self) -> &Grid {
        &self.g.grid
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn sym(&self) -> &SymField {
        &self.g
    }

    pub fn into_sym(self) -> SymField {
        self.g
    }

    pub fn inverse(&self) -> &SymField {
        &self.inv
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        self.g.get(i, j)
    }

    pub fn inv(&self, i: usize, j: usize) -> &[f64] {
        self.inv.get(i, j)
    }

    fn chol_all(&self) -> &[f64] {
        self.chol.get_or_init(|| {
            let n = self.dim();
            let mut out = Vec::with_capacity(self.grid().len() * n * n);
            let mut m = vec![0.0; sym_len(n)];
            for node in 0..self.grid().len() {
                for (c, v) in m.iter_mut().enumerate() {
                    *v = self.g.comps[c][node];
                }
                let l = cholesky(n, &unpack(n, &m)).expect("metric validated at construction");
                out.extend(l);
            }
            out
        })
    }

    /// Lower Cholesky factor at a node, row-major `n x n`.
    pub fn cholesky_at(&self, node: usize) -> &[f64] {
        let n = self.dim();
        &self.chol_all()[node * n * n..(node + 1) * n * n]
    }

    /// Orthonormal frame at a node: column `j` is `e_j`, with `F^T g F = I`.
    pub fn frame(&self, node: usize) -> Vec<f64> {
        let n = self.dim();
        let linv = lower_inverse(n, self.cholesky_at(node));
        // F = L^{-T}
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                f[i * n + j] = linv[j * n + i];
            }
        }
        f
    }

    /// Componentwise sup distance to another metric.
    pub fn max_abs_diff(&self, other: &MetricField) -> f64 {
        self.g.max_abs_diff(&other.g)
    }
}

/// Fixed background metric supplying the connection used for all hatted
/// derivatives.
#[derive(Clone, Debug)]
pub enum BackgroundMetric {
    /// Flat torus chart: vanishing Christoffels and curvature.
    Flat,
    /// Round unit sphere in polar coordinates `dx^2 + sin^2 x dtheta^2`
    /// (two-dimensional chart, axis 0 polar).
    RoundPolar { ghat: MetricField, gamma: TensorField, riem: TensorField },
}

impl BackgroundMetric {
    pub fn round_polar(grid: &Grid) -> Result<BackgroundMetric> {
        if grid.dim != 2 || grid.axes[0].topology != crate::grid::Topology::Polar {
            return Err(Error::UnsupportedMode("round background needs a 2D polar chart"));
        }
        let ghat = MetricField::new(SymField::from_fn(grid, |p, i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => p[0].sin().powi(2),
            _ => 0.0,
        }))?;
        let mut gamma = TensorField::zeros(grid, 1, 2);
        *gamma.comp_mut(&[0, 1, 1]) = grid.sample(|p| -p[0].sin() * p[0].cos());
        let cot = grid.sample(|p| p[0].cos() / p[0].sin());
        *gamma.comp_mut(&[1, 0, 1]) = cot.clone();
        *gamma.comp_mut(&[1, 1, 0]) = cot;
        let riem = constant_curvature_tensor(&ghat, 1.0);
        Ok(BackgroundMetric::RoundPolar { ghat, gamma, riem })
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, BackgroundMetric::Flat)
    }

    pub fn gamma(&self) -> Option<&TensorField> {
        match self {
            BackgroundMetric::Flat => None,
            BackgroundMetric::RoundPolar { gamma, .. } => Some(gamma),
        }
    }

    pub fn riemann(&self) -> Option<&TensorField> {
        match self {
            BackgroundMetric::Flat => None,
            BackgroundMetric::RoundPolar { riem, .. } => Some(riem),
        }
    }

    pub fn metric(&self) -> Option<&MetricField> {
        match self {
            BackgroundMetric::Flat => None,
            BackgroundMetric::RoundPolar { ghat, .. } => Some(ghat),
        }
    }
}

/// `R_ijkl = kappa (g_ik g_jl - g_il g_jk)`.
pub fn constant_curvature_tensor(g: &MetricField, kappa: f64) -> TensorField {
    let n = g.dim();
    let mut r = TensorField::zeros(g.grid(), 0, 4);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c = r.index(&[i, j, k, l]);
                    let (gik, gjl, gil, gjk) = (g.get(i, k), g.get(j, l), g.get(i, l), g.get(j, k));
                    r.comps[c] =
                        (0..g.grid().len()).map(|x| kappa * (gik[x] * gjl[x] - gil[x] * gjk[x])).collect();
                }
            }
        }
    }
    r
}

/// Coordinate first derivatives `d[k][c] = d_k (field)_c` of a packed field.
pub fn sym_derivs(field: &SymField) -> Vec<Vec<Vec<f64>>> {
    let grid = &field.grid;
    (0..grid.dim)
        .map(|k| {
            field
                .comps
                .iter()
                .enumerate()
                .map(|(c, f)| grid.d1(f, k, field.parity(c)))
                .collect()
        })
        .collect()
}

/// Christoffel symbols `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`.
pub fn christoffel(g: &MetricField) -> TensorField {
    let dg = sym_derivs(g.sym());
    christoffel_from(g, &dg)
}

pub(crate) fn christoffel_from(g: &MetricField, dg: &[Vec<Vec<f64>>]) -> TensorField {
    let n = g.dim();
    let grid = g.grid();
    let len = grid.len();
    let mut out = TensorField::zeros(grid, 1, 2);
    // first kind: [ij, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    for i in 0..n {
        for j in i..n {
            let mut first = vec![vec![0.0; len]; n];
            for (l, fl) in first.iter_mut().enumerate() {
                let a = &dg[i][sym_index(n, j, l)];
                let b = &dg[j][sym_index(n, i, l)];
                let c = &dg[l][sym_index(n, i, j)];
                for x in 0..len {
                    fl[x] = 0.5 * ((a[x] + b[x]) - c[x]);
                }
            }
            for k in 0..n {
                let mut v = vec![0.0; len];
                for (l, fl) in first.iter().enumerate() {
                    let gi = g.inv(k, l);
                    for x in 0..len {
                        v[x] += gi[x] * fl[x];
                    }
                }
                *out.comp_mut(&[k, j, i]) = v.clone();
                *out.comp_mut(&[k, i, j]) = v;
            }
        }
    }
    out
}

/// Background covariant derivative `(hat nabla)_k eta_ij`, as a `(0,3)` field
/// with the derivative slot first.
pub fn hat_gradient(eta: &SymField, bg: &BackgroundMetric) -> TensorField {
    let n = eta.dim();
    let grid = &eta.grid;
    let len = grid.len();
    let d = sym_derivs(eta);
    let mut out = TensorField::zeros(grid, 0, 3);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = d[k][sym_index(n, i, j)].clone();
                if let Some(gam) = bg.gamma() {
                    for p in 0..n {
                        let a = gam.comp(&[p, k, i]);
                        let b = gam.comp(&[p, k, j]);
                        let epj = eta.get(p, j);
                        let eip = eta.get(i, p);
                        for x in 0..len {
                            v[x] -= a[x] * epj[x] + b[x] * eip[x];
                        }
                    }
                }
                *out.comp_mut(&[k, i, j]) = v;
            }
        }
    }
    out
}

/// Background Hessian `(hat nabla^2)_{kl} eta_ij` as a `(0,4)` field with the
/// two derivative slots first. In flat mode this is componentwise `diff2`.
pub fn hat_hessian(eta: &SymField, bg: &BackgroundMetric) -> TensorField {
    let n = eta.dim();
    let grid = &eta.grid;
    let len = grid.len();
    let mut out = TensorField::zeros(grid, 0, 4);
    let d2: Vec<Vec<Vec<f64>>> = (0..n)
        .flat_map(|k| (0..n).map(move |l| (k, l)))
        .map(|(k, l)| {
            eta.comps.iter().enumerate().map(|(c, f)| grid.d2(f, k, l, eta.parity(c))).collect()
        })
        .collect();
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    *out.comp_mut(&[k, l, i, j]) = d2[k * n + l][sym_index(n, i, j)].clone();
                }
            }
        }
    }
    let Some(gam) = bg.gamma() else { return out };
    // correction: -d_k(Gamma^p_li eta_pj + Gamma^p_lj eta_ip)
    //             -Gamma^p_kl D_p eta_ij - Gamma^p_ki D_l eta_pj - Gamma^p_kj D_l eta_ip
    let grad = hat_gradient(eta, bg);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut prod = vec![0.0; len];
                for p in 0..n {
                    let a = gam.comp(&[p, l, i]);
                    let b = gam.comp(&[p, l, j]);
                    let epj = eta.get(p, j);
                    let eip = eta.get(i, p);
                    for x in 0..len {
                        prod[x] += a[x] * epj[x] + b[x] * eip[x];
                    }
                }
                let par = Parity::of_component(&[l, i, j]);
                for k in 0..n {
                    let dp = grid.d1(&prod, k, par);
                    let c = out.index(&[k, l, i, j]);
                    for x in 0..len {
                        out.comps[c][x] -= dp[x];
                    }
                    for p in 0..n {
                        let g1 = gam.comp(&[p, k, l]);
                        let g2 = gam.comp(&[p, k, i]);
                        let g3 = gam.comp(&[p, k, j]);
                        let e1 = grad.comp(&[p, i, j]);
                        let e2 = grad.comp(&[l, p, j]);
                        let e3 = grad.comp(&[l, i, p]);
                        let o = &mut out.comps[c];
                        for x in 0..len {
                            o[x] -= g1[x] * e1[x] + g2[x] * e2[x] + g3[x] * e3[x];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Discrete heat smoothing of a scalar field to Gaussian width `eps`, with
/// ghost values set by `parity`.
pub fn heat_smooth(grid: &Grid, f: &[f64], parity: Parity, eps: f64) -> Vec<f64> {
    let hmin = (0..grid.dim).map(|a| grid.h(a)).fold(f64::INFINITY, f64::min);
    let tau = 0.5 * eps * eps;
    let dt_max = 0.2 * hmin * hmin / grid.dim as f64;
    let steps = (tau / dt_max).ceil().max(1.0) as usize;
    let dt = tau / steps as f64;
    let mut u = f.to_vec();
    let mut lap = vec![0.0; u.len()];
    for _ in 0..steps {
        lap.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..grid.dim {
            let d = grid.d2(&u, a, a, parity);
            for (l, v) in lap.iter_mut().zip(d) {
                *l += v;
            }
        }
        for (x, l) in u.iter_mut().zip(&lap) {
            *x += dt * l;
        }
    }
    u
}

/// Componentwise heat smoothing of a metric at scale `eps` (at least one grid
/// spacing). Parities are kept, so reflection-symmetric input stays symmetric.
pub fn mollify(g: &MetricField, eps: f64) -> Result<MetricField> {
    let grid = g.grid();
    let hmin = (0..grid.dim).map(|a| grid.h(a)).fold(f64::INFINITY, f64::min);
    if eps < hmin * (1.0 - 1e-12) {
        return Err(Error::Config(format!("mollification scale {eps} below grid spacing {hmin}")));
    }
    let s = g.sym();
    let comps =
        s.comps.iter().enumerate().map(|(c, f)| heat_smooth(grid, f, s.parity(c), eps)).collect();
    MetricField::new(SymField { grid: grid.clone(), comps })
}
