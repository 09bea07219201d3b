//! Riemann, Ricci and scalar curvature, the curvature operator in orthonormal
//! frames, cone margins, and the second fundamental form of mirror slices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jets::{Local, MetricJets};
use crate::pic::{self, AlgebraicCurvature, PicVariant};
use crate::tensor::{sym_index, MetricField, SymField, TensorField};

/// Tolerance for the convexity classifications of a boundary form.
pub const CLASSIFY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub riem: TensorField,
    pub ricci: SymField,
    pub scalar: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ConeMargins {
    pub min_curv_op_eig: f64,
    pub pic: Option<f64>,
    pub pic1: Option<f64>,
    pub pic2: Option<f64>,
    pub min_scalar: f64,
}

/// Full curvature tensors of `g`.
pub fn riemann(g: &MetricField) -> CurvatureBundle {
    let n = g.dim();
    let grid = g.grid();
    let jets = MetricJets::new(g, true);
    let mut loc = Local::new(n);
    let mut r = vec![0.0; n.pow(4)];
    let mut riem = TensorField::zeros(grid, 0, 4);
    let mut ricci = SymField::zeros(grid);
    let mut scalar = vec![0.0; grid.len()];
    for node in 0..grid.len() {
        jets.fill(node, &mut loc);
        loc.riemann(&mut r);
        for (c, v) in r.iter().enumerate() {
            riem.comps[c][node] = *v;
        }
        let (ric, s) = contract(&loc, &r);
        for j in 0..n {
            for l in j..n {
                ricci.comps[sym_index(n, j, l)][node] = ric[j * n + l];
            }
        }
        scalar[node] = s;
    }
    CurvatureBundle { riem, ricci, scalar }
}

/// Ricci tensor only, without storing the Riemann tensor.
pub fn ricci(g: &MetricField) -> SymField {
    let n = g.dim();
    let grid = g.grid();
    let jets = MetricJets::new(g, true);
    let mut loc = Local::new(n);
    let mut r = vec![0.0; n.pow(4)];
    let mut ricci = SymField::zeros(grid);
    for node in 0..grid.len() {
        jets.fill(node, &mut loc);
        loc.riemann(&mut r);
        let (ric, _) = contract(&loc, &r);
        for j in 0..n {
            for l in j..n {
                ricci.comps[sym_index(n, j, l)][node] = ric[j * n + l];
            }
        }
    }
    ricci
}

/// `Ric_jl = g^ik R_ijkl` (symmetrised) and `R = g^jl Ric_jl`.
fn contract(loc: &Local, r: &[f64]) -> (Vec<f64>, f64) {
    let n = loc.n;
    let mut ric = vec![0.0; n * n];
    for j in 0..n {
        for l in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += loc.gi[i * n + k] * r[loc.i4(i, j, k, l)];
                }
            }
            ric[j * n + l] = s;
        }
    }
    for j in 0..n {
        for l in j + 1..n {
            let m = 0.5 * (ric[j * n + l] + ric[l * n + j]);
            ric[j * n + l] = m;
            ric[l * n + j] = m;
        }
    }
    let mut s = 0.0;
    for j in 0..n {
        for l in 0..n {
            s += loc.gi[j * n + l] * ric[j * n + l];
        }
    }
    (ric, s)
}

/// Riemann tensor at a node expressed in the Cholesky orthonormal frame.
pub fn frame_tensor(bundle: &CurvatureBundle, g: &MetricField, node: usize) -> AlgebraicCurvature {
    let n = g.dim();
    let f = g.frame(node);
    let mut r = vec![0.0; n.pow(4)];
    for (c, v) in r.iter_mut().enumerate() {
        *v = bundle.riem.comps[c][node];
    }
    AlgebraicCurvature::new(n, r).change_basis(&f)
}

/// Curvature operator matrix on the pair basis `e_i ^ e_j`, `i < j`, without
/// normalisation, so constant curvature `k` gives `k * I`.
pub fn operator_matrix(r: &AlgebraicCurvature) -> DMatrix<f64> {
    let pairs = pair_basis(r.n);
    let m = pairs.len();
    DMatrix::from_fn(m, m, |p, q| {
        let (i, j) = pairs[p];
        let (k, l) = pairs[q];
        0.5 * (r.get(i, j, k, l) + r.get(k, l, i, j))
    })
}

pub fn pair_basis(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug)]
pub struct CurvatureOperator {
    pub matrices: Vec<DMatrix<f64>>,
    pub min_eig: Vec<f64>,
    pub global_min: f64,
}

pub fn curvature_operator(bundle: &CurvatureBundle, g: &MetricField) -> CurvatureOperator {
    let mut matrices = Vec::with_capacity(g.grid().len());
    let mut min_eig = Vec::with_capacity(g.grid().len());
    for node in 0..g.grid().len() {
        let m = operator_matrix(&frame_tensor(bundle, g, node));
        min_eig.push(min_eigenvalue(&m));
        matrices.push(m);
    }
    let global_min = min_eig.iter().cloned().fold(f64::INFINITY, f64::min);
    CurvatureOperator { matrices, min_eig, global_min }
}

#[derive(Clone, Debug)]
pub struct PicReport {
    pub value: f64,
    pub node: usize,
    pub frame: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

/// Global minimum over nodes of a PIC-family margin.
pub fn pic_margin(bundle: &CurvatureBundle, g: &MetricField, variant: PicVariant, seed: u64) -> Result<PicReport> {
    let n = g.dim();
    if n < 4 {
        return Err(Error::UnsupportedDimension { dim: n, what: "PIC-family margins" });
    }
    let mut best: Option<PicReport> = None;
    for node in 0..g.grid().len() {
        let r = frame_tensor(bundle, g, node);
        let res = pic::margins(&r, seed);
        let m = res.get(variant);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(PicReport { value: m.value, node, frame: m.frame.clone(), lambda: m.lambda, mu: m.mu });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Every cone margin of a metric; PIC-family entries only for `n >= 4`.
pub fn cone_margins(bundle: &CurvatureBundle, g: &MetricField, seed: u64) -> ConeMargins {
    let n = g.dim();
    let mut out = ConeMargins {
        min_curv_op_eig: f64::INFINITY,
        min_scalar: bundle.scalar.iter().cloned().fold(f64::INFINITY, f64::min),
        ..Default::default()
    };
    let (mut p, mut p1, mut p2) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for node in 0..g.grid().len() {
        let r = frame_tensor(bundle, g, node);
        out.min_curv_op_eig = out.min_curv_op_eig.min(min_eigenvalue(&operator_matrix(&r)));
        if n >= 4 {
            let m = pic::margins(&r, seed);
            p = p.min(m.pic.value);
            p1 = p1.min(m.pic1.value);
            p2 = p2.min(m.pic2.value);
        }
    }
    if n >= 4 {
        out.pic = Some(p);
        out.pic1 = Some(p1);
        out.pic2 = Some(p2);
    }
    out
}

/// Which side of a mirror slice the half-manifold occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// The half lies at larger axis-0 coordinates.
    Plus,
    /// The half lies at smaller axis-0 coordinates.
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Second fundamental form of a slice, per node along the slice.
#[derive(Clone, Debug)]
pub struct BoundaryForm {
    /// `a[node][(a,b)]`, tangential indices from 1, packed over `n - 1`.
    pub a: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    /// Eigenvalues of `A` relative to the induced metric, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
}

impl BoundaryForm {
    pub fn norm(&self) -> f64 {
        // |A| = sup of |eigenvalue|, the operator norm relative to the induced metric
        self.eigenvalues.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
    pub fn h_min(&self) -> f64 {
        self.h.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn min_eig(&self) -> f64 {
        self.eigenvalues.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn is_convex(&self) -> bool {
        self.min_eig() >= -CLASSIFY_TOL
    }
    pub fn is_two_convex(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.iter().take(2).sum::<f64>() >= -CLASSIFY_TOL)
    }
    pub fn is_mean_convex(&self) -> bool {
        self.h_min() >= -CLASSIFY_TOL
    }
}

/// Builds a boundary form from per-node `(g_tan, Gamma^0_ab / sqrt(g^00))`
/// data, with `A_ab = s Gamma^0_ab / sqrt(g^00)` for the inward normal.
pub fn boundary_form_from(tangential: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)], side: Side) -> BoundaryForm {
    let mut a_all = Vec::new();
    let mut hs = Vec::new();
    let mut eigs = Vec::new();
    for (gt, gam0) in tangential {
        let m = gt.len();
        let a = DMatrix::from_fn(m, m, |i, j| side.sign() * gam0[i][j]);
        let gmat = DMatrix::from_fn(m, m, |i, j| gt[i][j]);
        let chol = gmat.clone().cholesky().expect("induced metric positive definite");
        let linv = chol.l().try_inverse().expect("invertible factor");
        let s = &linv * &a * linv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let mut e: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().cloned().collect();
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ginv = gmat.try_inverse().expect("invertible induced metric");
        hs.push((0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| ginv[(i, j)] * a[(i, j)]).sum());
        let mut packed = Vec::new();
        for i in 0..m {
            for j in i..m {
                packed.push(a[(i, j)]);
            }
        }
        a_all.push(packed);
        eigs.push(e);
    }
    BoundaryForm { a: a_all, h: hs, eigenvalues: eigs }
}

/// Second fundamental form of the axis-0 slice at node index `slice` of a
/// half-domain metric. Normal derivatives use second-order one-sided
/// stencils pointing into the half on the given side, so the form is the
/// one seen from that half alone.
pub fn boundary_form(g: &MetricField, axis: usize, slice: usize, side: Side) -> Result<BoundaryForm> {
    if axis != 0 {
        return Err(Error::UnsupportedMode("boundary slices must be normal to axis 0"));
    }
    let grid = g.grid();
    let n = g.dim();
    let n0 = grid.axes[0].resolution;
    if slice >= n0 {
        return Err(Error::Slice(slice));
    }
    let h = grid.h(0);
    let stride = grid.stride(0);
    let s = side.sign() as i64;
    let at = |lin: usize, k: i64| -> Option<usize> {
        let i = grid.axis_index(lin, 0) as i64 + k;
        let i = if grid.axes[0].topology.is_periodic() { i.rem_euclid(n0 as i64) } else { i };
        if i < 0 || i >= n0 as i64 {
            return None;
        }
        Some(lin - grid.axis_index(lin, 0) * stride + i as usize * stride)
    };
    let jets = MetricJets::new(g, false);
    let mut out = Vec::new();
    for lin in 0..grid.len() {
        if grid.axis_index(lin, 0) != slice {
            continue;
        }
        let (Some(p1), Some(p2)) = (at(lin, s), at(lin, 2 * s)) else {
            return Err(Error::Slice(slice));
        };
        // one-sided derivative into the half, expressed along +x
        let dn = |c: usize| -> f64 {
            let f = &g.sym().comps[c];
            s as f64 * (-3.0 * f[lin] + 4.0 * f[p1] - f[p2]) / (2.0 * h)
        };
        // derivative of g_ij along axis k
        let d = |k: usize, i: usize, j: usize| -> f64 {
            if k == 0 {
                dn(sym_index(n, i, j))
            } else {
                jets.dg[k][sym_index(n, i, j)][lin]
            }
        };
        let m = n - 1;
        let mut gt = vec![vec![0.0; m]; m];
        let mut gam0 = vec![vec![0.0; m]; m];
        let g00 = g.inv(0, 0)[lin];
        for a in 1..n {
            for b in 1..n {
                gt[a - 1][b - 1] = g.get(a, b)[lin];
                let mut v = 0.0;
                for l in 0..n {
                    v += g.inv(0, l)[lin] * 0.5 * ((d(a, b, l) + d(b, a, l)) - d(l, a, b));
                }
                gam0[a - 1][b - 1] = v / g00.sqrt();
            }
        }
        out.push((gt, gam0));
    }
    Ok(boundary_form_from(&out, side))
}
