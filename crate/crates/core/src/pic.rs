//! Algebraic curvature tensors and the PIC / PIC1 / PIC2 frame functionals,
//! minimised by multi-start rotation descent over orthonormal frames.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Minimum multi-starts per variant.
pub const STARTS: usize = 32;
/// Random frames added after the coordinate frames.
pub const MIN_RANDOM_STARTS: usize = 8;
/// Descent iteration cap.
pub const MAX_ITER: usize = 500;
/// Gradient-norm stopping threshold.
pub const GRAD_TOL: f64 = 1e-9;
/// Screening pass applied to every start before the best are polished.
const SCREEN_TOL: f64 = 1e-4;
const SCREEN_ITER: usize = 60;
const POLISH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PicVariant {
    Pic,
    Pic1,
    Pic2,
}

/// Covariant 4-tensor in an orthonormal basis, `r[((i*n+j)*n+k)*n+l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicCurvature {
    pub n: usize,
    pub r: Vec<f64>,
}

impl AlgebraicCurvature {
    pub fn new(n: usize, r: Vec<f64>) -> AlgebraicCurvature {
        assert_eq!(r.len(), n.pow(4));
        AlgebraicCurvature { n, r }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.r[self.idx(i, j, k, l)]
    }

    /// `R_ijkl = k (d_ik d_jl - d_il d_jk)`.
    pub fn constant(n: usize, kappa: f64) -> AlgebraicCurvature {
        let mut t = AlgebraicCurvature::new(n, vec![0.0; n.pow(4)]);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let c = t.idx(i, j, k, l);
                        t.r[c] = kappa * (d(i, k) * d(j, l) - d(i, l) * d(j, k));
                    }
                }
            }
        }
        t
    }

    /// Tensor of a symmetric operator on the pair basis `e_i ^ e_j`, `i < j`,
    /// with the first-Bianchi (totally antisymmetric) part removed.
    pub fn from_operator(n: usize, m: &DMatrix<f64>) -> AlgebraicCurvature {
        let pairs = crate::curvature::pair_basis(n);
        let mut t = AlgebraicCurvature::new(n, vec![0.0; n.pow(4)]);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for (q, &(k, l)) in pairs.iter().enumerate() {
                let v = 0.5 * (m[(p, q)] + m[(q, p)]);
                for (a, b, s1) in [(i, j, 1.0), (j, i, -1.0)] {
                    for (c, d, s2) in [(k, l, 1.0), (l, k, -1.0)] {
                        let x = t.idx(a, b, c, d);
                        t.r[x] = s1 * s2 * v;
                    }
                }
            }
        }
        let mut out = t.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let b = (t.get(i, j, k, l) + t.get(j, k, i, l) + t.get(k, i, j, l)) / 3.0;
                        let x = out.idx(i, j, k, l);
                        out.r[x] -= b;
                    }
                }
            }
        }
        out
    }

    /// Warped-product tensor: radial planes `e_0 ^ e_a` curvature `k0`,
    /// tangential planes `k1`.
    pub fn warped(n: usize, k0: f64, k1: f64) -> AlgebraicCurvature {
        let pairs = crate::curvature::pair_basis(n);
        let m = DMatrix::from_fn(pairs.len(), pairs.len(), |p, q| {
            if p != q {
                0.0
            } else if pairs[p].0 == 0 {
                k0
            } else {
                k1
            }
        });
        AlgebraicCurvature::from_operator(n, &m)
    }

    /// Components in a new basis whose vectors are the columns of `f`
    /// (row-major `n x n`).
    pub fn change_basis(&self, f: &[f64]) -> AlgebraicCurvature {
        let n = self.n;
        let mut cur = self.r.clone();
        // contract one slot at a time
        for slot in 0..4 {
            let mut next = vec![0.0; cur.len()];
            for x in 0..cur.len() {
                let mut idx = [x / (n * n * n), (x / (n * n)) % n, (x / n) % n, x % n];
                let a = idx[slot];
                let mut s = 0.0;
                for i in 0..n {
                    idx[slot] = i;
                    s += f[i * n + a] * cur[((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]];
                }
                next[x] = s;
            }
            cur = next;
        }
        AlgebraicCurvature { n, r: cur }
    }

    /// Value of `R(x1, x2, x3, x4)` and its gradients with respect to each slot.
    pub fn multi(&self, xs: [&[f64]; 4]) -> (f64, [Vec<f64>; 4]) {
        let n = self.n;
        let mut grads = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut val = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ij = xs[0][i] * xs[1][j];
                for k in 0..n {
                    let ijk = ij * xs[2][k];
                    let base = ((i * n + j) * n + k) * n;
                    let mut s4 = 0.0;
                    for l in 0..n {
                        let r = self.r[base + l];
                        if r == 0.0 {
                            continue;
                        }
                        s4 += r * xs[3][l];
                        grads[3][l] += r * ijk;
                    }
                    val += ijk * s4;
                    grads[2][k] += ij * s4;
                    grads[1][j] += xs[0][i] * xs[2][k] * s4;
                    grads[0][i] += xs[1][j] * xs[2][k] * s4;
                }
            }
        }
        (val, grads)
    }
}

/// Minimiser of one variant: normalised margin `4F / ((1+l^2)(1+m^2))`.
#[derive(Clone, Debug)]
pub struct FrameMin {
    pub value: f64,
    /// Row-major orthogonal matrix; columns 0..4 are `e_1..e_4`.
    pub frame: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct PicMargins {
    pub pic: FrameMin,
    pub pic1: FrameMin,
    pub pic2: FrameMin,
}

impl PicMargins {
    pub fn get(&self, v: PicVariant) -> &FrameMin {
        match v {
            PicVariant::Pic => &self.pic,
            PicVariant::Pic1 => &self.pic1,
            PicVariant::Pic2 => &self.pic2,
        }
    }
}

/// The five frame components `R1313, R1414, R2323, R2424, R1234` with their
/// rotation gradients.
struct Components {
    v: [f64; 5],
    d: [Vec<f64>; 5],
}

fn components(r: &AlgebraicCurvature, q: &[f64], with_grad: bool) -> Components {
    let n = r.n;
    let col = |a: usize| -> Vec<f64> { (0..n).map(|i| q[i * n + a]).collect() };
    let e = [col(0), col(1), col(2), col(3)];
    let slots: [[usize; 4]; 5] = [[0, 2, 0, 2], [0, 3, 0, 3], [1, 2, 1, 2], [1, 3, 1, 3], [0, 1, 2, 3]];
    let npairs = n * (n - 1) / 2;
    let mut v = [0.0; 5];
    let mut d: [Vec<f64>; 5] = Default::default();
    for (m, s) in slots.iter().enumerate() {
        let (val, g) = r.multi([&e[s[0]], &e[s[1]], &e[s[2]], &e[s[3]]]);
        v[m] = val;
        if with_grad {
            let mut dv = vec![0.0; npairs];
            let mut c = 0;
            for p in 0..n {
                for qq in p + 1..n {
                    let mut acc = 0.0;
                    for slot in 0..4 {
                        let x = &e[s[slot]];
                        acc += g[slot][p] * x[qq] - g[slot][qq] * x[p];
                    }
                    dv[c] = acc;
                    c += 1;
                }
            }
            d[m] = dv;
        }
    }
    Components { v, d }
}

fn objective(v: &[f64; 5], l: f64, m: f64) -> f64 {
    4.0 * (v[0] + l * l * v[1] + m * m * v[2] + l * l * m * m * v[3] - 2.0 * l * m * v[4])
        / ((1.0 + l * l) * (1.0 + m * m))
}

/// Exact minimiser on `[0,1]` of `(a + x^2 b - 2 x e) / (1 + x^2)`.
fn min_ratio(a: f64, b: f64, e: f64) -> f64 {
    let f = |x: f64| (a + x * x * b - 2.0 * x * e) / (1.0 + x * x);
    let mut cands = vec![0.0, 1.0];
    if e.abs() > 0.0 {
        // e x^2 + (b - a) x - e = 0
        let disc = ((b - a) * (b - a) + 4.0 * e * e).sqrt();
        for x in [(-(b - a) + disc) / (2.0 * e), (-(b - a) - disc) / (2.0 * e)] {
            if (0.0..=1.0).contains(&x) {
                cands.push(x);
            }
        }
    }
    cands.into_iter().fold((f64::INFINITY, 0.0), |(bv, bx), x| {
        let v = f(x);
        if v < bv {
            (v, x)
        } else {
            (bv, bx)
        }
    })
    .1
}

/// Monotone coordinate descent over the admissible `(lambda, mu)`.
fn optimise_params(v: &[f64; 5], variant: PicVariant, l0: f64, m0: f64) -> (f64, f64) {
    match variant {
        PicVariant::Pic => (1.0, 1.0),
        PicVariant::Pic1 => {
            let l = min_ratio(v[0] + v[2], v[1] + v[3], v[4]);
            if objective(v, l, 1.0) <= objective(v, l0, 1.0) {
                (l, 1.0)
            } else {
                (l0, 1.0)
            }
        }
        PicVariant::Pic2 => {
            let (mut l, mut m) = (l0, m0);
            for _ in 0..8 {
                let before = objective(v, l, m);
                let nl = min_ratio(v[0] + m * m * v[2], v[1] + m * m * v[3], m * v[4]);
                if objective(v, nl, m) <= objective(v, l, m) {
                    l = nl;
                }
                let nm = min_ratio(v[0] + l * l * v[1], v[2] + l * l * v[3], l * v[4]);
                if objective(v, l, nm) <= objective(v, l, m) {
                    m = nm;
                }
                if before - objective(v, l, m) <= 1e-15 * before.abs().max(1e-300) {
                    break;
                }
            }
            (l, m)
        }
    }
}

/// Rotation `Cayley(A) Q` for the skew generator with entries `theta_pq`.
fn rotate(n: usize, q: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut c = 0;
    for p in 0..n {
        for r in p + 1..n {
            a[(p, r)] = theta[c];
            a[(r, p)] = -theta[c];
            c += 1;
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id - &a * 0.5;
    let rhs = &id + &a * 0.5;
    let cay = lhs.lu().solve(&rhs).expect("Cayley transform of a skew matrix is regular");
    let qm = DMatrix::from_row_slice(n, n, q);
    let out = cay * qm;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = out[(i, j)];
        }
    }
    v
}

fn descend(r: &AlgebraicCurvature, variant: PicVariant, start: FrameMin, tol: f64, iters: usize) -> FrameMin {
    let n = r.n;
    let mut q = start.frame;
    let (mut l, mut m) = (start.lambda, start.mu);
    let mut comp = components(r, &q, true);
    let (nl, nm) = optimise_params(&comp.v, variant, l, m);
    if objective(&comp.v, nl, nm) <= objective(&comp.v, l, m) {
        l = nl;
        m = nm;
    }
    let mut val = objective(&comp.v, l, m);
    let mut step = 1.0;
    for _ in 0..iters {
        let scale = 4.0 / ((1.0 + l * l) * (1.0 + m * m));
        let w = [1.0, l * l, m * m, l * l * m * m, -2.0 * l * m];
        let npairs = comp.d[0].len();
        let grad: Vec<f64> =
            (0..npairs).map(|c| scale * (0..5).map(|k| w[k] * comp.d[k][c]).sum::<f64>()).collect();
        let gn2: f64 = grad.iter().map(|x| x * x).sum();
        if gn2.sqrt() < tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let theta: Vec<f64> = grad.iter().map(|g| -step * g).collect();
            let qn = rotate(n, &q, &theta);
            let cn = components(r, &qn, false);
            let vn = objective(&cn.v, l, m);
            if vn <= val - 1e-4 * step * gn2 {
                q = qn;
                comp = components(r, &q, true);
                let (nl, nm) = optimise_params(&comp.v, variant, l, m);
                if objective(&comp.v, nl, nm) <= objective(&comp.v, l, m) {
                    l = nl;
                    m = nm;
                }
                val = objective(&comp.v, l, m);
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    FrameMin { value: val, frame: q, lambda: l, mu: m }
}

fn identity(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

/// Coordinate frames placing axes `0..4` (and `1..5` when `n > 4`) in every
/// slot order, followed by seeded random orthogonal frames.
fn seeds(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let offsets = if n > 4 { 0..2 } else { 0..1 };
    for (offset, code) in offsets.flat_map(|o| (0..256usize).map(move |c| (o, c))) {
        let p: Vec<usize> = (0..4).map(|c| offset + ((code >> (2 * c)) & 3)).collect();
        if (0..4).any(|a| (a + 1..4).any(|b| p[a] == p[b])) {
            continue;
        }
        let mut q = identity(n);
        for (c, &a) in p.iter().enumerate() {
            for i in 0..n {
                q[i * n + c] = if i == a { 1.0 } else { 0.0 };
            }
        }
        out.push(q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = STARTS.max(out.len() + MIN_RANDOM_STARTS);
    while out.len() < total {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let qm = qr.q();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = qm[(i, j)];
            }
        }
        out.push(v);
    }
    out
}

fn run_variant(r: &AlgebraicCurvature, variant: PicVariant, starts: &[Vec<f64>], extra: Option<FrameMin>) -> FrameMin {
    let mut screened: Vec<FrameMin> = Vec::new();
    if let Some(e) = extra {
        screened.push(descend(r, variant, e, SCREEN_TOL, SCREEN_ITER));
    }
    for q in starts {
        let comp = components(r, q, false);
        let (l, m) = match variant {
            PicVariant::Pic => (1.0, 1.0),
            _ => {
                let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
                let mut bl = (f64::INFINITY, 1.0, 1.0);
                for &l in &grid {
                    for &m in &grid {
                        if variant == PicVariant::Pic1 && m != 1.0 {
                            continue;
                        }
                        let v = objective(&comp.v, l, m);
                        if v < bl.0 {
                            bl = (v, l, m);
                        }
                    }
                }
                (bl.1, bl.2)
            }
        };
        let start = FrameMin { value: f64::INFINITY, frame: q.clone(), lambda: l, mu: m };
        screened.push(descend(r, variant, start, SCREEN_TOL, SCREEN_ITER));
    }
    screened.sort_by(|a, b| a.value.total_cmp(&b.value));
    screened
        .into_iter()
        .take(POLISH)
        .map(|f| descend(r, variant, f, GRAD_TOL, MAX_ITER))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start")
}

/// All three margins of an algebraic tensor (`n >= 4`). PIC1 descent is also
/// seeded from the PIC minimiser and PIC2 from the PIC1 minimiser, so the
/// nesting `PIC2 <= PIC1 <= PIC` holds exactly.
pub fn margins(r: &AlgebraicCurvature, seed: u64) -> PicMargins {
    assert!(r.n >= 4, "PIC-family margins need n >= 4");
    let starts = seeds(r.n, seed);
    let pic = run_variant(r, PicVariant::Pic, &starts, None);
    let pic1 = run_variant(r, PicVariant::Pic1, &starts, Some(pic.clone()));
    let pic2 = run_variant(r, PicVariant::Pic2, &starts, Some(pic1.clone()));
    PicMargins { pic, pic1, pic2 }
}

/// Single variant margin.
pub fn margin(r: &AlgebraicCurvature, variant: PicVariant, seed: u64) -> FrameMin {
    margins(r, seed).get(variant).clone()
}
