//! Rotationally symmetric metrics `psi^2 dx^2 + phi^2 g_{S^{n-1}}` on a cell
//! centred polar axis over `[0, pi]` (sphere) or `[0, pi/2]` (hemisphere,
//! doubled across the equator), evolved by Ricci-DeTurck flow against the
//! round background.
//!
//! The state is regular at the poles: `f = phi^2 / sin^2 x` and
//! `C = (psi^2 - f) / sin^2 x`, both even about every mirror.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Topology};
use crate::parabolic::TimeMesh;
use crate::pic::{self, AlgebraicCurvature, PicVariant};

/// Domains of the reduced flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotDomain {
    Sphere,
    Hemisphere,
}

impl RotDomain {
    pub fn extent(self) -> f64 {
        match self {
            RotDomain::Sphere => PI,
            RotDomain::Hemisphere => PI / 2.0,
        }
    }

    pub fn axis(self, cells: usize) -> Axis {
        Axis::polar(self.extent(), cells)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedMetric {
    pub axis: Axis,
    pub n: usize,
    pub f: Vec<f64>,
    pub c: Vec<f64>,
}

fn check_axis(axis: &Axis, n: usize) -> Result<RotDomain> {
    if n < 2 {
        return Err(Error::UnsupportedDimension { dim: n, what: "warped metrics" });
    }
    if axis.topology != Topology::Polar || axis.resolution < 8 {
        return Err(Error::Config("warped metrics need a polar axis with 8 or more cells".into()));
    }
    if (axis.extent - PI).abs() < 1e-12 {
        Ok(RotDomain::Sphere)
    } else if (axis.extent - PI / 2.0).abs() < 1e-12 {
        Ok(RotDomain::Hemisphere)
    } else {
        Err(Error::Config(format!("polar extent {} is neither pi nor pi/2", axis.extent)))
    }
}

impl WarpedMetric {
    pub fn new(axis: Axis, n: usize, f: Vec<f64>, c: Vec<f64>) -> Result<WarpedMetric> {
        check_axis(&axis, n)?;
        if f.len() != axis.resolution || c.len() != axis.resolution {
            return Err(Error::Shape(format!("warp fields of length {} / {} on {} cells", f.len(), c.len(), axis.resolution)));
        }
        let wm = WarpedMetric { axis, n, f, c };
        wm.check(f64::NAN)?;
        Ok(wm)
    }

    /// From `psi(x)` and `phi(x)` sampled at cell centres.
    pub fn from_profiles(axis: Axis, n: usize, psi: impl Fn(f64) -> f64, phi: impl Fn(f64) -> f64) -> Result<WarpedMetric> {
        let (mut f, mut c) = (Vec::new(), Vec::new());
        for i in 0..axis.resolution {
            let x = axis.coord(i);
            let s2 = x.sin().powi(2);
            let fi = phi(x).powi(2) / s2;
            f.push(fi);
            c.push((psi(x).powi(2) - fi) / s2);
        }
        WarpedMetric::new(axis, n, f, c)
    }

    pub fn domain(&self) -> RotDomain {
        check_axis(&self.axis, self.n).expect("validated at construction")
    }

    pub fn x(&self, i: usize) -> f64 {
        self.axis.coord(i)
    }

    pub fn a(&self) -> Vec<f64> {
        (0..self.f.len()).map(|i| self.f[i] + self.x(i).sin().powi(2) * self.c[i]).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        (0..self.f.len()).map(|i| self.x(i).sin().powi(2) * self.f[i]).collect()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.a().iter().map(|v| v.sqrt()).collect()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.b().iter().map(|v| v.sqrt()).collect()
    }

    fn check(&self, time: f64) -> Result<()> {
        let a = self.a();
        for i in 0..self.f.len() {
            if !(self.f[i] > 0.0) || !(a[i] > 0.0) || !self.c[i].is_finite() {
                return Err(Error::WarpDegenerate { cell: i, time });
            }
        }
        Ok(())
    }

    /// Volume-normalised squared radius `(vol(g) / vol(S^n))^(2/n)`.
    pub fn radius_squared(&self) -> f64 {
        let h = self.axis.h();
        let (psi, phi) = (self.psi(), self.phi());
        let dim = self.n as f64 - 1.0;
        let num: f64 = (0..psi.len()).map(|i| psi[i] * phi[i].powf(dim) * h).sum();
        (num / sin_power_integral(self.n - 1, 0.0, self.axis.extent)).powf(2.0 / self.n as f64)
    }
}

/// `n (n-1) / R_mean` with the volume-weighted mean scalar curvature; equals
/// the squared radius on a round sphere.
pub fn curvature_radius_squared(wm: &WarpedMetric) -> f64 {
    let r = warped_curvature(wm).scalar;
    let (psi, phi) = (wm.psi(), wm.phi());
    let dim = wm.n as f64 - 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..r.len() {
        let w = psi[i] * phi[i].powf(dim);
        num += w * r[i];
        den += w;
    }
    wm.n as f64 * dim / (num / den)
}

/// `integral_lo^hi sin^k` by 8-point Gauss-Legendre on 16 panels.
fn sin_power_integral(k: usize, lo: f64, hi: f64) -> f64 {
    const X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    let panels = 16;
    let w = (hi - lo) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * w;
        for q in 0..4 {
            for sg in [-1.0, 1.0] {
                s += W[q] * (mid + sg * X[q] * w / 2.0).sin().powi(k as i32) * w / 2.0;
            }
        }
    }
    s
}

/// Central derivative with even ghosts at both end faces.
fn d1(u: &[f64], h: f64) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|i| {
            let l = if i == 0 { u[0] } else { u[i - 1] };
            let r = if i + 1 == m { u[m - 1] } else { u[i + 1] };
            (r - l) / (2.0 * h)
        })
        .collect()
}

/// `u' / sin x` at cell centres.
fn over_sin(axis: &Axis, u: &[f64]) -> Vec<f64> {
    d1(u, axis.h()).iter().enumerate().map(|(i, v)| v / axis.coord(i).sin()).collect()
}

/// Pointwise jets of `(f, C)`: `F1 = f'/S`, `F2 = F1'/S`, `G1 = C'/S`.
struct Jets {
    f1: Vec<f64>,
    f2: Vec<f64>,
    g1: Vec<f64>,
}

fn jets(wm: &WarpedMetric) -> Jets {
    let f1 = over_sin(&wm.axis, &wm.f);
    let f2 = over_sin(&wm.axis, &f1);
    let g1 = over_sin(&wm.axis, &wm.c);
    Jets { f1, f2, g1 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedCurvature {
    /// Sectional curvature of planes containing `d_x`.
    pub k0: Vec<f64>,
    /// Sectional curvature of planes tangent to the spheres (`n >= 3`).
    pub k1: Vec<f64>,
    /// `Ric(d_x, d_x) = (n-1) K0 psi^2`.
    pub ric_radial: Vec<f64>,
    /// Coefficient of `g_{S^{n-1}}` in Ricci: `(K0 + (n-2) K1) phi^2`.
    pub ric_sphere: Vec<f64>,
    pub scalar: Vec<f64>,
}

/// Closed-form curvature of a warped metric, regular at the poles.
pub fn warped_curvature(wm: &WarpedMetric) -> WarpedCurvature {
    let j = jets(wm);
    let n = wm.n as f64;
    let (a, b) = (wm.a(), wm.b());
    let m = wm.f.len();
    let mut out = WarpedCurvature {
        k0: vec![0.0; m],
        k1: vec![0.0; m],
        ric_radial: vec![0.0; m],
        ric_sphere: vec![0.0; m],
        scalar: vec![0.0; m],
    };
    for i in 0..m {
        let x = wm.x(i);
        let (s, cs) = (x.sin(), x.cos());
        let (f, c, f1, f2, g1) = (wm.f[i], wm.c[i], j.f1[i], j.f2[i], j.g1[i]);
        let s2 = s * s;
        let s4 = s2 * s2;
        let k0 = (c * (-4.0 * cs * f1 * s2 * f + f1 * f1 * s4 - 2.0 * f2 * s4 * f + 4.0 * f * f)
            + 4.0 * f.powi(3)
            + f * f * (-4.0 * cs * f1 + 2.0 * cs * g1 * s2 - 2.0 * f2 * s2)
            + f * (2.0 * f1 * f1 * s2 + f1 * g1 * s4))
            / (4.0 * f * f * a[i] * a[i]);
        let k1 = (4.0 * c * f - 4.0 * cs * f1 * f - f1 * f1 * s2 + 4.0 * f * f) / (4.0 * f * f * a[i]);
        out.k0[i] = k0;
        out.k1[i] = k1;
        out.ric_radial[i] = (n - 1.0) * k0 * a[i];
        out.ric_sphere[i] = (k0 + (n - 2.0) * k1) * b[i];
        out.scalar[i] = 2.0 * (n - 1.0) * k0 + (n - 1.0) * (n - 2.0) * k1;
    }
    if wm.n == 2 {
        out.k1.iter_mut().for_each(|v| *v = f64::NAN);
    }
    out
}

/// Lower-order parts of `d_t f` and `d_t C` (no second derivatives).
fn lower_order(wm: &WarpedMetric, j: &Jets) -> (Vec<f64>, Vec<f64>) {
    let n = wm.n as f64;
    let m = wm.f.len();
    let (mut rf, mut rc) = (vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let x = wm.x(i);
        let (s, cs) = (x.sin(), x.cos());
        let (f, c, f1, g1) = (wm.f[i], wm.c[i], j.f1[i], j.g1[i]);
        let s2 = s * s;
        let s4 = s2 * s2;
        let a = c * s2 + f;
        rf[i] = (c * (cs * f1 * s2 * (n - 1.0) - 2.0 * s2 * f * (n - 1.0) + 2.0 * f) - f1 * f1 * s2
            + f * f * (2.0 - 2.0 * n))
            / (f * a);
        let num = c.powi(3) * (-4.0 * (n - 1.0) * s4 * (cs * f1 + f))
            + c * c
                * (-8.0 * (n - 1.0) * cs * f1 * s2 * f + 2.0 * (n - 1.0) * cs * g1 * s4 * f
                    + (n - 1.0) * f1 * f1 * s4
                    - 8.0 * s2 * f * f * n
                    + 12.0 * s2 * f * f
                    - 12.0 * f * f)
            + c * (-4.0 * cs * f1 * f * f * n - 8.0 * cs * f1 * f * f + 2.0 * cs * g1 * s2 * f * f * n
                - 14.0 * cs * g1 * s2 * f * f
                + 2.0 * f1 * f1 * s2 * f * n
                - 4.0 * f.powi(3) * n
                - 4.0 * f.powi(3))
            + f * f * (f1 * f1 * n - 2.0 * f1 * f1 - 6.0 * f1 * g1 * s2 - 3.0 * g1 * g1 * s4);
        rc[i] = num / (2.0 * f * f * a * a);
    }
    (rf, rc)
}

/// Finite-volume weights of `L_k u = sin^-k (sin^k u')'`: `(west, east)`.
fn lk_weights(axis: &Axis, k: usize) -> Vec<(f64, f64)> {
    let h = axis.h();
    (0..axis.resolution)
        .map(|i| {
            let xl = i as f64 * h;
            let xr = xl + h;
            let vol = sin_power_integral(k, xl, xr);
            let w = if i == 0 { 0.0 } else { xl.sin().powi(k as i32) / (h * vol) };
            let e = if i + 1 == axis.resolution { 0.0 } else { xr.sin().powi(k as i32) / (h * vol) };
            (w, e)
        })
        .collect()
}

fn apply_lk(w: &[(f64, f64)], u: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|i| {
            let west = if i > 0 { w[i].0 * (u[i - 1] - u[i]) } else { 0.0 };
            let east = if i + 1 < m { w[i].1 * (u[i + 1] - u[i]) } else { 0.0 };
            west + east
        })
        .collect()
}

/// Solves `(I - c_i L_k) u = rhs` by the Thomas algorithm.
fn solve_lk(w: &[(f64, f64)], coef: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for i in 0..m {
        lower[i] = -coef[i] * w[i].0;
        upper[i] = -coef[i] * w[i].1;
        diag[i] = 1.0 + coef[i] * (w[i].0 + w[i].1);
    }
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / den;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den;
    }
    let mut u = vec![0.0; m];
    u[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    u
}

/// Time derivatives `(d_t f, d_t C)` of the reduced Ricci-DeTurck flow.
fn reduced_state_rhs(wm: &WarpedMetric) -> (Vec<f64>, Vec<f64>) {
    let j = jets(wm);
    let (mut rf, mut rc) = lower_order(wm, &j);
    let a = wm.a();
    let lf = apply_lk(&lk_weights(&wm.axis, wm.n - 1), &wm.f);
    let lc = apply_lk(&lk_weights(&wm.axis, wm.n + 3), &wm.c);
    for i in 0..rf.len() {
        rf[i] += lf[i] / a[i];
        rc[i] += lc[i] / a[i];
    }
    (rf, rc)
}

/// `(d_t psi^2, d_t phi^2)` of the reduced Ricci-DeTurck flow.
pub fn reduced_rhs(wm: &WarpedMetric) -> Result<(Vec<f64>, Vec<f64>)> {
    oracle_gate(wm.n)?;
    Ok(unchecked_rhs(wm))
}

fn unchecked_rhs(wm: &WarpedMetric) -> (Vec<f64>, Vec<f64>) {
    let (ft, ct) = reduced_state_rhs(wm);
    let da = (0..ft.len()).map(|i| ft[i] + wm.x(i).sin().powi(2) * ct[i]).collect();
    let db = (0..ft.len()).map(|i| wm.x(i).sin().powi(2) * ft[i]).collect();
    (da, db)
}

/// `-2 Ric + L_W g` assembled from the warped curvature formulas on `psi`, `phi`
/// directly and a finite-difference Lie derivative: `(da, db)`.
pub fn oracle_rhs(wm: &WarpedMetric) -> (Vec<f64>, Vec<f64>) {
    let n = wm.n as f64;
    let h = wm.axis.h();
    let (a, b, psi, phi) = (wm.a(), wm.b(), wm.psi(), wm.phi());
    let (da, db, dphi) = (d1(&a, h), d1(&b, h), d1(&phi, h));
    let m = a.len();
    let phis: Vec<f64> = (0..m).map(|i| dphi[i] / psi[i]).collect();
    let dphis = d1(&phis, h);
    let w: Vec<f64> = (0..m)
        .map(|i| {
            let x = wm.x(i);
            da[i] / (2.0 * a[i] * a[i]) - (n - 1.0) * db[i] / (2.0 * a[i] * b[i])
                + (n - 1.0) * x.sin() * x.cos() / b[i]
        })
        .collect();
    let dw = d1(&w, h);
    let mut ra = vec![0.0; m];
    let mut rb = vec![0.0; m];
    for i in 0..m {
        let k0 = -dphis[i] / (psi[i] * phi[i]);
        let k1 = (1.0 - phis[i] * phis[i]) / (phi[i] * phi[i]);
        ra[i] = -2.0 * (n - 1.0) * k0 * a[i] + w[i] * da[i] + 2.0 * a[i] * dw[i];
        rb[i] = -2.0 * (k0 + (n - 2.0) * k1) * b[i] + w[i] * db[i];
    }
    (ra, rb)
}

/// A random smooth warp `f = 1 + sum w_m cos(m x)`, same form for `C`.
pub fn random_warp(axis: Axis, n: usize, amplitude: f64, seed: u64) -> Result<WarpedMetric> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = || -> Vec<f64> { (0..3).map(|_| rng.random_range(-amplitude..amplitude)).collect() };
    let (cf, cc) = (coeffs(), coeffs());
    let series = |w: &[f64], x: f64| -> f64 { w.iter().enumerate().map(|(m, v)| v * ((m + 1) as f64 * 2.0 * x).cos()).sum() };
    let f = (0..axis.resolution).map(|i| 1.0 + series(&cf, axis.coord(i))).collect();
    let c = (0..axis.resolution).map(|i| series(&cc, axis.coord(i))).collect();
    WarpedMetric::new(axis, n, f, c)
}

/// Largest difference between reduced and oracle right sides over the band
/// `|x - pi/2| <= pi/3` (the oracle's `1/phi^2` terms lose accuracy at poles).
pub fn gate_error(wm: &WarpedMetric) -> f64 {
    let (ra, rb) = unchecked_rhs(wm);
    let (oa, ob) = oracle_rhs(wm);
    (0..ra.len())
        .filter(|&i| (wm.x(i) - PI / 2.0).abs() <= PI / 3.0)
        .map(|i| (ra[i] - oa[i]).abs().max((rb[i] - ob[i]).abs()))
        .fold(0.0, f64::max)
}

pub const GATE_WARPS: usize = 20;
pub const GATE_MIN_RATIO: f64 = 3.0;

fn run_gate(n: usize) -> std::result::Result<(), String> {
    for seed in 0..GATE_WARPS as u64 {
        let e: Vec<f64> = [128, 256]
            .iter()
            .map(|&m| random_warp(RotDomain::Sphere.axis(m), n, 0.1, seed).map(|w| gate_error(&w)))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?;
        if !(e[0] / e[1] > GATE_MIN_RATIO) {
            return Err(format!("n = {n}, warp {seed}: errors {:.3e} -> {:.3e}", e[0], e[1]));
        }
    }
    Ok(())
}

/// Validates the reduced right side against the oracle once per dimension.
pub fn oracle_gate(n: usize) -> Result<()> {
    static GATES: [OnceLock<std::result::Result<(), String>>; 8] = [const { OnceLock::new() }; 8];
    if !(2..GATES.len()).contains(&n) {
        return Err(Error::UnsupportedDimension { dim: n, what: "reduced flow" });
    }
    GATES[n].get_or_init(|| run_gate(n)).clone().map_err(Error::OracleGate)
}

/// One IMEX step: `(1/a) L` implicit, lower-order terms explicit.
pub fn reduced_step(wm: &WarpedMetric, dt: f64, t_next: f64) -> Result<WarpedMetric> {
    let j = jets(wm);
    let (rf, rc) = lower_order(wm, &j);
    let a = wm.a();
    let coef: Vec<f64> = a.iter().map(|v| dt / v).collect();
    let m = wm.f.len();
    let f_rhs: Vec<f64> = (0..m).map(|i| wm.f[i] + dt * rf[i]).collect();
    let c_rhs: Vec<f64> = (0..m).map(|i| wm.c[i] + dt * rc[i]).collect();
    let next = WarpedMetric {
        axis: wm.axis,
        n: wm.n,
        f: solve_lk(&lk_weights(&wm.axis, wm.n - 1), &coef, &f_rhs),
        c: solve_lk(&lk_weights(&wm.axis, wm.n + 3), &coef, &c_rhs),
    };
    next.check(t_next)?;
    Ok(next)
}

/// Umbilic second fundamental form of the equator seen from the hemisphere:
/// `A = (phi_s / phi) g_induced` with the normal pointing toward the pole.
/// Returns `(eigenvalue, H)`.
pub fn equator_form(wm: &WarpedMetric) -> Result<(f64, f64)> {
    if wm.domain() != RotDomain::Hemisphere {
        return Err(Error::UnsupportedMode("equator form outside hemisphere mode"));
    }
    let m = wm.f.len();
    let h = wm.axis.h();
    let (psi, phi) = (wm.psi(), wm.phi());
    let val = |u: &[f64]| 1.875 * u[m - 1] - 1.25 * u[m - 2] + 0.375 * u[m - 3];
    let dphi = (2.0 * phi[m - 1] - 3.0 * phi[m - 2] + phi[m - 3]) / h;
    let lam = dphi / (val(&psi) * val(&phi));
    Ok((lam, (wm.n as f64 - 1.0) * lam))
}

/// Cone conditions checked on warped curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotCone {
    CurvatureOperator,
    Scalar,
    Pic,
    Pic1,
    Pic2,
}

impl RotCone {
    fn pic_variant(self) -> Option<PicVariant> {
        match self {
            RotCone::Pic => Some(PicVariant::Pic),
            RotCone::Pic1 => Some(PicVariant::Pic1),
            RotCone::Pic2 => Some(PicVariant::Pic2),
            _ => None,
        }
    }
}

/// Margin of a cone condition for a warped curvature tensor, PIC family by
/// the generic frame checker on the assembled algebraic tensor.
pub fn cone_check_rotsym(k0: f64, k1: f64, n: usize, cone: RotCone, seed: u64) -> Result<f64> {
    let nf = n as f64;
    match cone.pic_variant() {
        None if n < 2 => Err(Error::UnsupportedDimension { dim: n, what: "warped curvature" }),
        None if cone == RotCone::Scalar => {
            Ok(2.0 * (nf - 1.0) * k0 + if n > 2 { (nf - 1.0) * (nf - 2.0) * k1 } else { 0.0 })
        }
        None => Ok(if n > 2 { k0.min(k1) } else { k0 }),
        Some(_) if n < 4 => Err(Error::UnsupportedDimension { dim: n, what: "PIC-family margins" }),
        Some(v) => Ok(pic::margin(&AlgebraicCurvature::warped(n, k0, k1), v, seed).value),
    }
}

/// PIC-family margins of warped tensors as a function of `(K0, K1)`.
///
/// Every admissible plane contributes `K0 q + K1 (4 - q)` to the normalised
/// margin, since constant curvature one gives 4 on all of them. The margin is
/// a minimum over an interval of `q` and is fixed by its two endpoints,
/// which the generic checker measures at `(1, 0)` and `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedPic {
    pub n: usize,
    /// `(q_min, q_max)` per variant, in the order PIC, PIC1, PIC2.
    pub q: [(f64, f64); 3],
}

impl WarpedPic {
    pub fn calibrate(n: usize, seed: u64) -> Result<WarpedPic> {
        if n < 4 {
            return Err(Error::UnsupportedDimension { dim: n, what: "PIC-family margins" });
        }
        let m10 = pic::margins(&AlgebraicCurvature::warped(n, 1.0, 0.0), seed);
        let m01 = pic::margins(&AlgebraicCurvature::warped(n, 0.0, 1.0), seed);
        let mut q = [(0.0, 0.0); 3];
        for (k, v) in [PicVariant::Pic, PicVariant::Pic1, PicVariant::Pic2].into_iter().enumerate() {
            q[k] = (m10.get(v).value, 4.0 - m01.get(v).value);
        }
        Ok(WarpedPic { n, q })
    }

    pub fn margin(&self, k0: f64, k1: f64, variant: PicVariant) -> f64 {
        let (lo, hi) = self.q[variant as usize];
        (k0 * lo + k1 * (4.0 - lo)).min(k0 * hi + k1 * (4.0 - hi))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RotDiagnostics {
    pub t: f64,
    pub k0_min: f64,
    pub k1_min: Option<f64>,
    pub min_scal: f64,
    pub min_curv_op_eig: f64,
    pub pic_margin: Option<f64>,
    pub pic1_margin: Option<f64>,
    pub pic2_margin: Option<f64>,
    /// Equator eigenvalue of `A` and mean curvature (hemisphere only).
    pub boundary_a: Option<f64>,
    pub boundary_h: Option<f64>,
    pub radius_squared: f64,
}

fn diagnose(wm: &WarpedMetric, t: f64, pic: Option<&WarpedPic>) -> Result<RotDiagnostics> {
    let k = warped_curvature(wm);
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut d = RotDiagnostics {
        t,
        k0_min: min(&k.k0),
        k1_min: (wm.n > 2).then(|| min(&k.k1)),
        min_scal: min(&k.scalar),
        radius_squared: wm.radius_squared(),
        ..Default::default()
    };
    d.min_curv_op_eig = d.k1_min.map_or(d.k0_min, |k1| d.k0_min.min(k1));
    if let Some(p) = pic {
        let over = |v: PicVariant| (0..k.k0.len()).map(|i| p.margin(k.k0[i], k.k1[i], v)).fold(f64::INFINITY, f64::min);
        d.pic_margin = Some(over(PicVariant::Pic));
        d.pic1_margin = Some(over(PicVariant::Pic1));
        d.pic2_margin = Some(over(PicVariant::Pic2));
    }
    if wm.domain() == RotDomain::Hemisphere {
        let (lam, h) = equator_form(wm)?;
        d.boundary_a = Some(lam);
        d.boundary_h = Some(h);
    }
    Ok(d)
}

#[derive(Clone, Debug, Default)]
pub struct RotOptions {
    pub store_every: usize,
    /// Evaluate PIC-family margins (`n >= 4`).
    pub pic: bool,
    pub seed: u64,
}

#[derive(Debug)]
pub struct RotTrajectory {
    pub mesh: TimeMesh,
    pub stored: Vec<usize>,
    pub states: Vec<WarpedMetric>,
    pub diagnostics: Vec<RotDiagnostics>,
    pub failure: Option<Error>,
}

impl RotTrajectory {
    pub fn last(&self) -> &WarpedMetric {
        self.states.last().expect("trajectory holds the initial warp")
    }

    pub fn into_result(self) -> Result<RotTrajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Reduced Ricci-DeTurck flow with per-step diagnostics; a degenerate warp
/// halts the run with a partial trajectory.
pub fn reduced_flow(wm0: &WarpedMetric, mesh: &TimeMesh, opts: &RotOptions) -> RotTrajectory {
    let mut traj =
        RotTrajectory { mesh: mesh.clone(), stored: vec![0], states: vec![wm0.clone()], diagnostics: Vec::new(), failure: None };
    let pic = match (opts.pic, oracle_gate(wm0.n)) {
        (_, Err(e)) => {
            traj.failure = Some(e);
            return traj;
        }
        (true, Ok(())) => match WarpedPic::calibrate(wm0.n, opts.seed) {
            Ok(p) => Some(p),
            Err(e) => {
                traj.failure = Some(e);
                return traj;
            }
        },
        (false, Ok(())) => None,
    };
    match diagnose(wm0, 0.0, pic.as_ref()) {
        Ok(d) => traj.diagnostics.push(d),
        Err(e) => {
            traj.failure = Some(e);
            return traj;
        }
    }
    let every = opts.store_every.max(1);
    let mut cur = wm0.clone();
    for k in 0..mesh.steps() {
        let t = mesh.times[k + 1];
        match reduced_step(&cur, mesh.dt(k), t).and_then(|w| diagnose(&w, t, pic.as_ref()).map(|d| (w, d))) {
            Ok((w, d)) => {
                traj.diagnostics.push(d);
                cur = w;
            }
            Err(e) => {
                traj.failure = Some(e);
                return traj;
            }
        }
        if (k + 1) % every == 0 || k + 1 == mesh.steps() {
            traj.stored.push(k + 1);
            traj.states.push(cur.clone());
        }
    }
    traj
}

/// Heat smoothing of `f` and `C` to width `eps` (at least one cell).
pub fn mollify_warp(wm: &WarpedMetric, eps: f64) -> Result<WarpedMetric> {
    let h = wm.axis.h();
    if eps < h * (1.0 - 1e-12) {
        return Err(Error::Config(format!("mollification scale {eps} below cell width {h}")));
    }
    let tau = 0.5 * eps * eps;
    let steps = (tau / (0.4 * h * h)).ceil() as usize;
    let dt = tau / steps as f64;
    let smooth = |u: &[f64]| -> Vec<f64> {
        let mut u = u.to_vec();
        let m = u.len();
        for _ in 0..steps {
            let lap: Vec<f64> = (0..m)
                .map(|i| {
                    let l = if i == 0 { u[0] } else { u[i - 1] };
                    let r = if i + 1 == m { u[m - 1] } else { u[i + 1] };
                    (l - 2.0 * u[i] + r) / (h * h)
                })
                .collect();
            for i in 0..m {
                u[i] += dt * lap[i];
            }
        }
        u
    };
    WarpedMetric::new(wm.axis, wm.n, smooth(&wm.f), smooth(&wm.c))
}

/// Round sphere of radius `r0`.
pub fn round(axis: Axis, n: usize, r0: f64) -> Result<WarpedMetric> {
    WarpedMetric::new(axis, n, vec![r0 * r0; axis.resolution], vec![0.0; axis.resolution])
}

/// Round sphere of radius `r0` in the coordinate `chi(x) = x + eps sin 2x`.
pub fn round_regauged(axis: Axis, n: usize, r0: f64, eps: f64) -> Result<WarpedMetric> {
    WarpedMetric::from_profiles(
        axis,
        n,
        |x| r0 * (1.0 + 2.0 * eps * (2.0 * x).cos()),
        |x| r0 * (x + eps * (2.0 * x).sin()).sin(),
    )
}

/// Geodesic cap of the unit sphere with boundary slope `phi_s = slope`,
/// stretched over the hemisphere grid: `psi = kappa`, `phi = sin(kappa x)`.
/// Reflected across the equator it has a convex corner.
pub fn cap_corner(axis: Axis, n: usize, slope: f64) -> Result<WarpedMetric> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::Config(format!("cap slope {slope} outside [0, 1)")));
    }
    let kappa = slope.acos() / axis.extent;
    WarpedMetric::from_profiles(axis, n, |_| kappa, |x| (kappa * x).sin())
}

/// Cap of the arclength profile `Phi(s) = S - eps S^3 + delta S^5`,
/// `S = sin s`, over `s in [0, s_b]`, stretched over the grid. With
/// `(0.8, 0.6, 1.3)` it has `K0 < 0` somewhere, positive scalar curvature and
/// a mean-convex boundary.
pub fn dented_cap(axis: Axis, n: usize, eps: f64, delta: f64, s_b: f64) -> Result<WarpedMetric> {
    let kappa = s_b / axis.extent;
    WarpedMetric::from_profiles(axis, n, |_| kappa, |x| {
        let s = (kappa * x).sin();
        s - eps * s.powi(3) + delta * s.powi(5)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_identity_for_zero_coefficient() {
        let axis = RotDomain::Sphere.axis(16);
        let w = lk_weights(&axis, 2);
        let rhs: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(solve_lk(&w, &[0.0; 16], &rhs), rhs);
    }

    #[test]
    fn lk_is_exact_on_quadratics_at_the_pole() {
        let axis = RotDomain::Sphere.axis(64);
        let k = 4;
        let u: Vec<f64> = (0..64).map(|i| axis.coord(i).powi(2)).collect();
        let l = apply_lk(&lk_weights(&axis, k), &u);
        // u'' + k cot u' -> 2 (1 + k) at the pole
        assert!((l[0] - 2.0 * (1.0 + k as f64)).abs() < 1e-2);
    }
}
