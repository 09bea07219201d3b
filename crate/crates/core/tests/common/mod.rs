//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riccilab::pic::{AlgebraicCurvature, PicVariant};

type C = Complex<f64>;

/// Random algebraic curvature tensor: Gaussian symmetric operator on 2-forms
/// with its Bianchi part removed, shifted by `kappa` times the identity.
pub fn random_tensor(n: usize, kappa: f64, rng: &mut ChaCha8Rng) -> AlgebraicCurvature {
    let m = n * (n - 1) / 2;
    let mut a = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    a = (&a + a.transpose()) * 0.5;
    for i in 0..m {
        a[(i, i)] += kappa;
    }
    AlgebraicCurvature::from_operator(n, &a)
}

/// `4 R(z, w, conj z, conj w) / |z ^ w|^2`.
pub fn complex_sectional(r: &AlgebraicCurvature, z: &[C], w: &[C]) -> f64 {
    let n = r.n;
    let mut s = C::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let zw = z[i] * w[j];
            for k in 0..n {
                let zwz = zw * z[k].conj();
                for l in 0..n {
                    let v = r.get(i, j, k, l);
                    if v != 0.0 {
                        s += zwz * w[l].conj() * v;
                    }
                }
            }
        }
    }
    let dot = |a: &[C], b: &[C]| -> C { a.iter().zip(b).map(|(x, y)| x * y.conj()).sum() };
    let area = dot(z, z).re * dot(w, w).re - dot(z, w).norm_sqr();
    4.0 * s.re / area
}

fn gauss(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn orthonormalise(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        for j in 0..i {
            let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            let vj = vs[j].clone();
            for (x, y) in vs[i].iter_mut().zip(vj) {
                *x -= d * y;
            }
        }
        let nn = vs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        vs[i].iter_mut().for_each(|x| *x /= nn);
    }
}

/// Real parameters of a constrained pair `(z, w)`.
fn build(n: usize, variant: PicVariant, p: &[Vec<f64>]) -> (Vec<C>, Vec<C>) {
    match variant {
        PicVariant::Pic => {
            let mut v = p[..4].to_vec();
            orthonormalise(&mut v);
            let z = (0..n).map(|i| C::new(v[0][i], v[1][i])).collect();
            let w = (0..n).map(|i| C::new(v[2][i], v[3][i])).collect();
            (z, w)
        }
        PicVariant::Pic1 => {
            // z isotropic, w arbitrary in the complexified complement of z
            let mut v = p[..2].to_vec();
            orthonormalise(&mut v);
            let z: Vec<C> = (0..n).map(|i| C::new(v[0][i], v[1][i])).collect();
            let mut c = p[2].clone();
            let mut d = p[3].clone();
            for u in [&mut c, &mut d] {
                for b in &v {
                    let dd: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in u.iter_mut().zip(b) {
                        *x -= dd * y;
                    }
                }
            }
            let w = (0..n).map(|i| C::new(c[i], d[i])).collect();
            (z, w)
        }
        PicVariant::Pic2 => {
            let z = (0..n).map(|i| C::new(p[0][i], p[1][i])).collect();
            let w = (0..n).map(|i| C::new(p[2][i], p[3][i])).collect();
            (z, w)
        }
    }
}

/// Brute-force minimum of the complex sectional curvature over the constraint
/// set of a variant, by random sampling followed by local random refinement.
pub fn oracle_min(r: &AlgebraicCurvature, variant: PicVariant, samples: usize, seed: u64) -> f64 {
    let n = r.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut best_p: Vec<Vec<f64>> = Vec::new();
    for _ in 0..samples {
        let p: Vec<Vec<f64>> = (0..4).map(|_| gauss(n, &mut rng)).collect();
        let (z, w) = build(n, variant, &p);
        let v = complex_sectional(r, &z, &w);
        if v < best {
            best = v;
            best_p = p;
        }
    }
    let mut step = 0.3;
    for _ in 0..20000 {
        let p: Vec<Vec<f64>> =
            best_p.iter().map(|v| v.iter().map(|x| x + step * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let (z, w) = build(n, variant, &p);
        let v = complex_sectional(r, &z, &w);
        if v < best {
            best = v;
            best_p = p;
            step *= 1.2;
        } else {
            step = (step * 0.98).max(1e-6);
        }
    }
    best
}

/// Random smooth symmetric 2-tensor path: low Fourier modes times powers
/// `t^p`, `p in [-1/2, 1)`, one sum per component.
pub fn random_path(grid: &riccilab::grid::Grid, times: &[f64], rng: &mut ChaCha8Rng) -> Vec<riccilab::tensor::SymField> {
    use std::f64::consts::TAU;
    let nc = grid.dim * (grid.dim + 1) / 2;
    let modes: Vec<(usize, f64, Vec<f64>, f64, f64)> = (0..3 * nc)
        .map(|i| {
            let ks = (0..grid.dim).map(|_| rng.random_range(0..3) as f64).collect();
            (i % nc, rng.random_range(-1.0..1.0), ks, rng.random_range(0.0..TAU), rng.random_range(-0.5..1.0))
        })
        .collect();
    times
        .iter()
        .map(|&t| riccilab::tensor::SymField {
            grid: grid.clone(),
            comps: (0..nc)
                .map(|c| {
                    grid.sample(|p| {
                        modes
                            .iter()
                            .filter(|m| m.0 == c)
                            .map(|m| {
                                let arg: f64 = m.2.iter().zip(p).map(|(k, x)| k * x).sum();
                                m.1 * (TAU * arg + m.3).cos() * t.powf(m.4)
                            })
                            .sum()
                    })
                })
                .collect(),
        })
        .collect()
}
