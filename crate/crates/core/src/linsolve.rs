//! Jacobi-preconditioned BiCGSTAB for the implicit parabolic solves.

use crate::error::{Error, Result};

pub const REL_TOL: f64 = 1e-11;
pub const MAX_ITER: usize = 10_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from `x`. `apply(v, out)` writes `A v`;
/// `diag` is the Jacobi preconditioner. Returns the iteration count.
/// All updates are elementwise with global scalars, so any exact symmetry of
/// `A` and `b` is carried by every iterate.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> std::result::Result<usize, (usize, f64)> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if dot(&r, &r).sqrt() <= rel_tol * bnorm {
        return Ok(0);
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            return Err((it, dot(&r, &r).sqrt() / bnorm));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] / diag[i];
        }
        apply(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() <= rel_tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        for i in 0..n {
            z[i] = s[i] / diag[i];
        }
        apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            return Ok(it);
        }
        if omega == 0.0 {
            return Err((it, res));
        }
    }
    Err((max_iter, dot(&r, &r).sqrt() / bnorm))
}

/// [`bicgstab`] with the default tolerance, mapping failure to a stiffness
/// error labelled with the parabolicity constant.
pub fn solve(apply: impl Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64], x: &mut [f64], lambda: f64) -> Result<usize> {
    bicgstab(apply, diag, b, x, REL_TOL, MAX_ITER)
        .map_err(|(iterations, residual)| Error::Stiffness { iterations, residual, lambda })
}
