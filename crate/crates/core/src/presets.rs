//! Named initial metrics on grid domains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{Grid, Parity};
use crate::tensor::{sym_pairs, MetricField, SymField};

pub fn flat(grid: &Grid) -> MetricField {
    MetricField::identity(grid)
}

/// One smooth scalar mode compatible with the grid topology and a parity on
/// axis 0 (cosines for even, sines for odd when axis 0 reflects).
fn mode(grid: &Grid, p: &[f64], parity: Parity, ks: &[usize], phases: &[f64]) -> f64 {
    let mut v = 1.0;
    for (a, ax) in grid.axes.iter().enumerate() {
        let k = ks[a] as f64;
        let arg = if ax.topology.is_periodic() {
            2.0 * std::f64::consts::PI * k * p[a] / ax.extent + phases[a]
        } else {
            std::f64::consts::PI * k * p[a] / ax.extent
        };
        v *= if ax.topology.is_periodic() || a != 0 {
            arg.cos()
        } else if parity.is_odd() {
            arg.sin()
        } else {
            arg.cos()
        };
    }
    v
}

/// `delta + amplitude * (sum of random low modes)`, diagonally dominant so it
/// stays positive for `amplitude < 1 / (n + 1)`. Mixed terms `g_0a` vanish on
/// reflecting boundaries.
pub fn random_smooth(grid: &Grid, amplitude: f64, max_mode: usize, seed: u64) -> Result<MetricField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.dim;
    let terms = 3;
    let mut s = SymField::zeros(grid);
    for (c, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        let parity = s.parity(c);
        let spec: Vec<(f64, Vec<usize>, Vec<f64>)> = (0..terms)
            .map(|_| {
                let w = rng.random_range(-1.0..1.0) / terms as f64;
                let ks = (0..n).map(|_| rng.random_range(0..=max_mode)).collect();
                let ph = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                (w, ks, ph)
            })
            .collect();
        let base = if i == j { 1.0 } else { 0.0 };
        for node in 0..grid.len() {
            let p = grid.point(node);
            let pert: f64 = spec.iter().map(|(w, ks, ph)| w * mode(grid, &p, parity, ks, ph)).sum();
            s.comps[c][node] = base + amplitude * pert;
        }
    }
    MetricField::new(s)
}

/// Half-domain warp `dx^2 + (1 + a x) h_flat` on `[0, L]`; its reflection is
/// `(1 + a|x|)` near the mirror, Lipschitz with a kink.
pub fn kinked_warp(half: &Grid, a: f64) -> Result<MetricField> {
    MetricField::new(SymField::from_fn(half, |p, i, j| match (i, j) {
        (0, 0) => 1.0,
        _ if i == j => 1.0 + a * p[0],
        _ => 0.0,
    }))
}

/// Conformal metric `exp(2 eps cos(2 pi m x_0 / L_0)) delta`.
pub fn conformal_bump(grid: &Grid, eps: f64, m: usize) -> Result<MetricField> {
    let l = grid.axes[0].extent;
    MetricField::new(SymField::from_fn(grid, |p, i, j| {
        if i == j {
            (2.0 * eps * (std::f64::consts::TAU * m as f64 * p[0] / l).cos()).exp()
        } else {
            0.0
        }
    }))
}

/// `delta + a |sin(pi x_0 / L_0)|^beta delta`, Hölder of exponent `beta`.
pub fn holder_cusp(grid: &Grid, a: f64, beta: f64) -> Result<MetricField> {
    let l = grid.axes[0].extent;
    MetricField::new(SymField::from_fn(grid, |p, i, j| {
        if i == j {
            1.0 + a * (std::f64::consts::PI * p[0] / l).sin().abs().powf(beta)
        } else {
            0.0
        }
    }))
}
