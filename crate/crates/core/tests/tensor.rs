use std::f64::consts::PI;

use proptest::prelude::*;
use riccilab::doubling::{double_metric, symmetry_residual};
use riccilab::grid::{Axis, GridSpec, Parity};
use riccilab::presets::{kinked_warp, random_smooth};
use riccilab::tensor::{
    christoffel, hat_hessian, heat_smooth, mollify, sym_index, BackgroundMetric, MetricField, SymField,
};

fn conformal(n: usize, res: usize, f: impl Fn(&[f64]) -> f64) -> MetricField {
    let g = GridSpec::torus(n, 2.0 * PI, res).unwrap();
    MetricField::new(SymField::from_fn(&g, |p, i, j| if i == j { (2.0 * f(p)).exp() } else { 0.0 })).unwrap()
}

#[test]
fn constant_metrics_have_no_christoffels() {
    for c in [1.0, 3.7] {
        let g = GridSpec::torus(3, 1.0, 8).unwrap();
        let m = MetricField::new(SymField::identity(&g).scale(c)).unwrap();
        assert_eq!(christoffel(&m).max_abs(), 0.0);
    }
}

fn conformal_christoffel_error(res: usize) -> f64 {
    let f = |p: &[f64]| 0.1 * p[0].sin();
    let df = |p: &[f64], k: usize| if k == 0 { 0.1 * p[0].cos() } else { 0.0 };
    let m = conformal(2, res, f);
    let gam = christoffel(&m);
    let grid = m.grid().clone();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let exact =
                    grid.sample(|p| delta(k, i) * df(p, j) + delta(k, j) * df(p, i) - delta(i, j) * df(p, k));
                for (a, b) in gam.comp(&[k, i, j]).iter().zip(&exact) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    worst
}

#[test]
fn conformal_christoffels_match_closed_form_at_second_order() {
    let (e1, e2) = (conformal_christoffel_error(32), conformal_christoffel_error(64));
    assert!(e2 < 5e-4, "{e2}");
    let r = e1 / e2;
    assert!((3.5..4.5).contains(&r), "ratio {r}");
}

#[test]
fn christoffels_are_symmetric_in_lower_slots() {
    let g = GridSpec::torus(3, 1.0, 8).unwrap();
    let m = random_smooth(&g, 0.2, 2, 4).unwrap();
    let gam = christoffel(&m);
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gam.comp(&[k, i, j]), gam.comp(&[k, j, i]));
            }
        }
    }
}

#[test]
fn flat_hessian_of_constant_vanishes() {
    let g = GridSpec::torus(2, 1.0, 8).unwrap();
    let eta = SymField::constant(&g, &[vec![2.0, 0.5], vec![0.5, 1.0]]);
    assert_eq!(hat_hessian(&eta, &BackgroundMetric::Flat).max_abs(), 0.0);
}

#[test]
fn flat_hessian_of_quadratic_is_twice_identity() {
    let g = GridSpec::new(vec![Axis::reflect(1.0, 17), Axis::periodic(1.0, 8)]).unwrap();
    let eta = SymField::from_fn(&g, |p, i, j| if i == j { p[0] * p[0] } else { 0.0 });
    let h = hat_hessian(&eta, &BackgroundMetric::Flat);
    for lin in 0..g.len() {
        let i0 = g.axis_index(lin, 0);
        if i0 == 0 || i0 == 16 {
            continue;
        }
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((h.comp(&[0, 0, i, j])[lin] - want).abs() < 1e-9);
                assert!(h.comp(&[0, 1, i, j])[lin].abs() < 1e-9);
                assert!(h.comp(&[1, 1, i, j])[lin].abs() < 1e-9);
            }
        }
    }
}

fn round_self_hessian(res: usize) -> f64 {
    let g = GridSpec::new(vec![Axis::polar(PI, res), Axis::periodic(2.0 * PI, 8)]).unwrap();
    let bg = BackgroundMetric::round_polar(&g).unwrap();
    let ghat = bg.metric().unwrap().sym().clone();
    hat_hessian(&ghat, &bg).max_abs()
}

#[test]
fn round_background_is_parallel_for_itself() {
    let (e1, e2) = (round_self_hessian(32), round_self_hessian(64));
    assert!(e2 < 1e-2, "{e2}");
    assert!(e1 / e2 > 3.0, "{e1} -> {e2}");
}

#[test]
fn mollify_keeps_constants() {
    let g = GridSpec::torus(2, 1.0, 16).unwrap();
    let m = MetricField::new(SymField::constant(&g, &[vec![2.0, 0.3], vec![0.3, 1.0]])).unwrap();
    let s = mollify(&m, 0.1).unwrap();
    assert!(s.max_abs_diff(&m) < 1e-14);
}

#[test]
fn mollify_rejects_subcell_scale() {
    let g = GridSpec::torus(2, 1.0, 16).unwrap();
    assert!(mollify(&MetricField::identity(&g), 0.01).is_err());
}

#[test]
fn mollify_commutes_with_reflection() {
    let half = GridSpec::new(vec![Axis::reflect(1.0, 17), Axis::periodic(1.0, 16)]).unwrap();
    let g = double_metric(&random_smooth(&half, 0.2, 2, 11).unwrap()).unwrap();
    let s = mollify(&g, 4.0 * g.grid().h(0)).unwrap();
    assert_eq!(symmetry_residual(&s).unwrap(), 0.0);
}

#[test]
fn mollified_kink_converges_linearly_in_scale() {
    // even extension of 1 + a x has kinks at both mirrors; the Gaussian of
    // width eps moves each by a * eps * sqrt(2 / pi)
    let a = 0.5;
    let half = GridSpec::new(vec![Axis::reflect(1.0, 257), Axis::periodic(1.0, 8)]).unwrap();
    let g = kinked_warp(&half, a).unwrap();
    let errs: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&eps| {
            let e = mollify(&g, eps).unwrap().max_abs_diff(&g);
            let model = a * eps * (2.0 / PI).sqrt();
            assert!((e / model - 1.0).abs() < 0.1, "eps {eps}: {e} vs {model}");
            e
        })
        .collect();
    assert!(errs.windows(2).all(|w| (w[0] / w[1] - 2.0).abs() < 0.2));
}

#[test]
fn heat_smoothing_respects_parity() {
    let g = GridSpec::new(vec![Axis::reflect(PI, 33)]).unwrap();
    let odd = g.sample(|p| p[0].sin());
    let s = heat_smooth(&g, &odd, Parity::Odd, 0.2);
    assert!(s[0].abs() < 1e-15 && s[32].abs() < 1e-12);
    // a sine mode decays by exp(-eps^2 / 2) under the continuum kernel
    let want = (-0.02f64).exp();
    assert!((s[16] - want).abs() < 2e-3, "{}", s[16]);
}

#[test]
fn non_spd_node_is_reported() {
    let g = GridSpec::torus(2, 1.0, 8).unwrap();
    let mut s = SymField::identity(&g);
    s.get_mut(0, 0)[13] = -1.0;
    match MetricField::new(s) {
        Err(riccilab::Error::Positivity { node, .. }) => assert_eq!(node, 13),
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn inverse_and_frames_are_consistent(seed in 0u64..10_000, n in 2usize..5, amp in 0.05f64..0.4) {
        let g = GridSpec::torus(n, 1.0, 8).unwrap();
        let m = random_smooth(&g, amp, 2, seed).unwrap();
        for node in (0..g.len()).step_by(7) {
            let gm = m.sym().at(node);
            let inv = m.inverse().at(node);
            let f = m.frame(node);
            for i in 0..n {
                for j in 0..n {
                    let p: f64 = (0..n).map(|k| gm[i][k] * inv[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((p - want).abs() < 1e-12);
                    // F^T g F
                    let mut q = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            q += f[a * n + i] * gm[a][b] * f[b * n + j];
                        }
                    }
                    prop_assert!((q - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn mollify_keeps_reflection_parities(seed in 0u64..1000) {
        let half = GridSpec::new(vec![Axis::reflect(1.0, 9), Axis::periodic(1.0, 8)]).unwrap();
        let g = double_metric(&random_smooth(&half, 0.2, 1, seed).unwrap()).unwrap();
        let s = mollify(&g, 2.0 * g.grid().h(0)).unwrap();
        let grid = s.grid().clone();
        let mixed = &s.sym().comps[sym_index(2, 0, 1)];
        for lin in 0..grid.len() {
            if grid.axis_index(lin, 0) == 0 {
                prop_assert_eq!(mixed[lin], 0.0);
            }
        }
        prop_assert_eq!(symmetry_residual(&s).unwrap(), 0.0);
    }
}
