use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riccilab::grid::{Axis, FdOrder, GridSpec, NodeIndex, Parity};

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn sin_derivative_error_below_taylor_bound() {
    let g = GridSpec::new(vec![Axis::periodic(2.0 * PI, 64)]).unwrap();
    let f = g.sample(|p| p[0].sin());
    let d = g.diff1(&f, 0, None).unwrap();
    let exact = g.sample(|p| p[0].cos());
    assert!(max_err(&d, &exact) < 2e-3);
}

#[test]
fn linear_field_has_zero_derivative_at_even_mirror() {
    let g = GridSpec::new(vec![Axis::reflect(1.0, 17), Axis::periodic(1.0, 8)]).unwrap();
    let f = g.sample(|p| p[0]);
    let d = g.diff1(&f, 0, Some(Parity::Even)).unwrap();
    for lin in 0..g.len() {
        let i = g.axis_index(lin, 0);
        if i == 0 || i == 16 {
            assert!(d[lin].abs() < 1e-14);
        } else {
            assert!((d[lin] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn quadratic_has_constant_second_derivative_in_interior() {
    let g = GridSpec::new(vec![Axis::reflect(1.0, 33)]).unwrap();
    let f = g.sample(|p| p[0] * p[0]);
    let d = g.diff2(&f, 0, 0, Some(Parity::Even)).unwrap();
    for (i, v) in d.iter().enumerate().take(32).skip(1) {
        assert!((v - 2.0).abs() < 1e-9, "node {i}: {v}");
    }
}

fn mixed_error(n: usize, order: FdOrder) -> f64 {
    let g = GridSpec::with_order(vec![Axis::periodic(2.0 * PI, n); 2], order).unwrap();
    let f = g.sample(|p| p[0].sin() * p[1].sin());
    let d = g.diff2(&f, 0, 1, None).unwrap();
    let d_rev = g.diff2(&f, 1, 0, None).unwrap();
    assert_eq!(d, d_rev);
    max_err(&d, &g.sample(|p| p[0].cos() * p[1].cos()))
}

#[test]
fn mixed_derivative_converges_at_second_order() {
    let r = mixed_error(32, FdOrder::Second) / mixed_error(64, FdOrder::Second);
    assert!((3.5..4.5).contains(&r), "ratio {r}");
}

#[test]
fn fourth_order_stencils_converge_faster() {
    let r = mixed_error(32, FdOrder::Fourth) / mixed_error(64, FdOrder::Fourth);
    assert!(r > 12.0, "ratio {r}");
}

#[test]
fn mixed_derivative_of_constant_vanishes() {
    let g = GridSpec::new(vec![Axis::reflect(1.0, 9), Axis::periodic(1.0, 8)]).unwrap();
    let f = vec![3.5; g.len()];
    let d = g.diff2(&f, 0, 1, Some(Parity::Even)).unwrap();
    assert!(d.iter().all(|v| *v == 0.0));
}

fn composition_gap(n: usize) -> f64 {
    let g = GridSpec::torus(2, 2.0 * PI, n).unwrap();
    let f = g.sample(|p| (p[0] + 2.0 * p[1]).sin() + (p[0]).cos());
    let once = g.diff1(&f, 0, None).unwrap();
    let twice = g.diff1(&once, 0, None).unwrap();
    max_err(&twice, &g.diff2(&f, 0, 0, None).unwrap())
}

#[test]
fn repeated_first_derivative_matches_second_at_second_order() {
    let r = composition_gap(32) / composition_gap(64);
    assert!((3.0..5.0).contains(&r), "ratio {r}");
}

#[test]
fn odd_field_vanishes_at_mirror_and_even_field_is_flat_there() {
    let g = GridSpec::new(vec![Axis::reflect(PI, 33)]).unwrap();
    let odd = g.sample(|p| p[0].sin());
    let even = g.sample(|p| p[0].cos());
    assert!(odd[0].abs() < 1e-15 && odd[32].abs() < 1e-12);
    let d = g.diff1(&even, 0, Some(Parity::Even)).unwrap();
    assert!(d[0].abs() < 1e-15 && d[32].abs() < 1e-15);
    // the odd extension keeps the cosine slope at the mirror
    let d = g.diff1(&odd, 0, Some(Parity::Odd)).unwrap();
    assert!((d[0] - 1.0).abs() < 1e-2);
}

#[test]
fn interpolation_is_exact_at_nodes_and_on_linears() {
    let g = GridSpec::new(vec![Axis::reflect(1.0, 17), Axis::periodic(1.0, 8)]).unwrap();
    let f = g.sample(|p| (3.0 * p[0]).exp() + (2.0 * PI * p[1]).sin());
    for lin in 0..g.len() {
        assert_eq!(g.interpolate(&f, &g.point(lin), Parity::Even), f[lin]);
    }
    let lin_f = g.sample(|p| 2.0 * p[0] - 1.0);
    let x = 0.5 + 0.5 * g.h(0);
    let v = g.interpolate(&lin_f, &[x, 0.3], Parity::Even);
    assert!((v - (2.0 * x - 1.0)).abs() < 1e-13);
}

#[test]
fn interpolation_reproduces_cubics_in_interval_interior() {
    let g = GridSpec::new(vec![Axis::reflect(2.0, 33)]).unwrap();
    let p = |x: f64| 1.0 - x + 0.5 * x * x - 0.25 * x * x * x;
    let f = g.sample(|q| p(q[0]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = rng.random_range(2.0 * g.h(0)..2.0 - 2.0 * g.h(0));
        assert!((g.interpolate(&f, &[x], Parity::Even) - p(x)).abs() < 1e-12);
    }
}

#[test]
fn sin_interpolation_error_below_fourth_order_bound() {
    let g = GridSpec::new(vec![Axis::periodic(2.0 * PI, 32)]).unwrap();
    let f = g.sample(|p| p[0].sin());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let worst = (0..1000)
        .map(|_| {
            let x: f64 = rng.random_range(-10.0..10.0);
            (g.interpolate(&f, &[x], Parity::Even) - x.sin()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "worst {worst}");
}

#[test]
fn odd_interpolation_changes_sign_across_mirror() {
    let g = GridSpec::new(vec![Axis::reflect(PI, 33)]).unwrap();
    let f = g.sample(|p| p[0].sin());
    let v = g.interpolate(&f, &[-0.4], Parity::Odd);
    assert!((v - (-0.4f64).sin()).abs() < 1e-5);
}

#[test]
fn too_few_nodes_or_bad_extent_rejected() {
    assert!(GridSpec::new(vec![Axis::periodic(1.0, 7)]).is_err());
    assert!(GridSpec::new(vec![Axis::periodic(0.0, 8)]).is_err());
    assert!(GridSpec::new(vec![Axis::periodic(f64::NAN, 8)]).is_err());
}

proptest! {
    #[test]
    fn linearisation_is_bijective(a in 8usize..12, b in 8usize..12, c in 8usize..12, seed in 0u64..1000) {
        let g = GridSpec::new(vec![Axis::reflect(1.0, a), Axis::periodic(1.0, b), Axis::periodic(2.0, c)]).unwrap();
        let lin = (seed as usize) % g.len();
        let idx = NodeIndex::from_linear(&g, lin);
        prop_assert_eq!(idx.linear(&g), lin);
        for (ax, &i) in idx.0.iter().enumerate() {
            prop_assert_eq!(g.axis_index(lin, ax), i);
        }
    }

    #[test]
    fn periodic_derivative_commutes_with_shift(shift in 0usize..16, seed in 0u64..100) {
        let g = GridSpec::new(vec![Axis::periodic(1.0, 16)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = (0..16).map(|i| f[(i + shift) % 16]).collect();
        let d = g.diff1(&f, 0, None).unwrap();
        let ds = g.diff1(&shifted, 0, None).unwrap();
        for i in 0..16 {
            prop_assert!((ds[i] - d[(i + shift) % 16]).abs() < 1e-12);
        }
    }
}
