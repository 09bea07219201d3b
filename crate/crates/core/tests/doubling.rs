use proptest::prelude::*;
use riccilab::curvature::boundary_form;
use riccilab::deturck::{flow, FlowOptions, FlowTrajectory};
use riccilab::doubling::{
    boundary_monitor, double_metric, doubled_grid, half_grid, mirror_slices, reflect, restrict, symmetry_residual,
};
use riccilab::grid::{Axis, GridSpec, Parity};
use riccilab::parabolic::TimeMesh;
use riccilab::presets::{kinked_warp, random_smooth};
use riccilab::tensor::{sym_index, MetricField, SymField};
use riccilab::Error;

fn half(cells: usize) -> riccilab::grid::Grid {
    GridSpec::new(vec![Axis::reflect(1.0, cells + 1), Axis::periodic(1.0, 8)]).unwrap()
}

fn product(grid: &riccilab::grid::Grid) -> MetricField {
    MetricField::new(SymField::from_fn(grid, |p, i, j| match (i, j) {
        (0, 0) => 1.0,
        (1, 1) => 1.0 + 0.3 * (std::f64::consts::TAU * p[1]).sin(),
        _ => 0.0,
    }))
    .unwrap()
}

#[test]
fn grids_double_and_halve() {
    let h = half(16);
    let d = doubled_grid(&h).unwrap();
    assert_eq!(d.axes[0], Axis::periodic(2.0, 32));
    assert_eq!(d.h(0), h.h(0));
    assert_eq!(*half_grid(&d).unwrap(), *h);
    assert!(doubled_grid(&d).is_err());
    assert!(half_grid(&h).is_err());
    assert_eq!(mirror_slices(&d).iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 16]);
}

#[test]
fn product_metric_doubles_to_totally_geodesic_mirrors() {
    let g = double_metric(&product(&half(16))).unwrap();
    assert_eq!(symmetry_residual(&g).unwrap(), 0.0);
    for (slice, side) in mirror_slices(g.grid()) {
        assert!(boundary_form(&g, 0, slice, side).unwrap().norm() < 1e-14);
    }
}

#[test]
fn linear_warp_doubles_to_absolute_value() {
    let g = double_metric(&kinked_warp(&half(16), 0.5).unwrap()).unwrap();
    let grid = g.grid();
    for lin in 0..grid.len() {
        let x = grid.coord(lin, 0);
        let dist = if x <= 1.0 { x } else { 2.0 - x };
        assert!((g.get(1, 1)[lin] - (1.0 + 0.5 * dist)).abs() < 1e-14);
        assert_eq!(g.get(0, 0)[lin], 1.0);
    }
}

#[test]
fn doubling_round_trips_bit_for_bit() {
    let h = MetricField::new(SymField::from_fn(&half(16), |p, i, j| match (i, j) {
        (0, 1) | (1, 0) => 0.1 * p[0] * (1.0 - p[0]) * (std::f64::consts::TAU * p[1]).cos(),
        _ if i == j => 1.0 + 0.2 * p[0] * p[0] + 0.1 * i as f64,
        _ => 0.0,
    }))
    .unwrap();
    let d = double_metric(&h).unwrap();
    let back = restrict(&d).unwrap();
    assert_eq!(back.sym().comps, h.sym().comps);
    assert_eq!(double_metric(&back).unwrap().sym().comps, d.sym().comps);
}

#[test]
fn asymmetric_bump_shows_in_residual() {
    let d = double_metric(&random_smooth(&half(16), 0.2, 2, 5).unwrap()).unwrap();
    let mut s = d.sym().clone();
    let lin = 3 * d.grid().stride(0) + 2;
    s.get_mut(1, 1)[lin] += 1e-3;
    let bumped = MetricField::new(s).unwrap();
    assert!((symmetry_residual(&bumped).unwrap() - 1e-3).abs() < 1e-15);
    let partner = (32 - 3) * d.grid().stride(0) + 2;
    assert_eq!(reflect(&bumped).unwrap().get(1, 1)[partner], bumped.get(1, 1)[lin]);
}

#[test]
fn mixed_terms_on_mirror_are_rejected() {
    let grid = half(16);
    let g = MetricField::new(SymField::from_fn(&grid, |_, i, j| if i == j { 1.0 } else { 0.1 })).unwrap();
    match double_metric(&g) {
        Err(Error::IllPosedReflection { slice: 0, component: 1, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn monitor_sees_no_form_on_product_flow() {
    let g0 = double_metric(&product(&half(16))).unwrap();
    let traj = flow(&g0, &TimeMesh::graded(0.01, 10, 2.0).unwrap(), &FlowOptions::default()).into_result().unwrap();
    for row in boundary_monitor(&traj).unwrap() {
        assert!(row.a_norm < 1e-12 && row.h_max_abs < 1e-12);
    }
}

/// Rows `(t, |A|, max |H|, 10 (symmetry residual + h^2))`.
fn monitor(g0: &MetricField, cells: usize) -> Vec<(f64, f64, f64, f64)> {
    let mesh = TimeMesh::graded(0.01, 8 * (cells / 16).pow(2), 2.0).unwrap();
    let traj = flow(g0, &mesh, &FlowOptions::default()).into_result().unwrap();
    let res = traj.metrics.iter().map(|g| symmetry_residual(g).unwrap()).fold(0.0, f64::max);
    let h = 1.0 / cells as f64;
    boundary_monitor(&traj).unwrap().into_iter().map(|r| (r.t, r.a_norm, r.h_max_abs, 10.0 * (res + h * h))).collect()
}

fn kink_monitor(cells: usize) -> Vec<(f64, f64, f64, f64)> {
    monitor(&double_metric(&kinked_warp(&half(cells), 0.5).unwrap()).unwrap(), cells)
}

#[test]
fn kinked_warp_becomes_totally_geodesic_under_refinement() {
    let coarse = kink_monitor(16);
    let fine = kink_monitor(32);
    // first graded step: the initial kink is still visible
    assert!(coarse[1].1 > 0.02 && fine[1].1 > 0.02, "{} {}", coarse[1].1, fine[1].1);
    let (ac, af) = (coarse.last().unwrap().1, fine.last().unwrap().1);
    assert!(af < 0.5 * ac, "{ac} -> {af}");
    // once the kink has smoothed out the mirrors are minimal
    for (t, _, hmax, bound) in coarse.iter().chain(&fine) {
        if *t >= 0.005 {
            assert!(hmax <= bound, "t {t}: {hmax} > {bound}");
        }
    }
}

#[test]
fn smooth_symmetric_flow_has_minimal_mirrors() {
    let g0 = double_metric(&random_smooth(&half(32), 0.2, 2, 8).unwrap()).unwrap();
    for (t, _, hmax, bound) in monitor(&g0, 32) {
        assert!(hmax <= bound, "t {t}: {hmax} > {bound}");
    }
}

#[test]
fn monitor_refuses_asymmetric_trajectory() {
    let grid = doubled_grid(&half(16)).unwrap();
    let g = random_smooth(&grid, 0.2, 2, 1).unwrap();
    let traj = FlowTrajectory {
        mesh: TimeMesh::uniform(1.0, 1).unwrap(),
        stored: vec![0],
        metrics: vec![g],
        diagnostics: vec![],
        failure: None,
    };
    assert!(matches!(boundary_monitor(&traj), Err(Error::Asymmetric(_))));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn reflection_is_an_involution_with_parity_table(seed in 0u64..10_000, n in 2usize..4) {
        let axes = std::iter::once(Axis::reflect(1.0, 9)).chain((1..n).map(|_| Axis::periodic(1.0, 8))).collect();
        let h = random_smooth(&GridSpec::new(axes).unwrap(), 0.2, 1, seed).unwrap();
        let d = double_metric(&h).unwrap();
        let grid = doubled_grid(h.grid()).unwrap();
        let g = random_smooth(&grid, 0.2, 2, seed).unwrap();
        let twice = reflect(&reflect(&g).unwrap()).unwrap();
        prop_assert_eq!(&twice.sym().comps, &g.sym().comps);
        let rd = reflect(&d).unwrap();
        prop_assert_eq!(&rd.sym().comps, &d.sym().comps);
        for a in 0..n {
            for b in a..n {
                let want = if (a == 0) != (b == 0) { Parity::Odd } else { Parity::Even };
                prop_assert_eq!(d.sym().parity(sym_index(n, a, b)), want);
            }
        }
    }
}
