use proptest::prelude::*;

use nilgroup::eikonal::{backtrack_geodesic, solve_eikonal, FastMarcher, MarchOptions, Stencils};
use nilgroup::grid::{LiftedGrid, OrientationSampling, SpatialGrid};
use nilgroup::metrics::{CostField, Manifold, MetricSpec};

fn plane(n: usize, half: f64) -> LiftedGrid {
    LiftedGrid::new(
        SpatialGrid::centered(2, n, half).unwrap(),
        OrientationSampling::None,
    )
    .unwrap()
}

fn se2_grid(n: usize, half: f64, n_theta: usize) -> LiftedGrid {
    LiftedGrid::new(
        SpatialGrid::centered(2, n, half).unwrap(),
        OrientationSampling::circle(n_theta).unwrap(),
    )
    .unwrap()
}

fn cost_from(grid: &LiftedGrid, raw: &[f64]) -> CostField {
    CostField::new(grid.clone(), raw.iter().map(|&v| v as f32).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn acceptance_order_is_causal(raw in prop::collection::vec(0.1..1.0f64, 15 * 15 * 8)) {
        let grid = se2_grid(15, 1.4, 8);
        let cost = cost_from(&grid, &raw);
        let metric = MetricSpec::sub_riemannian(Manifold::SE2, 1.0, 0.2);
        let stencils = Stencils::build(&grid, &metric).unwrap();
        let mut fm = FastMarcher::new(&grid, &stencils, Some(cost.values()), MarchOptions::default());
        fm.add_source(grid.locate(&[0.0, 0.0], Some(&[1.0, 0.0])).unwrap());
        let mut last = 0.0;
        while let Some(node) = fm.step() {
            let u = fm.value(node);
            prop_assert!(u >= last - 1e-12, "accepted {u} after {last}");
            prop_assert!(fm.length(node) >= 0.0);
            last = u;
        }
    }

    #[test]
    fn larger_cost_gives_larger_distance(
        raw in prop::collection::vec(0.1..0.5f64, 21 * 21),
        extra in prop::collection::vec(0.0..0.5f64, 21 * 21),
    ) {
        let grid = plane(21, 2.0);
        let low = cost_from(&grid, &raw);
        let high_raw: Vec<f64> = raw.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let high = cost_from(&grid, &high_raw);
        let metric = MetricSpec::euclidean(Manifold::R2);
        let src = grid.locate(&[0.0, 0.0], None).unwrap();
        let a = solve_eikonal(&grid, &metric, Some(&low), &[src], MarchOptions::default()).unwrap();
        let b = solve_eikonal(&grid, &metric, Some(&high), &[src], MarchOptions::default()).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!(u <= &(v + 1e-12));
        }
    }
}

#[test]
fn sub_riemannian_distance_grows_as_epsilon_shrinks() {
    let grid = se2_grid(41, 2.0, 32);
    let src = grid.locate(&[0.0, 0.0], Some(&[1.0, 0.0])).unwrap();
    let solve = |eps: f64| {
        let m = MetricSpec::sub_riemannian(Manifold::SE2, 1.0, eps);
        solve_eikonal(&grid, &m, None, &[src], MarchOptions::default()).unwrap()
    };
    let fields: Vec<_> = [0.5, 0.25, 0.1].iter().map(|&e| solve(e)).collect();
    let probe = grid.locate(&[0.0, 1.0], Some(&[1.0, 0.0])).unwrap();
    let vals: Vec<f64> = fields.iter().map(|f| f.value(probe)).collect();
    assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
    let aligned = grid.locate(&[1.0, 0.0], Some(&[1.0, 0.0])).unwrap();
    let along: Vec<f64> = fields.iter().map(|f| f.value(aligned)).collect();
    assert!(along.iter().all(|v| (v - 1.0).abs() < 0.15), "{along:?}");
}

#[test]
fn backtracking_from_source_is_trivial() {
    let grid = plane(21, 2.0);
    let src = grid.locate(&[0.0, 0.0], None).unwrap();
    let f = solve_eikonal(
        &grid,
        &MetricSpec::euclidean(Manifold::R2),
        None,
        &[src],
        MarchOptions::default(),
    )
    .unwrap();
    let g = backtrack_geodesic(&f, None, src, 0.5).unwrap();
    assert!(g.spatial_length < 1e-12);
    assert_eq!(g.positions.len(), 1);
}

#[test]
fn backtracking_in_the_plane_follows_the_chord() {
    let grid = plane(101, 5.0);
    let src = grid.locate(&[0.0, 0.0], None).unwrap();
    let f = solve_eikonal(
        &grid,
        &MetricSpec::euclidean(Manifold::R2),
        None,
        &[src],
        MarchOptions::default(),
    )
    .unwrap();
    let end = grid.locate(&[3.0, 4.0], None).unwrap();
    let g = backtrack_geodesic(&f, None, end, 0.5).unwrap();
    assert!(
        (g.spatial_length - 5.0).abs() < 0.2,
        "length {}",
        g.spatial_length
    );
    let h = 0.1;
    for p in &g.positions {
        let off_line = (4.0 * p[0] - 3.0 * p[1]).abs() / 5.0;
        assert!(off_line < 1.5 * h, "{p:?} is {off_line} from the chord");
    }
    let last = g.positions.last().unwrap();
    assert!(last[0].hypot(last[1]) < 1.5 * h);
}

#[test]
fn sub_riemannian_backtrack_stays_near_horizontal() {
    let grid = se2_grid(61, 3.0, 32);
    let src = grid.locate(&[0.0, 0.0], Some(&[1.0, 0.0])).unwrap();
    let m = MetricSpec::sub_riemannian(Manifold::SE2, 1.0, 0.1);
    let f = solve_eikonal(&grid, &m, None, &[src], MarchOptions::default()).unwrap();
    let end = grid.locate(&[2.0, 0.2], Some(&[1.0, 0.0])).unwrap();
    let g = backtrack_geodesic(&f, None, end, 0.5).unwrap();
    let last = g.positions.last().unwrap();
    assert!(last[0].hypot(last[1]) < 0.25, "ended at {last:?}");
    for (p, o) in g.positions.iter().zip(&g.orientations) {
        assert!(p[1] > -0.15 && p[1] < 0.35, "{p:?}");
        let angle = o[1].atan2(o[0]);
        assert!(angle.abs() < 0.8, "orientation {angle} at {p:?}");
    }
    assert!(
        g.spatial_length > 1.9 && g.spatial_length < 2.5,
        "{}",
        g.spatial_length
    );
}
