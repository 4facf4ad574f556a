use nilgroup::grid::{OrientationSampling, SpatialGrid};
use nilgroup::lifting::{lift_mask, max_project, LiftParams, OrientationVolume};
use proptest::prelude::*;

const N: usize = 61;

fn draw_line(angle: f64) -> (SpatialGrid, Vec<bool>) {
    let g = SpatialGrid::unit(vec![N, N]).unwrap();
    let mut m = vec![false; g.len()];
    let c = (N / 2) as f64;
    let (s, co) = angle.sin_cos();
    let mut t = -25.0;
    while t <= 25.0 {
        let i = (c + t * co).round() as usize;
        let j = (c + t * s).round() as usize;
        m[g.index([i, j, 0])] = true;
        t += 0.25;
    }
    (g, m)
}

/// Share of the orientation-axis mass within two samples of the line angle
/// or its opposite.
fn concentration(v: &OrientationVolume, s: usize, angle: f64) -> f64 {
    let n = v.grid.n_orientations();
    let step = std::f64::consts::TAU / n as f64;
    let total: f64 = (0..n).map(|o| v.at(s, o) as f64).sum();
    let near: f64 = (0..n)
        .filter(|&o| {
            let d = (o as f64 * step - angle).rem_euclid(std::f64::consts::PI);
            d.min(std::f64::consts::PI - d) <= 2.0 * step + 1e-9
        })
        .map(|o| v.at(s, o) as f64)
        .sum();
    near / total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn line_lift_concentrates_near_true_angle(angle in 0.0..std::f64::consts::PI) {
        let (g, m) = draw_line(angle);
        let o = OrientationSampling::circle(32).unwrap();
        let v = lift_mask(&m, &g, &o, &LiftParams::default()).unwrap();
        let c = (N / 2) as f64;
        for t in [-8.0, 0.0, 8.0] {
            let p = [c + t * angle.cos(), c + t * angle.sin()];
            let s = g.index([p[0].round() as usize, p[1].round() as usize, 0]);
            prop_assume!(m[s]);
            let share = concentration(&v, s, angle);
            prop_assert!(share >= 0.6, "share {share} at t={t}");
        }
    }

    #[test]
    fn values_are_normalized(angle in 0.0..std::f64::consts::PI) {
        let (g, m) = draw_line(angle);
        let v = lift_mask(&m, &g, &OrientationSampling::circle(16).unwrap(), &LiftParams::default()).unwrap();
        prop_assert!(v.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert_eq!(v.values.iter().copied().fold(0.0f32, f32::max), 1.0);
        let mp = max_project(&v);
        for o in 0..16 {
            for s in 0..g.len() {
                prop_assert!(mp[s] >= v.at(s, o));
            }
        }
    }
}

#[test]
fn response_vanishes_far_from_mask() {
    let (g, m) = draw_line(0.3);
    let v = lift_mask(
        &m,
        &g,
        &OrientationSampling::circle(32).unwrap(),
        &LiftParams::default(),
    )
    .unwrap();
    let mp = max_project(&v);
    assert_eq!(mp[g.index([2, N - 3, 0])], 0.0);
}
