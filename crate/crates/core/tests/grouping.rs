use proptest::prelude::*;

use nilgroup::grouping::{
    analytic_table, check_structure, evaluate_grouping, perceptual_group, GraphRecord, KeyPoint,
    PairTable,
};
use nilgroup::metrics::Manifold;

/// Random symmetric table: `(n, distances, spatial lengths)` for `i < j`.
fn table() -> impl Strategy<Value = PairTable> {
    (2usize..24).prop_flat_map(|n| {
        let m = n * (n - 1) / 2;
        (
            Just(n),
            prop::collection::vec(prop_oneof![4 => 0.0..10.0f64, 1 => Just(f64::INFINITY)], m),
            prop::collection::vec(0.0..20.0f64, m),
        )
            .prop_map(|(n, d, l)| {
                let mut t = PairTable::new(n);
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        t.set(i, j, d[k], l[k]);
                        k += 1;
                    }
                }
                t
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn result_is_a_forest_with_degree_at_most_two(t in table(), s_max in 0.0..25.0f64) {
        let g = perceptual_group(&t, s_max);
        prop_assert!(check_structure(t.len(), &g.edges, s_max).is_ok());
        prop_assert!(g.degrees.iter().all(|&d| d <= 2));
        prop_assert!(g.edges.len() < t.len());
    }

    #[test]
    fn grouping_is_deterministic(t in table(), s_max in 0.0..25.0f64) {
        prop_assert_eq!(perceptual_group(&t, s_max), perceptual_group(&t.clone(), s_max));
    }

    #[test]
    fn edges_are_taken_in_order_of_distance(t in table(), s_max in 0.0..25.0f64) {
        let g = perceptual_group(&t, s_max);
        for w in g.edges.windows(2) {
            prop_assert!(w[0].distance <= w[1].distance);
        }
    }

    #[test]
    fn shrinking_s_max_shrinks_the_candidate_set(t in table(), a in 0.0..25.0f64, b in 0.0..25.0f64) {
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        let gs = perceptual_group(&t, small);
        let gl = perceptual_group(&t, large);
        for e in &gs.candidates {
            prop_assert!(gl.candidates.contains(e));
        }
        prop_assert!(gs.edges.iter().all(|e| e.spatial_length <= small));
    }

    #[test]
    fn scaling_distances_keeps_the_edges(t in table(), s_max in 0.0..25.0f64, k in 0.01..100.0f64) {
        let g = perceptual_group(&t, s_max);
        let h = perceptual_group(&t.scaled(k), s_max);
        let pairs = |g: &nilgroup::grouping::Grouping| g.edges.iter().map(|e| (e.i, e.j)).collect::<Vec<_>>();
        prop_assert_eq!(pairs(&g), pairs(&h));
    }
}

#[test]
fn two_parallel_lines_group_into_two_chains() {
    let mut pts = Vec::new();
    for row in 0..2 {
        for k in 0..6 {
            pts.push(KeyPoint {
                position: vec![5.0 * k as f64, 8.0 * row as f64],
                orientation: vec![1.0, 0.0],
                labels: vec![row],
            });
        }
    }
    let t = analytic_table(&pts, Manifold::SE2, 1.0, 44.0).unwrap();
    let g = perceptual_group(&t, 6.0);
    assert_eq!(g.edges.len(), 10);
    let labels: Vec<Vec<usize>> = pts.iter().map(|p| p.labels.clone()).collect();
    let acc = evaluate_grouping(&g.edges, &labels).unwrap();
    assert_eq!(acc.percent, 100.0);

    let json = serde_json::to_string(&GraphRecord::new(&pts, &g.edges)).unwrap();
    let back: GraphRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back.points(), pts);
    assert_eq!(back.edges, g.edges);
}

#[test]
fn a_removed_candidate_can_free_degree_for_later_edges() {
    let mut t = PairTable::new(4);
    t.set(0, 1, 1.0, 10.0);
    t.set(0, 2, 2.0, 1.0);
    t.set(0, 3, 3.0, 1.0);
    t.set(1, 2, 4.0, 1.0);
    assert_eq!(perceptual_group(&t, 20.0).edges.len(), 2);
    assert_eq!(perceptual_group(&t, 5.0).edges.len(), 3);
}
