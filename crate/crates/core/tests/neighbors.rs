mod common;

use clipped_metrics::{Backend, FeatureMatrix, NeighborIndex};
use common::{dist, gaussian, gridded, others_sorted, rng};
use proptest::prelude::*;
use rand::Rng;

fn brute_knn(points: &FeatureMatrix, q: &[f64], k: usize, skip: Option<usize>) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..points.n())
        .filter(|&i| Some(i) != skip)
        .map(|i| (dist(q, points.row(i)), i))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.truncate(k);
    v
}

fn assert_knn_matches(points: &FeatureMatrix, queries: &FeatureMatrix, k: usize, exclude_self: bool) {
    for backend in [Backend::Tree, Backend::Brute] {
        let index = NeighborIndex::build(points, backend);
        let table = index.knn_distances(queries, k, exclude_self).unwrap();
        for q in 0..queries.n() {
            let want = brute_knn(points, queries.row(q), k, exclude_self.then_some(q));
            let got_d = table.distances(q);
            let got_i = table.indices(q);
            for (j, &(d, i)) in want.iter().enumerate() {
                assert!((got_d[j] - d).abs() <= 1e-12, "{backend:?} q={q} rank {j}: {} vs {d}", got_d[j]);
                assert_eq!(got_i[j], i, "{backend:?} q={q} rank {j}");
            }
        }
    }
}

#[test]
fn thousand_gaussian_points_all_5nn_agree() {
    let mut r = rng(1);
    let pts = gaussian(&mut r, 1000, 8);
    assert_knn_matches(&pts, &pts, 5, true);
    let tree = NeighborIndex::build(&pts, Backend::Tree).knn_self(5).unwrap();
    let brute = NeighborIndex::build(&pts, Backend::Brute).knn_self(5).unwrap();
    assert_eq!(tree, brute);
}

#[test]
fn line_nnd_example() {
    let pts = FeatureMatrix::from_column(&[0.0, 1.0, 3.0]).unwrap();
    for backend in [Backend::Tree, Backend::Brute] {
        let t = NeighborIndex::build(&pts, backend).knn_self(1).unwrap();
        assert_eq!(t.kth_distances(), vec![1.0, 1.0, 2.0]);
    }
}

#[test]
fn degenerate_sizes_and_k_bounds() {
    let one = FeatureMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
    let three = FeatureMatrix::from_column(&[0.0, 1.0, 3.0]).unwrap();
    for backend in [Backend::Tree, Backend::Brute] {
        let idx = NeighborIndex::build(&one, backend);
        assert_eq!(idx.len(), 1);
        assert!(idx.knn_self(1).is_err());
        assert_eq!(idx.knn_distances(&one, 1, false).unwrap().distances(0), &[0.0]);

        let idx = NeighborIndex::build(&three, backend);
        assert!(idx.knn_self(3).is_err());
        assert!(idx.knn_self(0).is_err());
        let q = FeatureMatrix::from_column(&[1.0]).unwrap();
        assert_eq!(idx.knn_distances(&q, 1, false).unwrap().distances(0), &[0.0]);
    }
}

#[test]
fn duplicates_come_first_with_distance_zero() {
    let pts = FeatureMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [4.0, 5.0], [0.0, 0.0]]).unwrap();
    for backend in [Backend::Tree, Backend::Brute] {
        let t = NeighborIndex::build(&pts, backend).knn_self(2).unwrap();
        for q in 0..3 {
            assert_eq!(t.distances(q), &[0.0, 0.0]);
        }
        assert_eq!(t.indices(0), &[1, 2]);
        assert_eq!(t.indices(2), &[0, 1]);
    }
}

#[test]
fn closed_ball_radius_queries() {
    let pts = FeatureMatrix::from_column(&[0.0, 1.0, 3.0]).unwrap();
    for backend in [Backend::Tree, Backend::Brute] {
        let idx = NeighborIndex::build(&pts, backend);
        assert_eq!(idx.count_within(&[1.0], 0.0).count(), 1);
        assert_eq!(idx.count_within(&[2.0], 0.5).count(), 0);
        assert_eq!(idx.count_within(&[2.0], 1.0).indices, vec![1, 2]);
    }
}

#[test]
fn radius_counts_match_oracle_on_random_instance() {
    let mut r = rng(2);
    let pts = gaussian(&mut r, 200, 4);
    let tree = NeighborIndex::build(&pts, Backend::Tree);
    let brute = NeighborIndex::build(&pts, Backend::Brute);
    for _ in 0..100 {
        let center: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
        let radius = r.random_range(0.0..2.5);
        let want: Vec<usize> = (0..pts.n()).filter(|&i| dist(&center, pts.row(i)) <= radius).collect();
        assert_eq!(tree.count_within(&center, radius).indices, want);
        assert_eq!(brute.count_within(&center, radius).indices, want);
    }
}

#[test]
fn ball_through_kth_neighbour_contains_it() {
    let mut r = rng(3);
    let pts = gridded(&mut r, 300, 3);
    for backend in [Backend::Tree, Backend::Brute] {
        let idx = NeighborIndex::build(&pts, backend);
        let t = idx.knn_self(5).unwrap();
        for i in 0..pts.n() {
            let radius = t.nth_distance(i, 5);
            let inside = idx.count_within(pts.row(i), radius).count() - 1;
            let expect = others_sorted(&pts, i).iter().filter(|(d, _)| *d <= radius).count();
            assert_eq!(inside, expect);
            assert!(inside >= 5);
        }
    }
}

fn matrix_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = FeatureMatrix> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![-4i32..=4, -1000i32..=1000], n * d).prop_map(move |v| {
            let data = v.into_iter().map(|x| x as f64 / 4.0).collect();
            FeatureMatrix::from_flat(data, n, d).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backends_agree_exactly(points in matrix_strategy(120, 16), k in 1usize..6) {
        prop_assume!(k < points.n());
        let tree = NeighborIndex::build(&points, Backend::Tree).knn_self(k).unwrap();
        let brute = NeighborIndex::build(&points, Backend::Brute).knn_self(k).unwrap();
        prop_assert_eq!(&tree, &brute);
        for q in 0..points.n() {
            let want = brute_knn(&points, points.row(q), k, Some(q));
            let ids: Vec<usize> = want.iter().map(|p| p.1).collect();
            prop_assert_eq!(tree.indices(q), ids.as_slice());
        }
    }

    #[test]
    fn count_within_is_monotone_in_radius(points in matrix_strategy(80, 6), r1 in 0.0f64..50.0, extra in 0.0f64..50.0) {
        let idx = NeighborIndex::build(&points, Backend::Tree);
        let center = points.row(0).to_vec();
        let small = idx.count_within(&center, r1).count();
        let large = idx.count_within(&center, r1 + extra).count();
        prop_assert!(small <= large);
        prop_assert!(small >= 1);
    }

    #[test]
    fn triangle_inequality(a in prop::collection::vec(-1e3f64..1e3, 7), b in prop::collection::vec(-1e3f64..1e3, 7), c in prop::collection::vec(-1e3f64..1e3, 7)) {
        let d = |x: &[f64], y: &[f64]| clipped_metrics::distance(x, y).unwrap();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
    }
}
