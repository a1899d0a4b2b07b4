#[path = "support/oracles.rs"]
mod oracles;

use guardcert::cluster::{core_distances, cosine_distance_matrix, hdbscan, mutual_reachability_mst};
use guardcert::rect::{rotate_head, single_rect, RectSpec, Rotation};
use guardcert::types::{ActivationSet, ClassifierHead};
use guardcert::verify::verify_rect;
use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, repeat_dirs: bool) -> ActivationSet {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if repeat_dirs && i > 0 && rng.random_bool(0.3) {
            // same direction as an earlier point, different length
            let src = rows[rng.random_range(0..i)].clone();
            let s = rng.random_range(0.5..3.0);
            rows.push(src.iter().map(|v| v * s).collect());
        } else {
            rows.push((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    ActivationSet::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn hdbscan_matches_top_down_oracle(
        seed in any::<u64>(),
        n in 2usize..=12,
        d in 2usize..=4,
        m_frac in 0.0f64..1.0,
        repeat in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, d, repeat);
        let m = 2 + ((n - 2) as f64 * m_frac) as usize;
        let got = hdbscan(&pts, m).unwrap();
        prop_assert_eq!(got.labels, hdbscan_oracle(&pts, m));
    }

    #[test]
    fn prim_tree_has_minimum_weight(seed in any::<u64>(), n in 2usize..=15, m in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 3, true);
        let dist = cosine_distance_matrix(&pts).unwrap();
        let core = core_distances(&dist, n, m);
        let edges = mutual_reachability_mst(&dist, &core, n);
        prop_assert_eq!(edges.len(), n - 1);
        let total: f64 = edges.iter().map(|e| e.weight).sum();
        let want = kruskal_weight(&mutual_reachability(&pts, m));
        prop_assert!((total - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn rotated_rect_matches_corner_enumeration(seed in any::<u64>(), d in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..d + 3)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let rect: RectSpec = single_rect(&ActivationSet::from_rows(&rows).unwrap()).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let head = ClassifierHead::new(w, rng.random_range(-1.0..1.0)).unwrap();
        let rotated = rotate_head(&head, rect.rotation()).unwrap();
        let cert = verify_rect(&rotated, &rect, 0.5).unwrap();
        let oracle = corner_min_score(rotated.weights(), rotated.bias(), rect.lower(), rect.upper());
        prop_assert!((cert.score_min - oracle).abs() <= 1e-9);
    }
}

#[test]
fn bundles_split_cleanly() {
    let (pts, origin) = guardcert::synth::cosine_bundles(50, 8, 0.15, 11).unwrap();
    let out = hdbscan(&pts, 10).unwrap();
    assert_eq!(out.num_clusters, 2);
    assert_eq!(out.labels, hdbscan_oracle(&pts, 10));
    for (l, o) in out.labels.iter().zip(&origin) {
        assert_eq!(*l, *o as i64);
    }
}

#[test]
fn identity_rotation_keeps_head() {
    let head = ClassifierHead::new(vec![1.0, -2.0, 0.5], 0.3).unwrap();
    assert_eq!(rotate_head(&head, &Rotation::identity(3)).unwrap(), head);
}
