use super::*;
use proptest::prelude::*;
use rand::Rng;

/// Smooth 2-D (or d-D) random walk with small steps.
fn random_walk(seed: u64, n: usize, d: usize) -> Vec<StatePoint> {
    smooth_random_walk(seed, n, d)
}

fn build(points: &[StatePoint], k: usize, cfg: &SearchConfig) -> KnnGraph {
    let mut g = KnnGraph::new(k, 0).unwrap();
    for p in points {
        g.insert(p.clone(), cfg).unwrap();
    }
    g
}

#[test]
fn new_graph() {
    let g = KnnGraph::new(3, 0).unwrap();
    assert_eq!(g.len(), 0);
    assert!(matches!(KnnGraph::new(0, 0), Err(Error::InvalidArgument(_))));
    assert!(SearchConfig::new(0, 1, 1).is_err());
}

#[test]
fn search_empty_graph() {
    let g = KnnGraph::new(3, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = g.search(&StatePoint::from([0.0]), &SearchConfig::default(), &mut rng);
    assert!(matches!(r, Err(Error::EmptyGraph)));
}

#[test]
fn single_node_search() {
    let cfg = SearchConfig::default();
    let mut g = KnnGraph::new(3, 0).unwrap();
    assert_eq!(g.insert(StatePoint::from([0.0, 0.0]), &cfg).unwrap(), 0);
    assert!(g.node(0).unwrap().edges.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = g.search(&StatePoint::from([3.0, 4.0]), &cfg, &mut rng).unwrap();
    assert_eq!(r.neighbors, vec![Neighbor { id: 0, distance: 5.0 }]);
}

#[test]
fn complete_phase_is_exact() {
    let cfg = SearchConfig::default();
    let pts: Vec<StatePoint> = [0.0, 5.0, 1.0, 3.0].iter().map(|&x| StatePoint::from([x])).collect();
    let g = build(&pts, 3, &cfg);
    for node in g.nodes() {
        assert_eq!(node.edges.len(), 3);
        let exact = brute_force_knn(&pts, &node.point, 4).unwrap();
        let ids: Vec<usize> = exact.iter().map(|n| n.id).filter(|&i| i != node.id).collect();
        assert_eq!(node.edges.iter().map(|e| e.id).collect::<Vec<_>>(), ids);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let small = build(&pts[..3], 3, &cfg);
    let r = small.search(&StatePoint::from([0.9]), &cfg, &mut rng).unwrap();
    let ids: Vec<usize> = r.neighbors.iter().map(|n| n.id).collect();
    assert_eq!(ids, vec![2, 0, 1]);
}

#[test]
fn brute_force_cases() {
    let pts: Vec<StatePoint> = [0.0, 10.0, 20.0].iter().map(|&x| StatePoint::from([x])).collect();
    let r = brute_force_knn(&pts, &StatePoint::from([12.0]), 2).unwrap();
    assert_eq!(r, vec![Neighbor { id: 1, distance: 2.0 }, Neighbor { id: 2, distance: 8.0 }]);
    let r = brute_force_knn(&pts, &StatePoint::from([20.0]), 1).unwrap();
    assert_eq!(r[0], Neighbor { id: 2, distance: 0.0 });
    assert!(matches!(brute_force_knn(&[], &StatePoint::from([0.0]), 1), Err(Error::EmptyInput(_))));
}

#[test]
fn brute_force_permutation_invariant_as_set() {
    use rand::seq::SliceRandom;
    let pts = random_walk(5, 500, 3);
    let q = StatePoint::from([0.3, -0.2, 0.1]);
    let a: HashSet<u64> = brute_force_knn(&pts, &q, 10)
        .unwrap()
        .iter()
        .map(|n| pts[n.id].coords()[0].to_bits())
        .collect();
    let mut shuffled = pts.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let b: HashSet<u64> = brute_force_knn(&shuffled, &q, 10)
        .unwrap()
        .iter()
        .map(|n| shuffled[n.id].coords()[0].to_bits())
        .collect();
    assert_eq!(a, b);
}

#[test]
fn dimension_mismatch_rejected() {
    let cfg = SearchConfig::default();
    let mut g = KnnGraph::new(2, 0).unwrap();
    g.insert(StatePoint::from([0.0, 0.0]), &cfg).unwrap();
    assert!(matches!(g.insert(StatePoint::from([0.0]), &cfg), Err(Error::InvalidArgument(_))));
}

#[test]
fn deterministic_given_seed() {
    let cfg = SearchConfig::new(10, 5, 2).unwrap();
    let pts = random_walk(3, 800, 2);
    assert_eq!(build(&pts, 3, &cfg), build(&pts, 3, &cfg));
}

#[test]
fn degree_and_edge_validity() {
    let cfg = SearchConfig::new(10, 5, 2).unwrap();
    let pts = random_walk(8, 1500, 3);
    let g = build(&pts, 4, &cfg);
    for node in g.nodes() {
        assert_eq!(node.edges.len(), 4);
        let ids: HashSet<usize> = node.edges.iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), 4);
        assert!(!ids.contains(&node.id));
        assert!(node.edges.windows(2).all(|w| by_distance_then_id(&w[0], &w[1]).is_lt()));
        for e in &node.edges {
            let d = node.point.distance(&g.nodes()[e.id].point);
            assert!((d - e.distance).abs() <= 1e-12);
        }
    }
}

#[test]
fn exhaustive_search_has_full_recall() {
    let pts = random_walk(4, 50, 2);
    let cfg = SearchConfig::new(50, 200, 2).unwrap();
    let g = build(&pts, 3, &cfg);
    let queries = random_walk(40, 30, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    assert_eq!(g.recall_at_k(&queries, &cfg, &mut rng).unwrap(), 1.0);
    let tiny = build(&pts[..3], 3, &cfg);
    assert_eq!(tiny.recall_at_k(&queries, &cfg, &mut rng).unwrap(), 1.0);
    assert!(matches!(g.recall_at_k(&[], &cfg, &mut rng), Err(Error::EmptyInput(_))));
}

#[test]
fn recall_reproducible() {
    let cfg = SearchConfig::new(20, 20, 2).unwrap();
    let pts = random_walk(12, 3000, 2);
    let g = build(&pts, 3, &cfg);
    let queries = random_walk(13, 200, 2);
    let a = g.recall_at_k(&queries, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = g.recall_at_k(&queries, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn descents_monotone_and_budget_respected() {
    let cfg = SearchConfig::new(20, 20, 2).unwrap();
    let pts = random_walk(21, 3000, 2);
    let g = build(&pts, 3, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for q in random_walk(22, 100, 2) {
        let r = g.search_traced(&q, &cfg, &mut rng).unwrap();
        assert!(r.touched <= cfg.touch_budget(3));
        for path in &r.descents {
            assert!(path.len() <= cfg.greedy_steps + 1);
            assert!(path.windows(2).all(|w| w[1] <= w[0]));
        }
        let exact = brute_force_knn(&pts, &q, 1).unwrap()[0].distance;
        for n in &r.neighbors {
            assert!(n.distance >= exact);
            assert_eq!(n.distance, g.nodes()[n.id].point.distance(&q));
        }
    }
}

#[test]
fn save_load_round_trip() {
    let cfg = SearchConfig::new(10, 5, 2).unwrap();
    let empty = KnnGraph::new(3, 0).unwrap();
    assert_eq!(KnnGraph::load(&empty.save(), 0).unwrap(), empty);
    let g = build(&random_walk(6, 1000, 3), 3, &cfg);
    let bytes = g.save();
    let back = KnnGraph::load(&bytes, 0).unwrap();
    assert_eq!(back, g);
    assert_eq!(back.save(), bytes);
    let small = build(&random_walk(6, 2, 3), 3, &cfg);
    assert_eq!(KnnGraph::load(&small.save(), 0).unwrap(), small);
}

#[test]
fn load_rejects_malformed() {
    let cfg = SearchConfig::new(10, 5, 2).unwrap();
    let bytes = build(&random_walk(6, 20, 2), 3, &cfg).save();
    match KnnGraph::load(&bytes[..bytes.len() - 3], 0) {
        Err(Error::GraphFormat { offset, .. }) => assert!(offset > 22),
        other => panic!("expected format error, got {other:?}"),
    }
    assert!(matches!(KnnGraph::load(b"KNNX", 0), Err(Error::GraphFormat { offset: 0, .. })));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(KnnGraph::load(&extra, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn degree_invariant_any_sequence(
        pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..60),
        k in 1usize..5,
    ) {
        let cfg = SearchConfig::new(5, 3, 2).unwrap();
        let pts: Vec<StatePoint> = pts.into_iter().map(StatePoint::new).collect();
        let g = build(&pts, k, &cfg);
        let n = g.len();
        for node in g.nodes() {
            prop_assert_eq!(node.edges.len(), k.min(n - 1));
        }
        prop_assert_eq!(KnnGraph::load(&g.save(), 0).unwrap(), g);
    }
}

#[test]
fn wider_graph_is_navigable() {
    let cfg = SearchConfig::new(20, 20, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<StatePoint> = (0..4000)
        .map(|_| StatePoint::from([rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]))
        .collect();
    let queries: Vec<StatePoint> = (0..200)
        .map(|_| StatePoint::from([rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]))
        .collect();
    let g = build(&pts, 10, &cfg);
    assert!(g.recall_at_k(&queries, &cfg, &mut rng).unwrap() > 0.85);
    assert!(build(&pts[..2000], 10, &cfg).edge_accuracy() > 0.9);
}
