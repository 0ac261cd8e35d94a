use super::*;
use crate::ptrnet::{ModelConfig, PtrNetModel};
use crate::tsp::generate_uniform_instance;
use proptest::prelude::*;

fn approx(a: City, b: City) -> bool {
    (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12
}

#[test]
fn normalize_shift_and_scale() {
    let pts = [City::new(10.0, 10.0), City::new(10.0, 12.0), City::new(12.0, 10.0)];
    let (n, t) = normalize_subcomponent(&pts);
    assert!(approx(n[0], City::new(0.0, 0.0)));
    assert!(approx(n[1], City::new(0.0, 1.0)));
    assert!(approx(n[2], City::new(1.0, 0.0)));
    assert_eq!(t.scale, 0.5);
}

#[test]
fn normalize_unit_square_is_identity() {
    let pts = [City::new(0.0, 0.0), City::new(1.0, 1.0), City::new(0.25, 0.75)];
    let (n, _) = normalize_subcomponent(&pts);
    assert_eq!(n, pts.to_vec());
}

#[test]
fn normalize_degenerate() {
    let (n, t) = normalize_subcomponent(&[City::new(3.0, 4.0)]);
    assert_eq!(n, vec![City::new(0.5, 0.5)]);
    assert_eq!(t.scale, 0.0);
    let (n, _) = normalize_subcomponent(&[City::new(3.0, 4.0); 3]);
    assert!(n.iter().all(|c| *c == City::new(0.5, 0.5)));
}

fn instance(cities: Vec<City>) -> TspInstance {
    TspInstance::new("t", cities).unwrap()
}

#[test]
fn tiny_clusters_bypass_solver() {
    struct Panics;
    impl SubSolver for Panics {
        fn name(&self) -> String {
            "panics".into()
        }
        fn solve(&self, _: &[City], _: &mut RngStream) -> Result<Vec<usize>> {
            panic!("should be bypassed")
        }
    }
    let inst = instance((0..3).map(|i| City::new(i as f64, 0.0)).collect());
    let d = Decomposition::from_clusters(vec![vec![2, 0], vec![1]], 2, 3).unwrap();
    let subs = solve_subcomponents(&inst, &d, &Panics, &RngStream::new(0)).unwrap();
    assert_eq!(subs, vec![vec![0, 2], vec![1]]);
}

#[test]
fn solver_failure_names_cluster() {
    struct Bad;
    impl SubSolver for Bad {
        fn name(&self) -> String {
            "bad".into()
        }
        fn solve(&self, c: &[City], _: &mut RngStream) -> Result<Vec<usize>> {
            Ok(vec![0; c.len()])
        }
    }
    let inst = instance((0..6).map(|i| City::new(i as f64, (i * i) as f64)).collect());
    let d = Decomposition::from_clusters(vec![vec![0, 1], vec![2, 3, 4, 5]], 4, 6).unwrap();
    match solve_subcomponents(&inst, &d, &Bad, &RngStream::new(0)) {
        Err(Error::Solver { cluster, .. }) => assert_eq!(cluster, 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn combine_concatenates() {
    let inst = instance((0..8).map(|i| City::new(i as f64, 0.0)).collect());
    let d = Decomposition::from_clusters(vec![vec![2, 4, 7], vec![1, 3], vec![0, 5, 6]], 3, 8).unwrap();
    let subs = vec![vec![4, 2, 7], vec![1, 3], vec![0, 6, 5]];
    let e = combine(&inst, &subs, &d, "x").unwrap();
    assert_eq!(e.tour.order(), &[4, 2, 7, 1, 3, 0, 6, 5]);
    assert_eq!(e.per_cluster_lengths.len(), 3);
    assert_eq!(e.per_cluster_lengths[1], 4.0);
}

#[test]
fn combine_single_cluster_is_identity() {
    let inst = instance((0..4).map(|i| City::new(i as f64, 1.0)).collect());
    let d = Decomposition::from_clusters(vec![vec![0, 1, 2, 3]], 4, 4).unwrap();
    let e = combine(&inst, &[vec![3, 1, 0, 2]], &d, "x").unwrap();
    assert_eq!(e.tour.order(), &[3, 1, 0, 2]);
}

#[test]
fn combine_rejects_coverage_mismatch() {
    let inst = instance((0..4).map(|i| City::new(i as f64, 1.0)).collect());
    let d = Decomposition::from_clusters(vec![vec![0, 1], vec![2, 3]], 2, 4).unwrap();
    assert!(combine(&inst, &[vec![0, 2], vec![1, 3]], &d, "x").is_err());
    assert!(combine(&inst, &[vec![0, 1]], &d, "x").is_err());
}

#[test]
fn seven_city_held_karp_matches_exhaustive() {
    let inst = generate_uniform_instance(7, &mut RngStream::new(42)).unwrap();
    let hk = held_karp(inst.cities()).unwrap();
    let hk_len = order_length(inst.cities(), &hk, DistanceMode::EuclideanExact);
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (1..7).collect();
    // Heap's algorithm over the six non-root cities
    let mut c = [0usize; 6];
    let mut eval = |p: &[usize]| {
        let mut o = vec![0];
        o.extend_from_slice(p);
        best = best.min(order_length(inst.cities(), &o, DistanceMode::EuclideanExact));
    };
    eval(&perm);
    let mut i = 0;
    while i < 6 {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            eval(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    assert!((hk_len - best).abs() < 1e-12);
}

#[test]
fn held_karp_sub_tours_are_exact_on_small_clusters() {
    let inst = generate_uniform_instance(60, &mut RngStream::new(3)).unwrap();
    let d = variant_knn(&inst, 8).unwrap();
    let subs = solve_subcomponents(&inst, &d, &HeldKarp, &RngStream::new(0)).unwrap();
    for (sub, cl) in subs.iter().zip(d.clusters()) {
        let coords: Vec<City> = cl.iter().map(|&i| inst.cities()[i]).collect();
        let opt = order_length(&coords, &held_karp(&coords).unwrap(), DistanceMode::EuclideanExact);
        let got = order_length(inst.cities(), sub, DistanceMode::EuclideanExact);
        assert!((got - opt).abs() < 1e-9);
    }
}

#[test]
fn held_karp_sub_tours_dominate_nearest_neighbor() {
    for s in 0..100 {
        let inst = generate_uniform_instance(100, &mut RngStream::new(1000 + s)).unwrap();
        let rng = RngStream::new(s);
        let hk = run_stage_one(&inst, 10, &HeldKarp, &rng, StageOneOptions::default()).unwrap();
        let nn = run_stage_one(&inst, 10, &NearestNeighbor, &rng, StageOneOptions::default()).unwrap();
        for (a, b) in hk.elite.per_cluster_lengths.iter().zip(&nn.elite.per_cluster_lengths) {
            assert!(*a <= b + 1e-9);
        }
    }
}

// Spliced elites are compared in the acceptance suite.

#[test]
fn normalization_invariance() {
    for s in 0..20 {
        let inst = generate_uniform_instance(80, &mut RngStream::new(s)).unwrap();
        let moved = instance(
            inst.cities()
                .iter()
                .map(|c| City::new(c.x * 64.0 + 8.0, c.y * 64.0 - 8.0))
                .collect(),
        );
        let d = variant_knn(&inst, 10).unwrap();
        for solver in [&HeldKarp as &dyn SubSolver, &NearestNeighbor, &TwoOpt] {
            let a = solve_subcomponents(&inst, &d, solver, &RngStream::new(1)).unwrap();
            let b = solve_subcomponents(&moved, &d, solver, &RngStream::new(1)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn polish_never_hurts() {
    let inst = generate_uniform_instance(200, &mut RngStream::new(9)).unwrap();
    let rng = RngStream::new(2);
    let plain = run_stage_one(&inst, 20, &NearestNeighbor, &rng, StageOneOptions::default()).unwrap();
    let pol = run_stage_one(&inst, 20, &NearestNeighbor, &rng, StageOneOptions { polish: true }).unwrap();
    for (a, b) in plain.elite.per_cluster_lengths.iter().zip(&pol.elite.per_cluster_lengths) {
        assert!(b <= &(a + 1e-9));
    }
}

#[test]
fn ptrnet_elite_beats_random_tours() {
    let model = PtrNetModel::new(ModelConfig::small(16), &mut RngStream::new(5));
    let solver = PtrNetSolver::new(model, "untrained");
    let mut rng = RngStream::new(77);
    let inst = generate_uniform_instance(1000, &mut rng).unwrap();
    let stage = run_stage_one(&inst, 20, &solver, &RngStream::new(6), StageOneOptions::default()).unwrap();
    validate_permutation(stage.elite.tour.order(), 1000).unwrap();
    let mean: f64 = (0..100)
        .map(|_| order_length(inst.cities(), &rng.permutation(1000), DistanceMode::EuclideanExact))
        .sum::<f64>()
        / 100.0;
    assert!(stage.elite.length(&inst) < mean);
    assert!(stage.elite.provenance.contains("untrained"));
}

#[test]
fn sample_best_of_m_is_reproducible() {
    let model = PtrNetModel::new(ModelConfig::small(8), &mut RngStream::new(5));
    let mut solver = PtrNetSolver::new(model, "m");
    solver.decoding = PtrDecoding::SampleBest(4);
    let inst = generate_uniform_instance(60, &mut RngStream::new(3)).unwrap();
    let d = variant_knn(&inst, 12).unwrap();
    let a = solve_subcomponents(&inst, &d, &solver, &RngStream::new(8)).unwrap();
    let b = solve_subcomponents(&inst, &d, &solver, &RngStream::new(8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exports() {
    let inst = instance(vec![City::new(0.0, 0.0), City::new(1.0, 0.0), City::new(1.0, 1.0), City::new(0.0, 1.0)]);
    let d = Decomposition::from_clusters(vec![vec![0, 1, 2, 3]], 4, 4).unwrap();
    let e = combine(&inst, &[vec![0, 1, 2, 3]], &d, "x").unwrap();
    assert_eq!(e.to_csv(), "position,city_index\n0,0\n1,1\n2,2\n3,3\n");
    let tf = crate::tsp::TourFile::parse(&e.to_tour_file(&inst)).unwrap();
    assert_eq!(tf.order, vec![0, 1, 2, 3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn elite_is_always_a_permutation(seed in any::<u64>(), n in 4usize..300, k in 2usize..26) {
        let inst = generate_uniform_instance(n, &mut RngStream::new(seed)).unwrap();
        let k = k.min(n / 2);
        let st = run_stage_one(&inst, k, &TwoOpt, &RngStream::new(seed), StageOneOptions::default()).unwrap();
        prop_assert!(validate_permutation(st.elite.tour.order(), n).is_ok());
        prop_assert_eq!(st.elite.tour.order().len(), n);
    }
}
