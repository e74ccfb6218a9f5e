use std::collections::HashSet;

use hbias::hierarchy::{DistanceMatrix, Hierarchy};
use hbias::io;
use hbias::labelspace::{project_log, random_isomorphic, LabelSpace, Superclass};
use hbias::manifold::{self, FeatureSet, Integration};
use hbias::metrics::{self, accuracy_series, PredictionLog, Record};
use proptest::prelude::*;

/// Random rooted tree: node `i > 0` hangs under a node with smaller index.
/// Leaves become the classes, in node order.
fn tree(parents: &[usize]) -> Hierarchy {
    let n = parents.len() + 1;
    let edges: Vec<(String, String)> = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| (format!("n{}", p % (i + 1)), format!("n{}", i + 1)))
        .collect();
    let mut has_child = vec![false; n];
    for (i, &p) in parents.iter().enumerate() {
        has_child[p % (i + 1)] = true;
    }
    let leaves: Vec<String> = (1..n).filter(|&i| !has_child[i]).map(|i| format!("n{i}")).collect();
    Hierarchy::from_edges(&edges, &leaves).unwrap()
}

fn arb_tree() -> impl Strategy<Value = Hierarchy> {
    prop::collection::vec(any::<usize>(), 2..40).prop_map(|p| tree(&p))
}

fn partition(c: usize, owners: &[usize]) -> LabelSpace {
    // relabel owners densely so no superclass is empty
    let mut ids = Vec::new();
    let table: Vec<usize> = owners[..c]
        .iter()
        .map(|o| match ids.iter().position(|x| x == o) {
            Some(i) => i,
            None => {
                ids.push(*o);
                ids.len() - 1
            }
        })
        .collect();
    let mut supers: Vec<Superclass> = (0..ids.len())
        .map(|i| Superclass { name: format!("g{i}"), members: Vec::new() })
        .collect();
    for (class, &s) in table.iter().enumerate() {
        supers[s].members.push(class);
    }
    LabelSpace::new("p", c, supers).unwrap()
}

fn arb_log(c: usize, epochs: u32, per_epoch: usize) -> impl Strategy<Value = PredictionLog> {
    prop::collection::vec((0..c, 0..c), epochs as usize * per_epoch).prop_map(move |pairs| {
        let records = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (t, p))| Record {
                epoch: (i / per_epoch) as u32 + 1,
                example_id: format!("x{}", i % per_epoch),
                true_label: t,
                pred_label: p,
            })
            .collect();
        PredictionLog::new(records, c).unwrap()
    })
}

fn arb_distance(n: usize) -> impl Strategy<Value = DistanceMatrix> {
    prop::collection::vec(0.0f64..10.0, n * (n - 1) / 2).prop_map(move |upper| {
        let mut values = vec![0.0; n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = it.next().unwrap();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        DistanceMatrix::new((0..n).collect(), values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_distance_is_a_metric(h in arb_tree()) {
        let classes: Vec<usize> = (0..h.class_count()).collect();
        let d = h.graph_distance_matrix(&classes).unwrap();
        let n = d.len();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                for k in 0..n {
                    prop_assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j));
                }
            }
        }
    }

    #[test]
    fn dfs_order_is_a_reproducible_permutation(p in prop::collection::vec(any::<usize>(), 2..40)) {
        let order = tree(&p).dfs_leaf_order().unwrap();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..order.len()).collect::<Vec<_>>());
        prop_assert_eq!(order, tree(&p).dfs_leaf_order().unwrap());
    }

    #[test]
    fn hypernym_of_union_takes_the_first_hit(
        h in arb_tree(),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 1..8),
    ) {
        // every leaf-to-root path ends at n0, so include it in T2
        let nodes: Vec<String> = (0..h.node_count()).map(|i| format!("n{i}")).collect();
        let mut t1: HashSet<&str> = HashSet::new();
        let mut t2: HashSet<&str> = HashSet::from(["n0"]);
        for (idx, first) in &picks {
            let node = nodes[idx.index(nodes.len())].as_str();
            if *first { t1.insert(node); } else { t2.insert(node); }
        }
        let union: HashSet<&str> = t1.union(&t2).copied().collect();
        for c in 0..h.class_count() {
            let path = h.ancestry(c).unwrap();
            let brute = *path.iter().find(|n| union.contains(**n)).unwrap();
            prop_assert_eq!(h.hypernym_of(c, &union).unwrap(), brute);
            let a = h.hypernym_of(c, &t1).ok();
            let b = h.hypernym_of(c, &t2).unwrap();
            let pos = |n: &str| path.iter().position(|x| *x == n).unwrap();
            let expected = match a {
                Some(a) if pos(a) < pos(b) => a,
                _ => b,
            };
            prop_assert_eq!(brute, expected);
        }
    }

    #[test]
    fn partitions_round_trip_through_mappings(owners in prop::collection::vec(0usize..6, 10..30)) {
        let c = owners.len();
        let s = partition(c, &owners);
        prop_assert_eq!(s.sizes().iter().sum::<usize>(), c);
        let m = s.mapping();
        for (si, sc) in s.superclasses().iter().enumerate() {
            for &class in &sc.members {
                prop_assert_eq!(m.get(class).unwrap(), si);
            }
        }
        let back = LabelSpace::from_mapping("p", &m).unwrap();
        prop_assert_eq!(back.sizes(), s.sizes());
        let parsed = hbias::labelspace::parse_mapping(&hbias::labelspace::format_mapping(&m)).unwrap();
        prop_assert_eq!(parsed, m);
    }

    #[test]
    fn random_isomorphic_keeps_sizes(owners in prop::collection::vec(0usize..5, 10..30), seed in any::<u64>()) {
        let s = partition(owners.len(), &owners);
        let (r, m) = random_isomorphic(&s, seed);
        prop_assert_eq!(r.sizes(), s.sizes());
        prop_assert_eq!(r.mapping(), m.clone());
        prop_assert_eq!(random_isomorphic(&s, seed).1, m);
    }

    #[test]
    fn projection_never_lowers_accuracy(
        log in arb_log(8, 3, 20),
        owners in prop::collection::vec(0usize..3, 8),
    ) {
        let s = partition(8, &owners);
        let before = accuracy_series(&log).unwrap().values();
        let after = accuracy_series(&project_log(&log, &s.mapping()).unwrap()).unwrap().values();
        for (a, b) in before.iter().zip(&after) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn confusion_counts_and_permutation(log in arb_log(6, 2, 30), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let (_, slice) = log.epochs()[1];
        let identity: Vec<usize> = (0..6).collect();
        let plain = metrics::confusion_matrix(slice, 6, &identity).unwrap();
        let permuted = metrics::confusion_matrix(slice, 6, &perm).unwrap();
        prop_assert_eq!(plain.total(), slice.len() as u64);
        for i in 0..6 {
            let row: u64 = (0..6).map(|j| plain.get(i, j)).sum();
            prop_assert_eq!(row, slice.iter().filter(|r| r.true_label == i).count() as u64);
            for j in 0..6 {
                prop_assert_eq!(permuted.get(i, j), plain.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn relative_accuracy_peaks_at_one(values in prop::collection::vec(1.0f64..100.0, 1..20)) {
        let a = metrics::MetricSeries::new(
            values.iter().enumerate().map(|(i, &v)| (i as u32 + 1, v)).collect(),
            metrics::Scale::Percent,
        ).unwrap();
        let r = metrics::relative_accuracy(&a).unwrap().values();
        prop_assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(r.contains(&1.0));
        let e = metrics::convergence_epoch(&a, 0.95).unwrap();
        let peak = values.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(values[e as usize - 1] >= 0.95 * peak);
        prop_assert!(values[..e as usize - 1].iter().all(|&v| v < 0.95 * peak));
    }

    #[test]
    fn ccc_is_symmetric_and_affine_invariant(d in arb_distance(6), a in prop_oneof![0.1f64..5.0, -5.0f64..-0.1], b in -3.0f64..3.0) {
        let d2 = arb_shift(&d, a, b);
        if let (Ok(x), Ok(y)) = (manifold::ccc(&d, &d2), manifold::ccc(&d2, &d)) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((x - a.signum()).abs() < 1e-9, "{}", x);
        }
    }

    #[test]
    fn cover_grid_error_is_bounded(
        dists in prop::collection::vec(0.0f64..3.0, 1..12),
        r_max in 0.5f64..4.0,
        g in 2usize..400,
    ) {
        let exact = manifold::integrate_cover(&dists, r_max, g, Integration::Exact);
        let trap = manifold::integrate_cover(&dists, r_max, g, Integration::Trapezoid);
        prop_assert!((0.0..=1.0).contains(&trap));
        prop_assert!((trap - exact).abs() <= 1.0 / (g - 1) as f64 + 1e-12);
    }

    #[test]
    fn features_round_trip_in_binary(
        rows in prop::collection::vec((0usize..4, prop::collection::vec(-1e6f32..1e6, 3)), 1..30),
    ) {
        let labels: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().map(|&x| x as f64)).collect();
        let f = FeatureSet::new(3, 4, data, labels).unwrap();
        let bytes = io::encode_features(&f);
        let back = io::decode_features(&bytes).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(io::encode_features(&back), bytes.clone());
        prop_assert!(io::decode_distance_matrix(&bytes).is_err());
        prop_assert!(io::decode_head(&bytes).is_err());
    }
}

fn arb_shift(d: &DistanceMatrix, a: f64, b: f64) -> DistanceMatrix {
    // keep entries non-negative by adding a large offset for negative slopes
    let offset = if a < 0.0 { 60.0 } else { 0.0 };
    let n = d.len();
    let values = d
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i / n == i % n { 0.0 } else { a * v + b.abs() + offset })
        .collect();
    DistanceMatrix::new(d.labels.clone(), values).unwrap()
}
