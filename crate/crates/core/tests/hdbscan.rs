use std::collections::BTreeMap;

use corpusforge_core::speaker::{
    cluster_purity, core_distances, distance_matrix, hdbscan, hdbscan_points, mutual_reachability, prim_mst,
    ClusterAssignment, Embedding, HdbscanParams,
};
use corpusforge_core::synth;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

// Labels produced offline by scikit-learn 1.7.2's single-linkage,
// condensation and excess-of-mass code, fed a dense Prim MST of the
// mutual-reachability matrix (true parent edges, lowest index wins ties).
// Tied weights make the MST non-unique and the labels depend on the pick;
// sklearn's own Prim also records (previous vertex, new vertex) instead of
// the true edge, so its end-to-end labels are not comparable.
type Fixture = (usize, usize, &'static [[f64; 2]], &'static [i32]);
const SKLEARN: &[Fixture] = &[
    (4, 4, &[[0.0,0.09],[-0.082,-0.267],[-0.136,-0.297],[0.018,0.402],[-0.148,-0.186],[0.147,0.107],[0.032,-0.279],[-0.009,0.209],[-0.403,-0.137],[-0.57,-0.387],[-0.553,-0.071],[-0.38,0.081],[0.047,-0.056],[-0.755,-0.162],[-0.015,0.034],[2.541,-0.143],[2.706,-0.243],[3.318,-0.242],[2.99,0.265],[2.825,-0.034],[3.033,0.019],[2.632,0.023],[3.408,-0.464],[3.258,0.036],[2.808,0.6],[3.229,-0.36],[3.022,0.173],[3.762,0.637],[3.787,0.633],[4.088,0.365],[3.841,0.407],[3.825,0.263],[3.684,0.461],[3.98,0.729],[3.535,0.341],[0.403,4.993],[3.298,-0.947],[4.761,5.56],[5.231,2.558],[-0.836,-0.46],[5.423,2.419]], &[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,-1,1,-1,1,0,-1]),
    (5, 3, &[[0.353,-0.121],[-0.197,-1.114],[-0.012,-0.444],[1.166,0.653],[-0.024,0.668],[-0.34,1.052],[-0.005,0.583],[-1.291,0.347],[-1.688,-2.035],[-0.304,-0.9],[0.164,2.245],[-0.832,-0.624],[0.205,0.493],[-0.176,-0.206],[0.702,0.52],[-1.034,-0.079],[0.035,-1.054],[0.26,-0.858],[0.972,0.193],[0.089,-0.591],[5.941,5.001],[5.434,6.181],[4.936,6.423],[5.127,6.378],[5.577,6.389],[6.065,5.232],[6.625,6.721],[5.967,5.863],[5.92,5.512],[6.549,5.729],[8.295,1.763],[8.919,-3.038],[2.02,3.273],[9.313,-0.486],[7.285,5.471]], &[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,1,1,1,1,1,1,1,1,1,-1,0,1,1]),
    (3, 3, &[[7.171,6.296],[9.716,3.327],[3.983,2.029],[0.507,2.129],[9.155,8.402],[1.124,6.038],[4.792,5.947],[6.593,3.067],[9.614,4.658],[6.281,6.352],[1.839,0.619],[4.115,7.64],[8.152,7.3],[1.132,9.134],[8.02,8.777],[5.233,9.156],[0.467,0.303],[0.202,2.528],[2.486,1.875],[5.671,0.39],[5.904,1.66],[6.779,0.211],[3.106,9.383],[5.384,8.116],[6.58,6.108],[1.913,5.744],[0.397,8.017],[9.601,8.54],[0.507,3.387],[3.18,1.127],[6.266,7.975],[3.137,8.628],[7.971,1.291],[7.669,8.826],[1.973,5.736],[6.387,6.093],[0.962,6.612],[6.32,8.239],[8.035,3.272],[7.22,8.673]], &[2,0,0,0,3,1,-1,0,0,2,0,3,2,-1,3,3,0,0,0,0,0,0,-1,3,2,1,1,-1,0,0,3,3,0,3,1,2,1,3,0,3]),
    (5, 5, &[[0.039,-0.157],[0.071,0.068],[0.405,-0.279],[0.178,-0.018],[-0.003,-0.29],[-0.092,0.149],[-0.016,0.016],[-0.058,0.231],[-0.004,-0.44],[-0.138,-0.394],[0.35,-0.106],[1.267,0.009],[0.765,-0.188],[1.226,0.032],[1.01,-0.011],[1.008,0.161],[1.111,0.043],[0.791,0.102],[0.863,0.219],[0.746,-0.028],[4.999,4.735],[5.344,5.292],[4.907,5.154],[5.076,4.477],[5.05,4.988],[5.017,4.785],[4.946,4.964],[5.238,5.067],[4.999,5.306],[4.889,4.922]], &[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,1,1,1,1,1,1,1,1]),
];

/// Same partition up to renaming of cluster ids; noise must match exactly.
fn same_partition(ours: &[Option<usize>], theirs: &[i32]) -> bool {
    let mut forward = BTreeMap::new();
    let mut backward = BTreeMap::new();
    ours.iter().zip(theirs).all(|(a, b)| match (a, *b) {
        (None, -1) => true,
        (Some(a), b) if b >= 0 => {
            *forward.entry(*a).or_insert(b) == b && *backward.entry(b).or_insert(*a) == *a
        }
        _ => false,
    })
}

#[test]
fn matches_reference_implementation() {
    for (i, (mcs, ms, pts, expected)) in SKLEARN.iter().enumerate() {
        let points: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let params = HdbscanParams { min_cluster_size: *mcs, min_samples: *ms };
        let ours = hdbscan_points(&points, &params).unwrap();
        assert!(same_partition(&ours, expected), "fixture {i}: {ours:?}");
    }
}

fn tree_weight(w: &[Vec<f64>], edges: &[(usize, usize)]) -> f64 {
    edges.iter().map(|(a, b)| w[*a][*b]).sum()
}

/// Depth-first include/exclude over all edges, ascending by weight, pruned
/// only when even the cheapest completion cannot beat the best tree found.
fn brute_force_mst(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut edges: Vec<(f64, usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| (w[a][b], a, b)).collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0));

    fn root(p: &[usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }

    fn go(edges: &[(f64, usize, usize)], i: usize, need: usize, acc: f64, comp: &mut Vec<usize>, best: &mut f64) {
        if need == 0 {
            *best = best.min(acc);
            return;
        }
        if edges.len() - i < need {
            return;
        }
        let bound: f64 = edges[i..i + need].iter().map(|e| e.0).sum();
        if acc + bound >= *best {
            return;
        }
        let (wt, a, b) = edges[i];
        let (ra, rb) = (root(comp, a), root(comp, b));
        if ra != rb {
            comp[ra] = rb;
            go(edges, i + 1, need - 1, acc + wt, comp, best);
            comp[ra] = ra;
        }
        go(edges, i + 1, need, acc, comp, best);
    }

    let mut best = f64::INFINITY;
    go(&edges, 0, n.saturating_sub(1), 0.0, &mut (0..n).collect(), &mut best);
    if n < 2 {
        0.0
    } else {
        best
    }
}

/// Every labelled tree via Prüfer sequences; only feasible for small n.
fn prufer_mst(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return w[0][1];
    }
    let mut best = f64::INFINITY;
    let total = n.pow((n - 2) as u32);
    for code in 0..total {
        let mut seq = Vec::with_capacity(n - 2);
        let mut c = code;
        for _ in 0..n - 2 {
            seq.push(c % n);
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for s in &seq {
            degree[*s] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for s in &seq {
            let leaf = (0..n).find(|v| degree[*v] == 1).unwrap();
            edges.push((leaf, *s));
            degree[leaf] -= 1;
            degree[*s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|v| degree[*v] == 1).collect();
        edges.push((rest[0], rest[1]));
        best = best.min(tree_weight(w, &edges));
    }
    best
}

fn random_reachability(rng: &mut synth::SynthRng, n: usize) -> Vec<Vec<f64>> {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let d = distance_matrix(&pts);
    let ms = rng.random_range(1..=n);
    mutual_reachability(&d, &core_distances(&d, ms))
}

#[test]
fn branch_and_bound_agrees_with_full_enumeration() {
    let mut rng = synth::rng(21);
    for _ in 0..30 {
        let n = rng.random_range(2..=7);
        let w = random_reachability(&mut rng, n);
        assert!((brute_force_mst(&w) - prufer_mst(&w)).abs() < 1e-12);
    }
}

#[test]
fn prim_matches_exhaustive_search() {
    let mut rng = synth::rng(22);
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let w = random_reachability(&mut rng, n);
        let mst = prim_mst(&w);
        assert_eq!(mst.len(), n - 1);
        let ours: f64 = mst.iter().map(|e| e.weight).sum();
        assert!((ours - brute_force_mst(&w)).abs() < 1e-12);
    }
}

#[test]
fn input_order_does_not_matter() {
    let mut rng = synth::rng(23);
    let (pts, _, _) = synth::gaussian_blobs(4, 12, 8, 0.3, &mut rng);
    let mut embeddings: Vec<Embedding> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| Embedding::new(format!("u{i:03}"), p.iter().map(|v| *v as f32).collect()))
        .collect();
    let reference = hdbscan(&embeddings, &HdbscanParams::new(4)).unwrap();
    let lookup: BTreeMap<String, Option<usize>> = reference.labels.iter().cloned().collect();
    for _ in 0..5 {
        embeddings.shuffle(&mut rng);
        let shuffled = hdbscan(&embeddings, &HdbscanParams::new(4)).unwrap();
        for (id, l) in &shuffled.labels {
            assert_eq!(lookup[id], *l);
        }
    }
}

#[test]
fn clusters_respect_min_size_and_dense_ids() {
    let mut rng = synth::rng(24);
    for _ in 0..10 {
        let (pts, _, _) = synth::gaussian_blobs(rng.random_range(1..5), 10, 4, 0.5, &mut rng);
        let mcs = rng.random_range(2..8);
        let labels = hdbscan_points(&pts, &HdbscanParams::new(mcs)).unwrap();
        let k = labels.iter().flatten().map(|c| c + 1).max().unwrap_or(0);
        for c in 0..k {
            assert!(labels.iter().filter(|l| **l == Some(c)).count() >= mcs);
        }
    }
}

proptest! {
    #[test]
    fn purity_is_bounded(truth in prop::collection::vec(0u8..4, 1..40), clusters in prop::collection::vec(prop::option::of(0usize..5), 1..40)) {
        let n = truth.len().min(clusters.len());
        let mut labels: Vec<(String, Option<usize>)> = (0..n).map(|i| (format!("{i}"), clusters[i])).collect();
        // compact ids so they are dense
        let mut ids: Vec<usize> = labels.iter().filter_map(|l| l.1).collect();
        ids.sort();
        ids.dedup();
        for l in &mut labels {
            l.1 = l.1.map(|c| ids.binary_search(&c).unwrap());
        }
        let assignment = ClusterAssignment { labels, n_clusters: ids.len() };
        let t: BTreeMap<String, u8> = (0..n).map(|i| (format!("{i}"), truth[i])).collect();
        let p = cluster_purity(&assignment, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&p.mean));
        let single = assignment.clusters().iter().all(|m| m.iter().all(|id| t[*id] == t[m[0]]));
        prop_assert_eq!(single, p.mean == 1.0);
    }
}
