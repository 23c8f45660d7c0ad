//! Speaker embeddings, HDBSCAN clustering, cluster purity and the
//! per-speaker duration budget.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::audio::MfccMatrix;
use crate::math;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 5;
pub const DEFAULT_CAP_MINUTES: f64 = 90.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SpeakerError {
    TooFewFrames(usize),
    ZeroDim,
    DimMismatch { expected: usize, found: usize },
    NonFinite(String),
    MissingTruth(String),
    Params(&'static str),
}

impl fmt::Display for SpeakerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewFrames(n) => write!(f, "embedding needs at least 2 frames, got {n}"),
            Self::ZeroDim => f.write_str("embedding dim must be positive"),
            Self::DimMismatch { expected, found } => {
                write!(f, "dim mismatch: expected {expected}, found {found}")
            }
            Self::NonFinite(id) => write!(f, "non-finite embedding entry in {id}"),
            Self::MissingTruth(id) => write!(f, "no truth label for {id}"),
            Self::Params(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for SpeakerError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utt_id: String,
    pub vector: Vec<f32>,
}

impl Embedding {
    pub fn new(utt_id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self { utt_id: utt_id.into(), vector }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        Self { utt_id: self.utt_id.clone(), vector: l2_normalize_f32(&self.vector) }
    }
}

fn l2_normalize_f32(v: &[f32]) -> Vec<f32> {
    let norm = math::sqrt(v.iter().map(|x| (*x as f64) * (*x as f64)).sum());
    if norm > 0.0 {
        v.iter().map(|x| (*x as f64 / norm) as f32).collect()
    } else {
        v.to_vec()
    }
}

/// Per-coefficient statistics of an MFCC matrix, in order: means, standard
/// deviations, mean absolute frame deltas. Length is `3 * n_coeffs`.
pub fn mfcc_stats(features: &MfccMatrix) -> Result<Vec<f64>, SpeakerError> {
    let n = features.n_frames();
    if n < 2 {
        return Err(SpeakerError::TooFewFrames(n));
    }
    let c = features.n_coeffs();
    // Shifted by the first frame so constant columns give an exact mean.
    let first = features.frame(0);
    let mut shift = vec![0.0; c];
    for row in features.frames() {
        for ((m, v), f) in shift.iter_mut().zip(row).zip(first) {
            *m += v - f;
        }
    }
    let mean: Vec<f64> = shift.iter().zip(first).map(|(m, f)| f + m / n as f64).collect();
    let mut var = vec![0.0; c];
    for row in features.frames() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| math::sqrt(s / n as f64)).collect();
    let mut delta = vec![0.0; c];
    for i in 1..n {
        for ((d, a), b) in delta.iter_mut().zip(features.frame(i)).zip(features.frame(i - 1)) {
            *d += math::abs(a - b);
        }
    }
    delta.iter_mut().for_each(|d| *d /= (n - 1) as f64);
    Ok(mean.into_iter().chain(std).chain(delta).collect())
}

/// Stand-in voice embedding: [`mfcc_stats`] tiled or truncated to `dim`,
/// then L2-normalized.
pub fn embed_mfcc_stats(
    utt_id: impl Into<String>,
    features: &MfccMatrix,
    dim: usize,
) -> Result<Embedding, SpeakerError> {
    if dim == 0 {
        return Err(SpeakerError::ZeroDim);
    }
    let stats = mfcc_stats(features)?;
    let tiled: Vec<f32> = stats.iter().cycle().take(dim).map(|v| *v as f32).collect();
    Ok(Embedding::new(utt_id, l2_normalize_f32(&tiled)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbour count for core distances, counting the point itself.
    pub min_samples: usize,
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self { min_cluster_size, min_samples: min_cluster_size }
    }

    pub fn validate(&self) -> Result<(), SpeakerError> {
        if self.min_cluster_size < 2 {
            return Err(SpeakerError::Params("min_cluster_size must be at least 2"));
        }
        if self.min_samples < 1 {
            return Err(SpeakerError::Params("min_samples must be at least 1"));
        }
        Ok(())
    }
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self::new(DEFAULT_MIN_CLUSTER_SIZE)
    }
}

/// Cluster labels in input order; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<(String, Option<usize>)>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    pub fn label_of(&self, utt_id: &str) -> Option<Option<usize>> {
        self.labels.iter().find(|(id, _)| id == utt_id).map(|(_, l)| *l)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|(_, l)| l.is_none()).count()
    }

    /// Members of each cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (id, l) in &self.labels {
            if let Some(c) = l {
                out[*c].push(id.as_str());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = math::euclidean(&points[i], &points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Distance to the `min_samples`-th nearest point, the point itself being
/// the first.
pub fn core_distances(dist: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    dist.iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(f64::total_cmp);
            let k = min_samples.clamp(1, r.len()) - 1;
            r[k]
        })
        .collect()
}

pub fn mutual_reachability(dist: &[Vec<f64>], core: &[f64]) -> Vec<Vec<f64>> {
    let n = dist.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[i][j] = dist[i][j].max(core[i]).max(core[j]);
            }
        }
    }
    m
}

/// Prim's algorithm on a dense symmetric matrix. Ties go to the lowest
/// vertex index. Edges are returned in insertion order.
pub fn prim_mst(weights: &[Vec<f64>]) -> Vec<MstEdge> {
    let n = weights.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if !in_tree[v] && weights[current][v] < best[v] {
                best[v] = weights[current][v];
                parent[v] = current;
            }
        }
        let mut next = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (next == usize::MAX || best[v] < best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge { a: parent[next], b: next, weight: best[next] });
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// One merge of the single-linkage dendrogram. Nodes `0..n` are points and
/// node `n + i` is created by merge `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges = mst.to_vec();
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    let mut uf = UnionFind::new(2 * n);
    let mut node_of_root: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let (left, right) = (node_of_root[ra], node_of_root[rb]);
        let node = n + i;
        let s = size[left] + size[right];
        size[node] = s;
        uf.parent[ra] = rb;
        node_of_root[rb] = node;
        merges.push(Merge { left, right, distance: e.weight, size: s });
    }
    merges
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CondensedEdge {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(1e-12)
}

/// Condensed tree: cluster ids start at `n` (the root); entries with
/// `child < n` are points falling out of `parent`.
fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let node_size = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let mut out = Vec::new();
    let mut cluster_of = vec![usize::MAX; 2 * n - 1];
    cluster_of[root] = n;
    let mut next_label = n + 1;
    let mut queue = alloc::collections::VecDeque::new();
    queue.push_back(root);

    fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &merges[x - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
    }

    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let parent = cluster_of[node];
        let (l, r) = (m.left, m.right);
        let (ls, rs) = (node_size(l), node_size(r));
        let big_l = ls >= min_cluster_size;
        let big_r = rs >= min_cluster_size;
        if big_l && big_r {
            for (child, size) in [(l, ls), (r, rs)] {
                cluster_of[child] = next_label;
                out.push(CondensedEdge { parent, child: next_label, lambda, size });
                next_label += 1;
                queue.push_back(child);
            }
        } else {
            for (child, big) in [(l, big_l), (r, big_r)] {
                if big {
                    cluster_of[child] = parent;
                    queue.push_back(child);
                } else {
                    let mut pts = Vec::new();
                    leaves(n, merges, child, &mut pts);
                    for p in pts {
                        out.push(CondensedEdge { parent, child: p, lambda, size: 1 });
                    }
                }
            }
        }
    }
    out
}

/// Excess-of-mass selection, root excluded. Returns the selected cluster
/// ids of the condensed tree.
fn select_clusters(n: usize, tree: &[CondensedEdge]) -> Vec<usize> {
    let max_label = tree.iter().map(|e| e.parent.max(e.child)).max().unwrap_or(n).max(n);
    let n_clusters = max_label - n + 1;
    let mut birth = vec![0.0f64; n_clusters];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
    }
    let mut stability = vec![0.0f64; n_clusters];
    for e in tree {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * e.size as f64;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for e in tree.iter().filter(|e| e.child >= n) {
        children[e.parent - n].push(e.child - n);
    }
    let mut selected = vec![true; n_clusters];
    selected[0] = false;
    for c in (1..n_clusters).rev() {
        let sub: f64 = children[c].iter().map(|k| stability[*k]).sum();
        if sub > stability[c] {
            selected[c] = false;
            stability[c] = sub;
        } else {
            let mut stack = children[c].clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend(children[k].iter().copied());
            }
        }
    }
    (1..n_clusters).filter(|c| selected[*c]).map(|c| c + n).collect()
}

/// HDBSCAN over raw points with Euclidean distance. Labels are dense and
/// ordered by each cluster's lowest point index.
pub fn hdbscan_points(points: &[Vec<f64>], params: &HdbscanParams) -> Result<Vec<Option<usize>>, SpeakerError> {
    params.validate()?;
    let n = points.len();
    if n < params.min_cluster_size {
        return Ok(vec![None; n]);
    }
    let dist = distance_matrix(points);
    let core = core_distances(&dist, params.min_samples);
    let mst = prim_mst(&mutual_reachability(&dist, &core));
    let merges = single_linkage(n, &mst);
    let tree = condense(n, &merges, params.min_cluster_size);
    let selected = select_clusters(n, &tree);

    let mut parent_of = BTreeMap::new();
    for e in tree.iter().filter(|e| e.child >= n) {
        parent_of.insert(e.child, e.parent);
    }
    let selected_of = |mut c: usize| -> Option<usize> {
        loop {
            if selected.contains(&c) {
                return Some(c);
            }
            c = *parent_of.get(&c)?;
        }
    };
    let mut raw = vec![None; n];
    for e in tree.iter().filter(|e| e.child < n) {
        raw[e.child] = selected_of(e.parent);
    }
    let mut dense = BTreeMap::new();
    Ok(raw
        .into_iter()
        .map(|l| {
            l.map(|c| {
                let next = dense.len();
                *dense.entry(c).or_insert(next)
            })
        })
        .collect())
}

/// Clusters embeddings after L2 normalization. Points are processed in
/// `utt_id` order so the result does not depend on input order.
pub fn hdbscan(embeddings: &[Embedding], params: &HdbscanParams) -> Result<ClusterAssignment, SpeakerError> {
    params.validate()?;
    if let Some(first) = embeddings.first() {
        for e in embeddings {
            if e.dim() != first.dim() {
                return Err(SpeakerError::DimMismatch { expected: first.dim(), found: e.dim() });
            }
            if e.vector.iter().any(|v| !v.is_finite()) {
                return Err(SpeakerError::NonFinite(e.utt_id.clone()));
            }
        }
    }
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.sort_by(|a, b| embeddings[*a].utt_id.cmp(&embeddings[*b].utt_id));
    let points: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| l2_normalize_f32(&embeddings[i].vector).iter().map(|v| *v as f64).collect())
        .collect();
    let sorted_labels = hdbscan_points(&points, params)?;
    let mut labels = vec![None; embeddings.len()];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = sorted_labels[pos];
    }
    let n_clusters = labels.iter().flatten().map(|c| c + 1).max().unwrap_or(0);
    Ok(ClusterAssignment {
        labels: embeddings.iter().zip(labels).map(|(e, l)| (e.utt_id.clone(), l)).collect(),
        n_clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Purity {
    pub per_cluster: Vec<f64>,
    /// Size-weighted mean over clusters; 1.0 when there are no clusters.
    pub mean: f64,
}

pub fn cluster_purity<S: Ord + Clone>(
    assignment: &ClusterAssignment,
    truth: &BTreeMap<String, S>,
) -> Result<Purity, SpeakerError> {
    let mut per_cluster = Vec::with_capacity(assignment.n_clusters);
    let (mut dominant_total, mut size_total) = (0usize, 0usize);
    for members in assignment.clusters() {
        let mut counts: BTreeMap<S, usize> = BTreeMap::new();
        for id in &members {
            let s = truth.get(*id).ok_or_else(|| SpeakerError::MissingTruth(String::from(*id)))?;
            *counts.entry(s.clone()).or_default() += 1;
        }
        let dominant = counts.values().copied().max().unwrap_or(0);
        per_cluster.push(if members.is_empty() { 1.0 } else { dominant as f64 / members.len() as f64 });
        dominant_total += dominant;
        size_total += members.len();
    }
    let mean = if size_total == 0 { 1.0 } else { dominant_total as f64 / size_total as f64 };
    Ok(Purity { per_cluster, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRecord {
    pub utt_id: String,
    pub duration_s: f64,
    pub snr_db: f64,
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetOutcome {
    Selected,
    OverBudget,
    Unclustered,
}

/// Per cluster, walks chunks by SNR descending (ties by `utt_id`) and keeps
/// each one that still fits under the cap. Outcomes are in input order.
pub fn select_budget(records: &[BudgetRecord], cap_minutes: f64) -> Vec<BudgetOutcome> {
    let cap = cap_minutes * 60.0 + 1e-9;
    let mut out = vec![BudgetOutcome::Unclustered; records.len()];
    let mut by_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(c) = r.cluster {
            by_cluster.entry(c).or_default().push(i);
        }
    }
    for idx in by_cluster.values_mut() {
        idx.sort_by(|a, b| {
            records[*b]
                .snr_db
                .total_cmp(&records[*a].snr_db)
                .then_with(|| records[*a].utt_id.cmp(&records[*b].utt_id))
        });
        let mut total = 0.0;
        for &i in idx.iter() {
            if total + records[i].duration_s <= cap {
                total += records[i].duration_s;
                out[i] = BudgetOutcome::Selected;
            } else {
                out[i] = BudgetOutcome::OverBudget;
            }
        }
    }
    out
}
