//! Weighted-graph normalized-cut partitioning (recursive two-way spectral
//! cuts in the style of Shi and Malik), shared by the consolidation step of
//! the chain-based segmenter, the sentence-similarity segmenter and the
//! supervised segmenter.

use crate::corpus::Conversation;
use crate::error::{Error, Result};
use crate::lexchain::cosine_tf;
use crate::segmentation::Segmentation;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 1000;

/// Symmetric non-negative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub n: usize,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph { n, weights: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut weight: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = WeightedGraph::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set(i, j, weight(i, j));
            }
        }
        g
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Set the symmetric weight between two distinct nodes; negative values
    /// are clamped to zero and the diagonal stays zero.
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        if i == j {
            return;
        }
        let w = w.max(0.0);
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
    }

    pub fn degree(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.weight(i, j)).sum()
    }
}

/// Assignment of every node to one of `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub cluster_of: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn cluster_members(&self, c: usize) -> Vec<usize> {
        (0..self.cluster_of.len()).filter(|&i| self.cluster_of[i] == c).collect()
    }
}

/// Total edge weight from nodes in `a` to nodes in `b`, counted per ordered
/// pair: overlapping sets count shared edges twice, exactly as the formula
/// reads.
pub fn cut(graph: &WeightedGraph, a: &[usize], b: &[usize]) -> f64 {
    let mut total = 0.0;
    for &u in a {
        for &v in b {
            total += graph.weight(u, v);
        }
    }
    total
}

/// Association of `a` with the whole graph: sum of w(u, t) over u in `a`
/// and all nodes t.
pub fn assoc(graph: &WeightedGraph, a: &[usize]) -> f64 {
    a.iter().map(|&u| graph.degree(u)).sum()
}

/// The normalized-cut objective: sum over clusters of
/// cut(A, V−A) / assoc(A, V). Clusters with zero association contribute
/// zero; a single cluster scores zero by convention.
pub fn ncut_value(graph: &WeightedGraph, partition: &Partition) -> f64 {
    if partition.k <= 1 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..partition.k {
        let members = partition.cluster_members(c);
        let rest: Vec<usize> =
            (0..graph.n).filter(|i| partition.cluster_of[*i] != c).collect();
        let a = assoc(graph, &members);
        if a > 0.0 {
            total += cut(graph, &members, &rest) / a;
        }
    }
    total
}

/// Partition the graph into exactly `k` clusters by recursive two-way
/// spectral cuts. Zero-degree nodes are pre-assigned singleton clusters;
/// each remaining step applies the cheapest available bipartition (by its
/// Ncut value within the cluster being split) until `k` clusters exist.
pub fn partition_ncut(graph: &WeightedGraph, k: usize) -> Result<Partition> {
    let n = graph.n;
    if k == 0 || k > n {
        return Err(Error::BadTopicCount { k, msg: format!("graph has {n} nodes") });
    }

    let isolated: Vec<usize> = (0..n).filter(|&i| graph.degree(i) == 0.0).collect();
    let connected: Vec<usize> = (0..n).filter(|&i| graph.degree(i) > 0.0).collect();

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    if !connected.is_empty() {
        clusters.push(connected);
    }
    for &i in &isolated {
        clusters.push(vec![i]);
    }
    // Too many pre-assigned singletons: merge the lowest-index ones into
    // cluster 0 until the budget fits.
    while clusters.len() > k {
        let merged = clusters.remove(1);
        clusters[0].extend(merged);
        clusters[0].sort_unstable();
    }

    while clusters.len() < k {
        // Pick the splittable cluster whose best bipartition has the lowest
        // Ncut value (ties: lowest cluster index).
        let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
        for (ci, members) in clusters.iter().enumerate() {
            if members.len() < 2 {
                continue;
            }
            let (value, left, right) = best_bipartition(graph, members);
            if best.as_ref().is_none_or(|(bv, ..)| value < *bv) {
                best = Some((value, ci, left, right));
            }
        }
        let Some((_, ci, left, right)) = best else {
            return Err(Error::BadTopicCount {
                k,
                msg: "not enough splittable clusters".into(),
            });
        };
        clusters[ci] = left;
        clusters.push(right);
    }

    let mut cluster_of = vec![0usize; n];
    for (ci, members) in clusters.iter().enumerate() {
        for &m in members {
            cluster_of[m] = ci;
        }
    }
    Ok(Partition { cluster_of, k: clusters.len() })
}

/// Best two-way split of `members`: second generalized eigenvector of
/// (D−W)v = λDv on the induced subgraph, swept over every distinct
/// eigenvector value, then refined by single-node moves. Returns the split's
/// Ncut value (within the subgraph) and the two sides.
fn best_bipartition(graph: &WeightedGraph, members: &[usize]) -> (f64, Vec<usize>, Vec<usize>) {
    let m = members.len();
    debug_assert!(m >= 2);
    let sub = induced_subgraph(graph, members);

    // Zero-degree nodes inside this cluster can be cut off for free.
    let zero: Vec<usize> = (0..m).filter(|&i| sub.degree(i) == 0.0).collect();
    if !zero.is_empty() && zero.len() < m {
        let left: Vec<usize> =
            (0..m).filter(|i| !zero.contains(i)).map(|i| members[i]).collect();
        let right: Vec<usize> = zero.iter().map(|&i| members[i]).collect();
        return (0.0, left, right);
    }
    if zero.len() == m {
        // No internal weight at all: any split has value 0.
        return (0.0, vec![members[0]], members[1..].to_vec());
    }

    let v = fiedler_vector(&sub);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap().then(a.cmp(&b)));

    let mut best_value = f64::INFINITY;
    let mut best_split = 1;
    let mut side = vec![false; m];
    for split in 1..m {
        side[order[split - 1]] = true;
        // Sweep thresholds between distinct eigenvector values only.
        if v[order[split]] == v[order[split - 1]] {
            continue;
        }
        let value = two_way_ncut(&sub, &side);
        if value < best_value {
            best_value = value;
            best_split = split;
        }
    }
    if best_value.is_infinite() {
        // Fully degenerate eigenvector (e.g. all-identical weights): fall
        // back to a balanced split in sweep order.
        best_split = m / 2;
    }
    let mut in_left = vec![false; m];
    for &i in &order[..best_split] {
        in_left[i] = true;
    }
    refine_bipartition(&sub, &mut in_left);
    let left: Vec<usize> = (0..m).filter(|&i| in_left[i]).map(|i| members[i]).collect();
    let right: Vec<usize> = (0..m).filter(|&i| !in_left[i]).map(|i| members[i]).collect();
    let final_side: Vec<bool> = (0..m).map(|i| in_left[i]).collect();
    (two_way_ncut(&sub, &final_side), left, right)
}

fn induced_subgraph(graph: &WeightedGraph, members: &[usize]) -> WeightedGraph {
    WeightedGraph::from_fn(members.len(), |i, j| graph.weight(members[i], members[j]))
}

fn two_way_ncut(sub: &WeightedGraph, in_a: &[bool]) -> f64 {
    let a: Vec<usize> = (0..sub.n).filter(|&i| in_a[i]).collect();
    let b: Vec<usize> = (0..sub.n).filter(|&i| !in_a[i]).collect();
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let c = cut(sub, &a, &b);
    let (aa, ab) = (assoc(sub, &a), assoc(sub, &b));
    let mut total = 0.0;
    if aa > 0.0 {
        total += c / aa;
    }
    if ab > 0.0 {
        total += c / ab;
    }
    total
}

/// Greedy single-node moves that lower the two-way Ncut; deterministic scan
/// order, stops at a local optimum (the spectral sweep is only approximate).
fn refine_bipartition(sub: &WeightedGraph, in_a: &mut [bool]) {
    let n = sub.n;
    let mut current = two_way_ncut(sub, in_a);
    loop {
        let mut improved = false;
        for i in 0..n {
            in_a[i] = !in_a[i];
            let candidate = two_way_ncut(sub, in_a);
            if candidate + 1e-12 < current {
                current = candidate;
                improved = true;
            } else {
                in_a[i] = !in_a[i];
            }
        }
        if !improved {
            return;
        }
    }
}

/// Second-smallest generalized eigenvector of (D−W)v = λDv, computed on the
/// normalized Laplacian by power iteration on 2I − L_sym with deflation of
/// the trivial eigenvector D^{1/2}·1. All degrees must be positive.
fn fiedler_vector(sub: &WeightedGraph) -> Vec<f64> {
    let n = sub.n;
    let deg: Vec<f64> = (0..n).map(|i| sub.degree(i)).collect();
    let dsqrt: Vec<f64> = deg.iter().map(|d| d.sqrt()).collect();

    // Trivial eigenvector of L_sym for eigenvalue 0.
    let norm0 = dsqrt.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u0: Vec<f64> = dsqrt.iter().map(|x| x / norm0).collect();

    // Deterministic start vector, deflated.
    let mut x: Vec<f64> = (0..n).map(|i| (0.7 + i as f64).sin()).collect();
    deflate(&mut x, &u0);
    normalize(&mut x);

    let mut prev = x.clone();
    for _ in 0..POWER_MAX_ITERS {
        // y = (2I − L_sym) x, with L_sym = I − D^{-1/2} W D^{-1/2}.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..n {
                let w = sub.weight(i, j);
                if w != 0.0 {
                    acc += w / (dsqrt[i] * dsqrt[j]) * x[j];
                }
            }
            y[i] = acc;
        }
        deflate(&mut y, &u0);
        normalize(&mut y);
        let delta: f64 = y.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let delta_neg: f64 =
            y.iter().zip(&prev).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        prev = y.clone();
        x = y;
        if delta.min(delta_neg) < POWER_TOL {
            break;
        }
    }

    // Back to the generalized problem: v = D^{-1/2} u.
    (0..n).map(|i| x[i] / dsqrt[i]).collect()
}

fn deflate(x: &mut [f64], u0: &[f64]) {
    let dot: f64 = x.iter().zip(u0).map(|(a, b)| a * b).sum();
    for (xi, u) in x.iter_mut().zip(u0) {
        *xi -= dot * u;
    }
}

fn normalize(x: &mut [f64]) {
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
}

/// Residual of the generalized eigenproblem for a candidate vector:
/// ‖(D−W)v − λDv‖∞ with λ the generalized Rayleigh quotient. Exposed for
/// verification.
pub fn eigen_residual(graph: &WeightedGraph, v: &[f64]) -> f64 {
    let n = graph.n;
    let deg: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();
    let mut lv = vec![0.0; n];
    for i in 0..n {
        let mut acc = deg[i] * v[i];
        for j in 0..n {
            acc -= graph.weight(i, j) * v[j];
        }
        lv[i] = acc;
    }
    let num: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().zip(&deg).map(|(a, d)| a * a * d).sum();
    let lambda = if den == 0.0 { 0.0 } else { num / den };
    (0..n)
        .map(|i| (lv[i] - lambda * deg[i] * v[i]).abs())
        .fold(0.0, f64::max)
}

/// Expose the subgraph eigen machinery for tests.
pub fn fiedler_for_tests(graph: &WeightedGraph) -> Vec<f64> {
    fiedler_vector(graph)
}

/// Sentence-similarity segmenter: a complete graph over sentences weighted
/// by term-frequency cosine (optionally TF.IDF cosine), partitioned with
/// the normalized-cut criterion. No sequentiality constraint: clusters may
/// interleave in temporal order.
pub fn mb_segment(conversation: &Conversation, k: usize, tfidf: bool) -> Result<Segmentation> {
    let n = conversation.n_sentences();
    if k == 0 || k > n {
        return Err(Error::BadTopicCount { k, msg: format!("conversation has {n} sentences") });
    }
    let idf = if tfidf { Some(crate::supervised::conversation_idf(conversation)) } else { None };
    let graph = WeightedGraph::from_fn(n, |i, j| match &idf {
        None => cosine_tf(&conversation.sentences[i], &conversation.sentences[j]),
        Some(idf) => crate::supervised::cosine_tfidf(
            &conversation.sentences[i],
            &conversation.sentences[j],
            idf,
        ),
    });
    let partition = partition_ncut(&graph, k)?;
    Ok(Segmentation::from_assignment(&partition.cluster_of))
}
