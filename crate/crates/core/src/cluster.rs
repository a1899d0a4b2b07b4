//! HDBSCAN over cosine distance.
//!
//! `min_samples` is tied to `min_cluster_size` (a single parameter `m`).
//! Distances are exact (`O(N²)` matrix). Edges of equal mutual-reachability
//! weight are merged simultaneously, so the hierarchy does not depend on how
//! ties happen to be ordered.

use rayon::prelude::*;

use crate::error::{ensure_dim, Error, Result};
use crate::types::{dot, ActivationSet};

pub const NOISE: i64 = -1;

/// Smallest distance used when converting to density, `λ = 1/d`.
const MIN_LAMBDA_DISTANCE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// `-1` for noise, `0..num_clusters` otherwise, numbered by first member.
    pub labels: Vec<i64>,
    pub num_clusters: usize,
    pub min_cluster_size: usize,
    pub core_distances: Vec<f64>,
}

impl ClusterResult {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// Distances below this are rounding noise between parallel vectors.
pub const PARALLEL_TOL: f64 = 1e-12;

fn snap(d: f64) -> f64 {
    if d < PARALLEL_TOL {
        0.0
    } else {
        d.min(2.0)
    }
}

/// `1 − cos(a, b)`, clamped to `[0, 2]`; parallel vectors get exactly 0.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_dim(a.len(), b.len())?;
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 {
        return Err(Error::ZeroNorm(0));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm(1));
    }
    Ok(snap(1.0 - dot(a, b) / (na * nb)))
}

/// Dense row-major `N×N` cosine distance matrix.
pub fn cosine_distance_matrix(points: &ActivationSet) -> Result<Vec<f64>> {
    let n = points.len();
    let mut unit: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, row) in points.rows().enumerate() {
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm(i));
        }
        unit.push(row.iter().map(|v| v / norm).collect());
    }
    let mut dist = vec![0.0; n * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for j in 0..n {
            if i != j {
                out[j] = snap(1.0 - dot(&unit[i], &unit[j]));
            }
        }
    });
    Ok(dist)
}

/// Distance from each point to its `m`-th nearest other point. When fewer
/// than `m` other points exist the farthest one is used.
pub fn core_distances(dist: &[f64], n: usize, m: usize) -> Vec<f64> {
    let k = m.min(n - 1).max(1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i * n + j]).collect();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm over the complete mutual-reachability graph. Ties pick
/// the lexicographically smallest `(min, max)` endpoint pair. Edges are
/// returned sorted by `(weight, a, b)` with `a < b`.
pub fn mutual_reachability_mst(dist: &[f64], core: &[f64], n: usize) -> Vec<MstEdge> {
    let mr = |i: usize, j: usize| core[i].max(core[j]).max(dist[i * n + j]);
    let key = |w: f64, p: usize, v: usize| (w, p.min(v), p.max(v));
    let less = |x: (f64, usize, usize), y: (f64, usize, usize)| {
        x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)).is_lt()
    };

    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize, usize)> = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = key(mr(current, v), current, v);
            if less(cand, best[v]) {
                best[v] = cand;
                parent[v] = current;
            }
            if next == usize::MAX || less(best[v], best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        let p = parent[next];
        edges.push(MstEdge {
            a: p.min(next),
            b: p.max(next),
            weight: best[next].0,
        });
        current = next;
    }
    edges.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root index wins, keeps the forest deterministic
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Node of the (multi-way) single-linkage tree. Ids below `N` are points.
struct LinkNode {
    children: Vec<usize>,
    size: usize,
    height: f64,
}

fn single_linkage(edges: &[MstEdge], n: usize) -> Vec<LinkNode> {
    let mut nodes: Vec<LinkNode> = (0..n)
        .map(|_| LinkNode {
            children: Vec::new(),
            size: 1,
            height: 0.0,
        })
        .collect();
    let mut dsu = Dsu::new(n);
    let mut comp_node: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < edges.len() {
        let h = edges[start].weight;
        let end = start + edges[start..].iter().take_while(|e| e.weight == h).count();
        let group = &edges[start..end];
        let touched: Vec<usize> = group
            .iter()
            .flat_map(|e| [dsu.find(e.a), dsu.find(e.b)])
            .collect();
        let before: Vec<(usize, usize)> = touched.iter().map(|&r| (r, comp_node[r])).collect();
        for e in group {
            dsu.union(e.a, e.b);
        }
        let mut merged: Vec<(usize, usize)> = before
            .into_iter()
            .map(|(old_root, node)| (dsu.find(old_root), node))
            .collect();
        merged.sort_unstable();
        merged.dedup();
        let mut i = 0;
        while i < merged.len() {
            let root = merged[i].0;
            let children: Vec<usize> = merged[i..]
                .iter()
                .take_while(|(r, _)| *r == root)
                .map(|&(_, node)| node)
                .collect();
            i += children.len();
            let size = children.iter().map(|&c| nodes[c].size).sum();
            nodes.push(LinkNode {
                children,
                size,
                height: h,
            });
            comp_node[root] = nodes.len() - 1;
        }
        start = end;
    }
    nodes
}

fn lambda(height: f64) -> f64 {
    1.0 / height.max(MIN_LAMBDA_DISTANCE)
}

struct CondensedCluster {
    /// Link-tree node at which the cluster is born.
    node: usize,
    children: Vec<usize>,
    stability: f64,
}

/// Top-down condensation with the multi-way split rule: at each merge
/// height, children of size `≥ m` become new clusters when there are at
/// least two of them; otherwise the cluster continues through its single
/// large child and everything else falls out.
fn condense(nodes: &[LinkNode], root: usize, m: usize) -> Vec<CondensedCluster> {
    let mut clusters = vec![CondensedCluster {
        node: root,
        children: Vec::new(),
        stability: 0.0,
    }];
    let mut births = vec![0.0];
    let mut stack = vec![0usize];
    while let Some(c) = stack.pop() {
        let birth = births[c];
        let mut t = clusters[c].node;
        let mut stability = 0.0;
        loop {
            let node = &nodes[t];
            if node.children.is_empty() {
                // a lone point cannot carry a cluster since m ≥ 2
                break;
            }
            let lam = lambda(node.height);
            let big: Vec<usize> = node
                .children
                .iter()
                .copied()
                .filter(|&ch| nodes[ch].size >= m)
                .collect();
            let big_size: usize = big.iter().map(|&b| nodes[b].size).sum();
            let leaving = node.size - big_size;
            stability += leaving as f64 * (lam - birth);
            match big.len() {
                0 => break,
                1 => t = big[0],
                _ => {
                    stability += big_size as f64 * (lam - birth);
                    for b in big {
                        clusters.push(CondensedCluster {
                            node: b,
                            children: Vec::new(),
                            stability: 0.0,
                        });
                        births.push(lam);
                        let id = clusters.len() - 1;
                        clusters[c].children.push(id);
                        stack.push(id);
                    }
                    break;
                }
            }
        }
        clusters[c].stability = stability;
    }
    clusters
}

/// Excess-of-mass selection; the root is never selectable. On equal
/// stability the parent is kept.
fn select_eom(clusters: &[CondensedCluster]) -> Vec<usize> {
    let k = clusters.len();
    let mut best = vec![0.0; k];
    let mut keep_self = vec![false; k];
    // children always have larger ids than their parent
    for c in (1..k).rev() {
        let subtree: f64 = clusters[c].children.iter().map(|&ch| best[ch]).sum();
        if !clusters[c].children.is_empty() && subtree > clusters[c].stability {
            best[c] = subtree;
        } else {
            best[c] = clusters[c].stability;
            keep_self[c] = true;
        }
    }
    let mut selected = Vec::new();
    let mut stack: Vec<usize> = clusters[0].children.clone();
    while let Some(c) = stack.pop() {
        if keep_self[c] {
            selected.push(c);
        } else {
            stack.extend(clusters[c].children.iter().copied());
        }
    }
    selected
}

fn leaves(nodes: &[LinkNode], start: usize, out: &mut Vec<usize>) {
    let mut stack = vec![start];
    while let Some(t) = stack.pop() {
        if nodes[t].children.is_empty() {
            out.push(t);
        } else {
            stack.extend(nodes[t].children.iter().copied());
        }
    }
}

/// Flat clustering of `points` with minimum cluster size (and `min_samples`)
/// `m`.
pub fn hdbscan(points: &ActivationSet, m: usize) -> Result<ClusterResult> {
    let n = points.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "min_cluster_size must be at least 2, got {m}"
        )));
    }
    if n < m {
        return Err(Error::InsufficientSamples(format!(
            "{n} points cannot form a cluster of at least {m}"
        )));
    }
    let dist = cosine_distance_matrix(points)?;
    let core = core_distances(&dist, n, m);
    let edges = mutual_reachability_mst(&dist, &core, n);

    let mut labels = vec![NOISE; n];
    if edges.iter().all(|e| e.weight == 0.0) {
        // every point shares one direction: a single cluster
        labels.fill(0);
        return Ok(ClusterResult {
            labels,
            num_clusters: 1,
            min_cluster_size: m,
            core_distances: core,
        });
    }

    let nodes = single_linkage(&edges, n);
    let clusters = condense(&nodes, nodes.len() - 1, m);
    let mut members: Vec<Vec<usize>> = select_eom(&clusters)
        .into_iter()
        .map(|c| {
            let mut pts = Vec::new();
            leaves(&nodes, clusters[c].node, &mut pts);
            pts.sort_unstable();
            pts
        })
        .collect();
    members.sort_by_key(|pts| pts[0]);
    for (label, pts) in members.iter().enumerate() {
        for &p in pts {
            labels[p] = label as i64;
        }
    }
    Ok(ClusterResult {
        labels,
        num_clusters: members.len(),
        min_cluster_size: m,
        core_distances: core,
    })
}
