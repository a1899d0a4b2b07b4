//! Slow, independent reference implementations used to check the fast
//! paths. Shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

use guardcert::cluster::{cosine_distance_matrix, NOISE};
use guardcert::types::ActivationSet;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn sigmoid_ref(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Minimum score over all `2^d` corners of `[lower, upper]`.
pub fn corner_min_score(w: &[f64], b: f64, lower: &[f64], upper: &[f64]) -> f64 {
    let d = w.len();
    assert!(d <= 20, "corner enumeration is exponential");
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        let z: f64 = (0..d)
            .map(|i| w[i] * if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
            .sum::<f64>()
            + b;
        best = best.min(sigmoid_ref(z));
    }
    best
}

/// Mutual-reachability matrix with core distances taken by full sort.
pub fn mutual_reachability(points: &ActivationSet, m: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let flat = cosine_distance_matrix(points).unwrap();
    let dist = |i: usize, j: usize| flat[i * n + j];
    let k = m.min(n - 1);
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(i, j)).collect();
            others.sort_by(f64::total_cmp);
            others[k - 1]
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { dist(i, j).max(core[i]).max(core[j]) })
                .collect()
        })
        .collect()
}

/// Connected components of `set` using only edges strictly lighter than `h`.
fn components_below(mr: &[Vec<f64>], set: &[usize], h: f64) -> Vec<Vec<usize>> {
    let mut seen = vec![false; set.len()];
    let mut out = Vec::new();
    for s in 0..set.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![set[s]];
        let mut queue = vec![s];
        while let Some(a) = queue.pop() {
            for b in 0..set.len() {
                if !seen[b] && mr[set[a]][set[b]] < h {
                    seen[b] = true;
                    comp.push(set[b]);
                    queue.push(b);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Smallest height at which `set` is connected.
fn connection_height(mr: &[Vec<f64>], set: &[usize]) -> f64 {
    let mut levels: Vec<f64> = set
        .iter()
        .flat_map(|&a| set.iter().filter(move |&&b| b > a).map(move |&b| mr[a][b]))
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for h in levels {
        if components_below(mr, set, h.next_up()).len() == 1 {
            return h;
        }
    }
    0.0
}

struct Node {
    members: Vec<usize>,
    stability: f64,
    children: Vec<usize>,
}

fn lam(h: f64) -> f64 {
    1.0 / h.max(1e-300)
}

fn grow(mr: &[Vec<f64>], m: usize, nodes: &mut Vec<Node>, id: usize, birth: f64) {
    let mut current = nodes[id].members.clone();
    let mut stability = 0.0;
    loop {
        if current.len() < 2 {
            break;
        }
        let h = connection_height(mr, &current);
        let l = lam(h);
        let parts = components_below(mr, &current, h);
        let big: Vec<Vec<usize>> = parts.into_iter().filter(|p| p.len() >= m).collect();
        let big_total: usize = big.iter().map(Vec::len).sum();
        stability += (current.len() - big_total) as f64 * (l - birth);
        match big.len() {
            0 => break,
            1 => current = big.into_iter().next().unwrap(),
            _ => {
                stability += big_total as f64 * (l - birth);
                for part in big {
                    nodes.push(Node {
                        members: part,
                        stability: 0.0,
                        children: Vec::new(),
                    });
                    let child = nodes.len() - 1;
                    nodes[id].children.push(child);
                    grow(mr, m, nodes, child, l);
                }
                break;
            }
        }
    }
    nodes[id].stability = stability;
}

/// Returns (best total stability, selected nodes) for the subtree at `id`.
fn choose(nodes: &[Node], id: usize) -> (f64, Vec<usize>) {
    let mut sum = 0.0;
    let mut picked = Vec::new();
    for &c in &nodes[id].children {
        let (s, p) = choose(nodes, c);
        sum += s;
        picked.extend(p);
    }
    if nodes[id].children.is_empty() || nodes[id].stability >= sum {
        (nodes[id].stability, vec![id])
    } else {
        (sum, picked)
    }
}

/// Flat HDBSCAN labels computed top-down from threshold connectivity.
pub fn hdbscan_oracle(points: &ActivationSet, m: usize) -> Vec<i64> {
    let n = points.len();
    let mr = mutual_reachability(points, m);
    if mr.iter().all(|row| row.iter().all(|&v| v == 0.0)) {
        return vec![0; n];
    }
    let mut nodes = vec![Node {
        members: (0..n).collect(),
        stability: 0.0,
        children: Vec::new(),
    }];
    grow(&mr, m, &mut nodes, 0, 0.0);
    let mut selected: Vec<Vec<usize>> = Vec::new();
    for &c in &nodes[0].children.clone() {
        let (_, picked) = choose(&nodes, c);
        selected.extend(picked.into_iter().map(|p| nodes[p].members.clone()));
    }
    selected.sort_by_key(|members| members[0]);
    let mut labels = vec![NOISE; n];
    for (label, members) in selected.iter().enumerate() {
        for &p in members {
            labels[p] = label as i64;
        }
    }
    labels
}

/// Total weight of a minimum spanning tree by Kruskal over all pairs.
pub fn kruskal_weight(mr: &[Vec<f64>]) -> f64 {
    let n = mr.len();
    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .map(|(a, b)| (mr[a][b], a, b))
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut comp: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for (w, a, b) in edges {
        let (ca, cb) = (comp[a], comp[b]);
        if ca != cb {
            total += w;
            comp.iter_mut().filter(|c| **c == cb).for_each(|c| *c = ca);
        }
    }
    total
}

/// Lower-triangular `L` with `L Lᵀ = a`, by the textbook recurrence.
pub fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// A mixture given by weights, means and full covariance matrices.
pub struct MixtureSampler {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<Vec<Vec<f64>>>,
}

impl MixtureSampler {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: &[Vec<Vec<f64>>]) -> Self {
        Self {
            weights,
            means,
            factors: covs.iter().map(|c| cholesky(c)).collect(),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut c = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = i;
                break;
            }
        }
        let d = out.len();
        let eps: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factors[c];
        for i in 0..d {
            out[i] = self.means[c][i] + (0..=i).map(|k| l[i][k] * eps[k]).sum::<f64>();
        }
    }

    /// Fraction of `samples` draws whose logit `w·x + b` exceeds `threshold`.
    pub fn coverage(&self, w: &[f64], b: f64, threshold: f64, samples: usize, rng: &mut impl Rng) -> f64 {
        let mut x = vec![0.0; w.len()];
        let mut hits = 0usize;
        for _ in 0..samples {
            self.sample(rng, &mut x);
            let z: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + b;
            if z > threshold {
                hits += 1;
            }
        }
        hits as f64 / samples as f64
    }
}
