//! Ward agglomerative clustering via the Lance–Williams recurrence.
//!
//! Cluster ids follow the usual convention: points are `0..n`, the cluster
//! formed by merge `s` is `n + s`. The merge height is the increase in
//! total within-cluster sum of squares, n_i n_j / (n_i + n_j) |mu_i - mu_j|^2.

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Points in the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

pub fn ward_linkage(points: &[Vec<f64>]) -> Result<Dendrogram, AnalysisError> {
    let n = points.len();
    if n == 0 {
        return Err(AnalysisError::InvalidInput("no points to cluster".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(AnalysisError::InvalidInput("points differ in dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("non-finite coordinate".into()));
    }

    // d[a][b] holds the merge cost between the clusters in slots a and b;
    // slot a starts as point a and is reused by every merge it survives
    let mut d = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..a {
            let sq: f64 = points[a].iter().zip(&points[b]).map(|(x, y)| (x - y).powi(2)).sum();
            d[a][b] = 0.5 * sq;
            d[b][a] = d[a][b];
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ia, &a) in active.iter().enumerate() {
            for &b in &active[ia + 1..] {
                let (lo, hi) = (id[a].min(id[b]), id[a].max(id[b]));
                let cand = (d[a][b], lo, hi, a, b);
                let better = match best {
                    None => true,
                    Some((h, l, r, _, _)) => {
                        cand.0 < h || (cand.0 == h && (lo, hi) < (l, r))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (height, left, right, a, b) = best.expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[k][a] + (nb + nk) * d[k][b] - nk * d[a][b]) / (na + nb + nk);
            d[k][a] = v;
            d[a][k] = v;
        }
        size[a] += size[b];
        id[a] = n + step;
        active.retain(|&k| k != b);
        merges.push(Merge {
            left,
            right,
            height,
            size: size[a],
        });
    }
    Ok(Dendrogram { n, merges })
}

/// Flat clustering into `k` clusters by undoing the last `k - 1` merges.
/// Clusters are numbered from 0 in order of their smallest member index.
pub fn cut(d: &Dendrogram, k: usize) -> Result<Vec<usize>, AnalysisError> {
    if k == 0 || k > d.n {
        return Err(AnalysisError::InvalidInput(format!(
            "cluster count {k} outside 1..={}",
            d.n
        )));
    }
    let total = d.n + d.merges.len();
    let mut parent: Vec<usize> = (0..total).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in d.merges.iter().take(d.n - k).enumerate() {
        let node = d.n + s;
        parent[m.left] = node;
        parent[m.right] = node;
    }
    let mut number: Vec<Option<usize>> = vec![None; total];
    let mut next = 0;
    let mut labels = Vec::with_capacity(d.n);
    for i in 0..d.n {
        let r = root(&mut parent, i);
        let label = *number[r].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        labels.push(label);
    }
    Ok(labels)
}
