//! Topological metrics of the spanning tree and weighted metrics of the
//! complete correlation network.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationNetwork;
use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::ingest::{cross_rates, RatePanel};
use crate::mst::SpanningTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub degree: usize,
    pub betweenness: f64,
    pub clustering: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub base: CurrencyCode,
    pub n: usize,
    pub per_node: BTreeMap<CurrencyCode, NodeMetrics>,
    /// Characteristic path length of the unweighted tree.
    pub path_length: f64,
    /// Average weighted clustering coefficient of the complete network.
    pub clustering: f64,
    /// Average metric distance over node pairs of the complete network.
    pub internode_distance: f64,
    pub lambda_max: f64,
}

pub fn node_degree(tree: &SpanningTree, x: CurrencyCode) -> Result<usize> {
    let i = tree.index_of(x)?;
    Ok(tree.edges().iter().filter(|e| e.u == i || e.v == i).count())
}

/// Parent links and a pre-order from a DFS rooted at node 0.
fn rooted(tree: &SpanningTree) -> (Vec<usize>, Vec<usize>) {
    let adj = tree.adjacency();
    let n = tree.n();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0];
    parent[0] = 0;
    while let Some(u) = stack.pop() {
        order.push(u);
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                stack.push(v);
            }
        }
    }
    (parent, order)
}

fn subtree_sizes(parent: &[usize], order: &[usize]) -> Vec<usize> {
    let mut size = vec![1usize; parent.len()];
    for &u in order.iter().skip(1).rev() {
        size[parent[u]] += size[u];
    }
    size
}

/// Betweenness of every node: the fraction of ordered pairs `(Y, Z)` of
/// other nodes whose tree path runs through the node.
///
/// Removing `X` splits the tree into components of sizes `s_k`; the pairs
/// routed through `X` are exactly those in different components, i.e.
/// `(N-1)^2 - sum s_k^2`.
pub fn betweenness_all(tree: &SpanningTree) -> Result<Vec<f64>> {
    let n = tree.n();
    if n < 3 {
        return Err(Error::size(format!("betweenness needs N >= 3, got {n}")));
    }
    let (parent, order) = rooted(tree);
    let size = subtree_sizes(&parent, &order);
    let mut squares = vec![0usize; n];
    for &u in order.iter().skip(1) {
        squares[parent[u]] += size[u] * size[u];
    }
    for &u in &order {
        let up = n - size[u];
        squares[u] += up * up;
    }
    let pairs = ((n - 1) * (n - 2)) as f64;
    Ok(squares
        .iter()
        .map(|sq| ((n - 1) * (n - 1) - sq) as f64 / pairs)
        .collect())
}

pub fn betweenness(tree: &SpanningTree, x: CurrencyCode) -> Result<f64> {
    let i = tree.index_of(x)?;
    Ok(betweenness_all(tree)?[i])
}

/// Mean hop count over ordered node pairs of the unweighted tree. Each edge
/// separating `s` nodes from `N - s` lies on `2 s (N - s)` ordered paths.
pub fn path_length(tree: &SpanningTree) -> Result<f64> {
    let n = tree.n();
    if n < 2 {
        return Err(Error::size("path length needs N >= 2"));
    }
    let (parent, order) = rooted(tree);
    let size = subtree_sizes(&parent, &order);
    let total: usize = order.iter().skip(1).map(|&u| 2 * size[u] * (n - size[u])).sum();
    Ok(total as f64 / (n * (n - 1)) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub per_node: Vec<f64>,
    pub average: f64,
}

/// Weighted clustering coefficient of a complete network given by its
/// weight matrix. Weights are scaled by the largest off-diagonal weight and
/// each node averages the geometric mean of its triangle weights over the
/// ordered neighbour pairs:
///
/// `c(X) = 1/(K(K-1)) sum_{Y != Z} (w~XY w~YZ w~ZX)^(1/3)`, `K = N - 1`.
///
/// With `q = w~^(1/3)` and a zero diagonal the sum is `(q^3)_XX`.
pub fn weighted_clustering_from_weights(weights: &DMatrix<f64>) -> Result<Clustering> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(Error::validation("weight matrix must be square"));
    }
    if n < 3 {
        return Err(Error::size(format!("clustering needs N >= 3, got {n}")));
    }
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let w = weights[(i, j)];
            if i != j {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::validation(format!("invalid weight {w}")));
                }
                max = max.max(w);
            }
        }
    }
    if max == 0.0 {
        return Err(Error::Numeric("all weights are zero".into()));
    }
    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (weights[(i, j)] / max).cbrt() });
    let q2 = &q * &q;
    let k = (n - 1) as f64;
    let per_node: Vec<f64> = (0..n)
        .map(|x| (0..n).map(|y| q2[(x, y)] * q[(y, x)]).sum::<f64>() / (k * (k - 1.0)))
        .collect();
    let average = per_node.iter().sum::<f64>() / n as f64;
    Ok(Clustering { per_node, average })
}

pub fn weighted_clustering(net: &CorrelationNetwork) -> Result<Clustering> {
    weighted_clustering_from_weights(net.weights())
}

/// Mean metric distance over ordered pairs `X != Y`.
pub fn internode_distance(net: &CorrelationNetwork) -> Result<f64> {
    let n = net.n();
    if n < 2 {
        return Err(Error::size("internode distance needs N >= 2"));
    }
    let d = net.distances();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += d[(i, j)];
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Numbers of other nodes strictly closer to `a` than to `b`, and vice
/// versa. Exact ties count for neither.
pub fn proximity_count(net: &CorrelationNetwork, a: CurrencyCode, b: CurrencyCode) -> Result<(usize, usize)> {
    if a == b {
        return Err(Error::validation(format!("proximity needs two distinct nodes, got {a} twice")));
    }
    let (ia, ib) = (net.index_of(a)?, net.index_of(b)?);
    let d = net.distances();
    let (mut count_a, mut count_b) = (0, 0);
    for x in (0..net.n()).filter(|&x| x != ia && x != ib) {
        if d[(x, ia)] < d[(x, ib)] {
            count_a += 1;
        } else if d[(x, ib)] < d[(x, ia)] {
            count_b += 1;
        }
    }
    Ok((count_a, count_b))
}

/// For each day, the mean of `ln(base/X)` over all price currencies `X`.
pub fn average_log_rate(panel: &RatePanel, base: CurrencyCode) -> Result<Vec<f64>> {
    let series = cross_rates(panel, base)?;
    if series.is_empty() {
        return Err(Error::size("no price currencies"));
    }
    let k = series.len() as f64;
    Ok((0..panel.date_count())
        .map(|t| series.iter().map(|s| s.values[t].ln()).sum::<f64>() / k)
        .collect())
}

/// All scalar and per-node metrics for one network and its tree.
pub fn metrics_report(net: &CorrelationNetwork, tree: &SpanningTree) -> Result<MetricsReport> {
    if net.nodes() != tree.nodes() {
        return Err(Error::validation("tree and network have different nodes"));
    }
    let betweenness = betweenness_all(tree)?;
    let clustering = weighted_clustering(net)?;
    let mut degree = vec![0usize; tree.n()];
    for e in tree.edges() {
        degree[e.u] += 1;
        degree[e.v] += 1;
    }
    let per_node = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, code)| {
            (
                *code,
                NodeMetrics {
                    degree: degree[i],
                    betweenness: betweenness[i],
                    clustering: clustering.per_node[i],
                },
            )
        })
        .collect();
    Ok(MetricsReport {
        base: net.base(),
        n: net.n(),
        per_node,
        path_length: path_length(tree)?,
        clustering: clustering.average,
        internode_distance: internode_distance(net)?,
        lambda_max: net.largest_eigenvalue()?,
    })
}
