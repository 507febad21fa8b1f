//! Minimal spanning tree over the metric distances of a correlation
//! network, plus edge-set comparison between trees.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::correlation::{distance, CorrelationNetwork};
use crate::currency::CurrencyCode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEdge {
    /// Node indices with `u < v`.
    pub u: usize,
    pub v: usize,
    pub distance: f64,
    /// `|R|` of the endpoints.
    pub weight: f64,
    pub correlation: f64,
    /// Set iff the underlying correlation is negative (`d > sqrt 2`).
    pub anticorrelated: bool,
}

impl TreeEdge {
    pub fn from_correlation(u: usize, v: usize, correlation: f64) -> Result<Self> {
        if u == v {
            return Err(Error::validation("self-loop edge"));
        }
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        Ok(TreeEdge {
            u,
            v,
            distance: distance(correlation)?,
            weight: correlation.abs().min(1.0),
            correlation,
            anticorrelated: correlation < 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    base: CurrencyCode,
    nodes: Vec<CurrencyCode>,
    edges: Vec<TreeEdge>,
}

impl SpanningTree {
    /// Validates that `edges` form a spanning tree over `nodes`.
    pub fn new(base: CurrencyCode, nodes: Vec<CurrencyCode>, edges: Vec<TreeEdge>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::size("tree needs at least one node"));
        }
        if edges.len() != n - 1 {
            return Err(Error::validation(format!(
                "{} edges for {n} nodes; a spanning tree has N-1",
                edges.len()
            )));
        }
        let mut dsu = DisjointSets::new(n);
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::validation("edge endpoint out of range"));
            }
            if !dsu.union(e.u, e.v) {
                return Err(Error::validation(format!(
                    "edge {}-{} closes a cycle",
                    nodes[e.u], nodes[e.v]
                )));
            }
        }
        Ok(SpanningTree { base, nodes, edges })
    }

    /// Tree with the given index pairs and unit correlations; handy for
    /// purely topological work.
    pub fn from_pairs(base: CurrencyCode, nodes: Vec<CurrencyCode>, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(u, v)| TreeEdge::from_correlation(u, v, 1.0))
            .collect::<Result<_>>()?;
        SpanningTree::new(base, nodes, edges)
    }

    pub fn base(&self) -> CurrencyCode {
        self.base
    }

    pub fn nodes(&self) -> &[CurrencyCode] {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn index_of(&self, code: CurrencyCode) -> Result<usize> {
        self.nodes
            .iter()
            .position(|c| *c == code)
            .ok_or(Error::NotFound(code))
    }

    pub fn endpoints(&self, edge: &TreeEdge) -> (CurrencyCode, CurrencyCode) {
        ordered(self.nodes[edge.u], self.nodes[edge.v])
    }

    pub fn total_distance(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        adj
    }
}

fn ordered(a: CurrencyCode, b: CurrencyCode) -> (CurrencyCode, CurrencyCode) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Kruskal over a symmetric distance matrix. Candidate edges are taken in
/// ascending `(distance, lower label, higher label)` order, so equal
/// distances resolve the same way on every run. Returns index pairs.
pub fn kruskal(distances: &DMatrix<f64>, labels: &[CurrencyCode]) -> Result<Vec<(usize, usize)>> {
    let n = labels.len();
    if distances.nrows() != n || distances.ncols() != n {
        return Err(Error::validation("distance matrix does not match labels"));
    }
    let mut candidates = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = distances[(i, j)];
            if !d.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite distance between {} and {}",
                    labels[i], labels[j]
                )));
            }
            let (lo, hi) = ordered(labels[i], labels[j]);
            candidates.push((d, lo, hi, i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut dsu = DisjointSets::new(n);
    let mut picked = Vec::with_capacity(n.saturating_sub(1));
    for (_, _, _, i, j) in candidates {
        if dsu.union(i, j) {
            picked.push((i, j));
            if picked.len() + 1 == n {
                break;
            }
        }
    }
    Ok(picked)
}

pub fn build_mst(net: &CorrelationNetwork) -> Result<SpanningTree> {
    if net.n() < 2 {
        return Err(Error::size("spanning tree needs N >= 2"));
    }
    let pairs = kruskal(net.distances(), net.nodes())?;
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let mut e = TreeEdge::from_correlation(i, j, net.correlation()[(i, j)])?;
            // Keep the network's own distance so totals match the matrix.
            e.distance = net.distances()[(i, j)];
            Ok(e)
        })
        .collect::<Result<_>>()?;
    SpanningTree::new(net.base(), net.nodes().to_vec(), edges)
}

/// Labelled edge set of a tree together with its node universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    nodes: BTreeSet<CurrencyCode>,
    edges: BTreeSet<(CurrencyCode, CurrencyCode)>,
}

impl EdgeSet {
    pub fn new(
        nodes: impl IntoIterator<Item = CurrencyCode>,
        edges: impl IntoIterator<Item = (CurrencyCode, CurrencyCode)>,
    ) -> Result<Self> {
        let nodes: BTreeSet<_> = nodes.into_iter().collect();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || !nodes.contains(&a) || !nodes.contains(&b) {
                return Err(Error::validation(format!("edge {a}-{b} not over the node set")));
            }
            set.insert(ordered(a, b));
        }
        Ok(EdgeSet { nodes, edges: set })
    }

    pub fn nodes(&self) -> &BTreeSet<CurrencyCode> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(CurrencyCode, CurrencyCode)> {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Canonical edge set: pairs ordered within and across.
pub fn edge_set(tree: &SpanningTree) -> EdgeSet {
    EdgeSet {
        nodes: tree.nodes.iter().copied().collect(),
        edges: tree.edges.iter().map(|e| tree.endpoints(e)).collect(),
    }
}

fn tree_edge_count(sets: &[&EdgeSet]) -> Result<f64> {
    let first = sets[0];
    if sets.iter().any(|s| s.nodes != first.nodes) {
        return Err(Error::validation("edge sets are over different node sets"));
    }
    let n = first.nodes.len();
    if n < 2 {
        return Err(Error::size("survival ratios need at least two nodes"));
    }
    Ok((n - 1) as f64)
}

/// `|E1 ∩ E2| / (N - 1)`.
pub fn survival_single(e1: &EdgeSet, e2: &EdgeSet) -> Result<f64> {
    let denom = tree_edge_count(&[e1, e2])?;
    Ok(e1.edges.intersection(&e2.edges).count() as f64 / denom)
}

/// `|E1 ∩ E2 ∩ ... ∩ Ek| / (N - 1)`.
pub fn survival_multi(sets: &[EdgeSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::validation("survival_multi needs at least one edge set"));
    }
    let refs: Vec<&EdgeSet> = sets.iter().collect();
    let denom = tree_edge_count(&refs)?;
    let mut common = sets[0].edges.clone();
    for s in &sets[1..] {
        common.retain(|e| s.edges.contains(e));
        if common.is_empty() {
            break;
        }
    }
    Ok(common.len() as f64 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currency::code;
    use proptest::prelude::*;

    fn labels(names: &[&str]) -> Vec<CurrencyCode> {
        names.iter().map(|s| code(s)).collect()
    }

    fn net_from_distances(nodes: Vec<CurrencyCode>, d: &DMatrix<f64>) -> CorrelationNetwork {
        let n = nodes.len();
        let r = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 1.0 - d[(i, j)].powi(2) / 2.0 });
        CorrelationNetwork::from_correlations(code("ZZZ"), nodes, r).unwrap()
    }

    fn set(nodes: &[&str], edges: &[(&str, &str)]) -> EdgeSet {
        EdgeSet::new(labels(nodes), edges.iter().map(|(a, b)| (code(a), code(b)))).unwrap()
    }

    #[test]
    fn three_node_greedy() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.9, 0.5, 0.0, 0.7, 0.9, 0.7, 0.0]);
        let net = net_from_distances(labels(&["AAA", "BBB", "CCC"]), &d);
        let tree = build_mst(&net).unwrap();
        let es = edge_set(&tree);
        assert_eq!(es, set(&["AAA", "BBB", "CCC"], &[("AAA", "BBB"), ("BBB", "CCC")]));
        assert!((tree.total_distance() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn equidistant_nodes_follow_label_order() {
        let n = 6;
        let names = ["FFF", "BBB", "EEE", "AAA", "DDD", "CCC"];
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let tree = build_mst(&net_from_distances(labels(&names), &d)).unwrap();
        // Ties sorted by (min code, max code): AAA joins everything first.
        let expected = set(
            &names,
            &[("AAA", "BBB"), ("AAA", "CCC"), ("AAA", "DDD"), ("AAA", "EEE"), ("AAA", "FFF")],
        );
        assert_eq!(edge_set(&tree), expected);
        for _ in 0..5 {
            assert_eq!(edge_set(&build_mst(&net_from_distances(labels(&names), &d)).unwrap()), expected);
        }
    }

    #[test]
    fn anticorrelated_edges_are_flagged() {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, -0.8, 0.1, -0.8, 1.0, 0.05, 0.1, 0.05, 1.0]);
        let net = CorrelationNetwork::from_correlations(code("ZZZ"), labels(&["AAA", "BBB", "CCC"]), r).unwrap();
        let tree = build_mst(&net).unwrap();
        assert_eq!(tree.edges().len(), 2);
        for e in tree.edges() {
            assert_eq!(e.anticorrelated, e.correlation < 0.0);
            assert_eq!(e.anticorrelated, e.distance > std::f64::consts::SQRT_2);
            assert!((e.weight - e.correlation.abs()).abs() < 1e-15);
        }
        // AAA-CCC (r=0.1, d=1.342) and BBB-CCC (r=0.05, d=1.378) beat AAA-BBB (d=1.897).
        assert!(tree.edges().iter().all(|e| !e.anticorrelated));
    }

    #[test]
    fn non_finite_distance_is_rejected() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(matches!(kruskal(&d, &labels(&["AAA", "BBB"])), Err(Error::Validation(_))));
    }

    #[test]
    fn tree_validation() {
        let nodes = labels(&["AAA", "BBB", "CCC", "DDD"]);
        assert!(SpanningTree::from_pairs(code("ZZZ"), nodes.clone(), &[(0, 1), (1, 2), (2, 3)]).is_ok());
        assert!(SpanningTree::from_pairs(code("ZZZ"), nodes.clone(), &[(0, 1), (1, 2)]).is_err());
        assert!(SpanningTree::from_pairs(code("ZZZ"), nodes.clone(), &[(0, 1), (1, 0), (2, 3)]).is_err());
        assert!(SpanningTree::from_pairs(code("ZZZ"), nodes, &[(0, 1), (1, 2), (2, 9)]).is_err());
    }

    #[test]
    fn edge_set_is_canonical() {
        let nodes = labels(&["AAA", "BBB", "CCC"]);
        let t1 = SpanningTree::from_pairs(code("ZZZ"), nodes.clone(), &[(0, 1), (1, 2)]).unwrap();
        let t2 = SpanningTree::from_pairs(code("ZZZ"), nodes.clone(), &[(2, 1), (1, 0)]).unwrap();
        assert_eq!(edge_set(&t1), edge_set(&t2));
        let pairs: Vec<_> = edge_set(&t1).edges().iter().copied().collect();
        assert_eq!(pairs, vec![(code("AAA"), code("BBB")), (code("BBB"), code("CCC"))]);
        // Same shape, different labels.
        let t3 = SpanningTree::from_pairs(code("ZZZ"), nodes, &[(1, 0), (0, 2)]).unwrap();
        assert_ne!(edge_set(&t1), edge_set(&t3));
    }

    #[test]
    fn survival_examples() {
        let nodes = ["AAA", "BBB", "CCC", "DDD"];
        let e1 = set(&nodes, &[("AAA", "BBB"), ("BBB", "CCC"), ("CCC", "DDD")]);
        let e2 = set(&nodes, &[("AAA", "BBB"), ("BBB", "DDD"), ("CCC", "DDD")]);
        let e3 = set(&nodes, &[("AAA", "BBB"), ("AAA", "CCC"), ("AAA", "DDD")]);
        let disjoint = set(&nodes, &[("AAA", "CCC"), ("AAA", "DDD"), ("BBB", "DDD")]);
        assert_eq!(survival_single(&e1, &e1).unwrap(), 1.0);
        assert_eq!(survival_single(&e1, &disjoint).unwrap(), 0.0);
        assert!((survival_single(&e1, &e2).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        assert_eq!(survival_multi(std::slice::from_ref(&e1)).unwrap(), 1.0);
        assert_eq!(survival_multi(&[e1.clone(), e2.clone(), disjoint]).unwrap(), 0.0);
        assert!((survival_multi(&[e1, e2, e3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(survival_multi(&[]).is_err());
    }

    #[test]
    fn survival_rejects_mismatched_nodes() {
        let a = set(&["AAA", "BBB", "CCC"], &[("AAA", "BBB"), ("BBB", "CCC")]);
        let b = set(&["AAA", "BBB", "DDD"], &[("AAA", "BBB"), ("BBB", "DDD")]);
        assert!(matches!(survival_single(&a, &b), Err(Error::Validation(_))));
        assert!(matches!(survival_multi(&[a, b]), Err(Error::Validation(_))));
    }

    fn arb_distances() -> impl Strategy<Value = DMatrix<f64>> {
        (3usize..9).prop_flat_map(|n| {
            prop::collection::vec(0.01f64..1.99, n * (n - 1) / 2).prop_map(move |vals| {
                let mut d = DMatrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        d[(i, j)] = vals[k];
                        d[(j, i)] = vals[k];
                        k += 1;
                    }
                }
                d
            })
        })
    }

    proptest! {
        #[test]
        fn mst_is_invariant_under_monotone_transform(d in arb_distances()) {
            let nodes: Vec<_> = (0..d.nrows()).map(CurrencyCode::synthetic).collect();
            let squared = d.map(|x| x * x);
            let a = kruskal(&d, &nodes).unwrap();
            let b = kruskal(&squared, &nodes).unwrap();
            let canon = |p: Vec<(usize, usize)>| p.into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect::<BTreeSet<_>>();
            prop_assert_eq!(canon(a.clone()), canon(b));
            prop_assert_eq!(a.len(), d.nrows() - 1);
        }

        #[test]
        fn multi_survival_bounded_by_single(d1 in arb_distances(), seed in 0u64..1000) {
            let n = d1.nrows();
            let nodes: Vec<_> = (0..n).map(CurrencyCode::synthetic).collect();
            // Derive two more matrices by perturbing with a deterministic pattern.
            let d2 = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (d1[(i, j)] + ((i + j) as u64 * seed % 7) as f64 * 0.1) % 2.0 });
            let d3 = d1.map(|x| 2.0 - x);
            let sets: Vec<EdgeSet> = [d1, d2, d3].iter().map(|d| {
                let pairs = kruskal(d, &nodes).unwrap();
                EdgeSet::new(nodes.clone(), pairs.into_iter().map(|(i, j)| (nodes[i], nodes[j]))).unwrap()
            }).collect();
            let multi = survival_multi(&sets).unwrap();
            for w in sets.windows(2) {
                prop_assert!(multi <= survival_single(&w[0], &w[1]).unwrap());
            }
            prop_assert!(survival_multi(&sets[..2]).unwrap() >= multi);
        }
    }
}
