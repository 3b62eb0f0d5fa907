//! Feynman-graph combinatorics: Betti numbers, induced subgraphs, Kruskal
//! sector trees, metric filtrations and divergence analysis.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{CoreError, Result};
use crate::linform::LinearForm;

/// Hard cap on edge counts for the exponential subgraph/sector enumerations.
pub const EDGE_CAP: usize = 16;

/// A finite graph with labelled vertices, no self-loops, parallel edges
/// allowed. Edge order is significant: it defines the edge indices `0..E`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeynmanGraph {
    vertices: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl FeynmanGraph {
    pub fn new(vertices: Vec<usize>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &v in &vertices {
            if !seen.insert(v) {
                return Err(CoreError::Graph(format!("duplicate vertex id {v}")));
            }
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a == b {
                return Err(CoreError::Graph(format!(
                    "edge {} is a self-loop at vertex {a}",
                    k + 1
                )));
            }
            if !seen.contains(&a) || !seen.contains(&b) {
                return Err(CoreError::Graph(format!(
                    "edge {} references unknown vertex",
                    k + 1
                )));
            }
        }
        Ok(FeynmanGraph { vertices, edges })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn endpoints(&self, e: usize) -> Result<(usize, usize)> {
        self.edges
            .get(e)
            .copied()
            .ok_or(CoreError::UnknownEdge(e, self.edges.len()))
    }

    fn vertex_pos(&self, v: usize) -> usize {
        self.vertices.iter().position(|&u| u == v).unwrap()
    }

    /// Number of connected components, isolated vertices included.
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for &(a, b) in &self.edges {
            uf.unite(self.vertex_pos(a), self.vertex_pos(b));
        }
        uf.component_count()
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// First Betti number `|E| - |V| + #components`.
    pub fn betti(&self) -> usize {
        self.edges.len() + self.component_count() - self.vertices.len()
    }

    /// Betti number of the subgraph induced by `edge_set` without building it.
    pub fn betti_of_subset(&self, edge_set: &[usize]) -> Result<usize> {
        let mut verts = BTreeSet::new();
        for &e in edge_set {
            let (a, b) = self.endpoints(e)?;
            verts.insert(a);
            verts.insert(b);
        }
        let ids: Vec<usize> = verts.iter().copied().collect();
        let mut uf = UnionFind::new(ids.len());
        for &e in edge_set {
            let (a, b) = self.edges[e];
            let pa = ids.binary_search(&a).unwrap();
            let pb = ids.binary_search(&b).unwrap();
            uf.unite(pa, pb);
        }
        Ok(edge_set.len() + uf.component_count() - ids.len())
    }

    /// The subgraph induced by a set of edge indices: its vertices are exactly
    /// the incident ones. Returns the graph together with the sorted original
    /// edge indices (the canonical identity of the subgraph).
    pub fn induced_subgraph(&self, edge_set: &[usize]) -> Result<(FeynmanGraph, Vec<usize>)> {
        let mut idx: Vec<usize> = edge_set.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let mut verts = BTreeSet::new();
        for &e in &idx {
            let (a, b) = self.endpoints(e)?;
            verts.insert(a);
            verts.insert(b);
        }
        let edges: Vec<(usize, usize)> = idx.iter().map(|&e| self.edges[e]).collect();
        Ok((
            FeynmanGraph::new(verts.into_iter().collect(), edges)?,
            idx,
        ))
    }

    /// Filtration `G_{sigma(1)} ⊆ ... ⊆ G_{sigma(E)}` induced by a permutation
    /// of the edge indices (0-based).
    pub fn sector_filtration(&self, perm: &[usize]) -> Result<Vec<(FeynmanGraph, Vec<usize>)>> {
        check_permutation(perm, self.edge_count())?;
        let mut out = Vec::with_capacity(perm.len());
        for i in 1..=perm.len() {
            out.push(self.induced_subgraph(&perm[..i])?);
        }
        Ok(out)
    }

    /// Partitions the edges across a vertex split `I`: edges internal to `I`,
    /// internal to the complement, and crossing.
    pub fn edge_partition_by_vertex_split(
        &self,
        i_set: &[usize],
    ) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let iset: BTreeSet<usize> = i_set.iter().copied().collect();
        let mut e_i = vec![];
        let mut e_ic = vec![];
        let mut e_cross = vec![];
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            match (iset.contains(&a), iset.contains(&b)) {
                (true, true) => e_i.push(k),
                (false, false) => e_ic.push(k),
                _ => e_cross.push(k),
            }
        }
        (e_i, e_ic, e_cross)
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(CoreError::InvalidPermutation(perm.to_vec()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(CoreError::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Graph with nonnegative integer heat labels on the edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledGraph {
    pub graph: FeynmanGraph,
    pub labels: Vec<u32>,
}

impl LabelledGraph {
    pub fn new(graph: FeynmanGraph, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != graph.edge_count() {
            return Err(CoreError::Graph(format!(
                "{} labels for {} edges",
                labels.len(),
                graph.edge_count()
            )));
        }
        Ok(LabelledGraph { graph, labels })
    }

    pub fn zero_labels(graph: FeynmanGraph) -> Self {
        let labels = vec![0; graph.edge_count()];
        LabelledGraph { graph, labels }
    }
}

/// Graph with positive edge lengths; strict if all lengths are distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGraph {
    pub graph: FeynmanGraph,
    pub lengths: Vec<f64>,
}

impl MetricGraph {
    pub fn new(graph: FeynmanGraph, lengths: Vec<f64>) -> Result<Self> {
        if lengths.len() != graph.edge_count() {
            return Err(CoreError::Graph(format!(
                "{} lengths for {} edges",
                lengths.len(),
                graph.edge_count()
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(CoreError::Graph("edge lengths must be positive".into()));
        }
        Ok(MetricGraph { graph, lengths })
    }

    pub fn is_strict(&self) -> bool {
        let mut sorted = self.lengths.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.windows(2).all(|w| w[0] != w[1])
    }

    /// Edge indices ordered by increasing length.
    pub fn rank_order(&self) -> Result<Vec<usize>> {
        if !self.is_strict() {
            return Err(CoreError::TiedLengths);
        }
        let mut idx: Vec<usize> = (0..self.lengths.len()).collect();
        idx.sort_by(|&a, &b| self.lengths[a].partial_cmp(&self.lengths[b]).unwrap());
        Ok(idx)
    }
}

/// Result of the Kruskal construction, with the per-step trace diagnostics of
/// the filtration property.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanningForestResult {
    /// Edge indices of the spanning forest, sorted.
    pub tree_edges: Vec<usize>,
    /// For each filtration step `i`, whether the trace on `G_i` is a spanning
    /// forest of `G_i`.
    pub per_step_trace_ok: Vec<bool>,
}

/// Kruskal forest for an arbitrary edge ranking (shortest first). Works on
/// disconnected graphs, yielding a spanning forest.
pub fn kruskal_forest(graph: &FeynmanGraph, rank_order: &[usize]) -> Result<SpanningForestResult> {
    check_permutation(rank_order, graph.edge_count())?;
    let mut uf = UnionFind::new(graph.vertex_count());
    let mut tree = Vec::new();
    for &e in rank_order {
        let (a, b) = graph.endpoints(e)?;
        let pa = graph.vertex_pos(a);
        let pb = graph.vertex_pos(b);
        if uf.unite(pa, pb) {
            tree.push(e);
        }
    }
    tree.sort_unstable();
    let mut per_step_trace_ok = Vec::with_capacity(rank_order.len());
    for i in 1..=rank_order.len() {
        let step: Vec<usize> = rank_order[..i].to_vec();
        let trace: Vec<usize> = step.iter().copied().filter(|e| tree.contains(e)).collect();
        let b1 = graph.betti_of_subset(&step)?;
        per_step_trace_ok.push(trace.len() == step.len() - b1);
    }
    Ok(SpanningForestResult {
        tree_edges: tree,
        per_step_trace_ok,
    })
}

/// The unique spanning tree of a connected strict metric graph whose trace is
/// a spanning forest at every step of the metric filtration.
pub fn kruskal_tree(metric: &MetricGraph) -> Result<SpanningForestResult> {
    if !metric.graph.is_connected() {
        return Err(CoreError::Disconnected);
    }
    let order = metric.rank_order()?;
    kruskal_forest(&metric.graph, &order)
}

/// The unique simple cycle in `tree ∪ {e}`: the tree path from `i(e)` to
/// `j(e)` as `(edge, sign)` pairs, followed by `(e, +1)`. The sign is `+1`
/// when the edge is traversed in its stored orientation.
pub fn fundamental_cycle(
    graph: &FeynmanGraph,
    tree_edges: &[usize],
    e: usize,
) -> Result<Vec<(usize, i8)>> {
    let (i_e, j_e) = graph.endpoints(e)?;
    if tree_edges.contains(&e) {
        return Err(CoreError::Graph(format!(
            "edge {} already belongs to the tree",
            e + 1
        )));
    }
    // spanning check: forest + correct edge count
    let b1_tree = graph.betti_of_subset(tree_edges)?;
    if b1_tree != 0 || tree_edges.len() + graph.betti() != graph.edge_count() {
        return Err(CoreError::Graph("tree_edges is not a spanning tree".into()));
    }
    let path = tree_path(graph, tree_edges, i_e, j_e)
        .ok_or_else(|| CoreError::Graph("endpoints not connected in tree".into()))?;
    let mut cycle = path;
    cycle.push((e, 1));
    Ok(cycle)
}

/// BFS path between two vertices through the given edges, as `(edge, sign)`.
pub(crate) fn tree_path(
    graph: &FeynmanGraph,
    tree_edges: &[usize],
    from: usize,
    to: usize,
) -> Option<Vec<(usize, i8)>> {
    use std::collections::VecDeque;
    if from == to {
        return Some(vec![]);
    }
    let mut prev: std::collections::HashMap<usize, (usize, usize, i8)> =
        std::collections::HashMap::new();
    let mut q = VecDeque::new();
    q.push_back(from);
    prev.insert(from, (from, usize::MAX, 0));
    while let Some(v) = q.pop_front() {
        if v == to {
            break;
        }
        for &e in tree_edges {
            let (a, b) = graph.edges()[e];
            let next = if a == v {
                Some((b, 1i8))
            } else if b == v {
                Some((a, -1i8))
            } else {
                None
            };
            if let Some((w, sign)) = next {
                if !prev.contains_key(&w) {
                    prev.insert(w, (v, e, sign));
                    q.push_back(w);
                }
            }
        }
    }
    if !prev.contains_key(&to) {
        return None;
    }
    let mut path = vec![];
    let mut cur = to;
    while cur != from {
        let (p, e, sign) = prev[&cur];
        path.push((e, sign));
        cur = p;
    }
    path.reverse();
    Some(path)
}

/// A divergent subgraph, its pole hyperplane and the order bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// Sorted edge-index sets `G'` with `2|E(G')| - d*b1(G') <= 0`.
    pub divergent_subgraphs: Vec<Vec<usize>>,
    /// Hyperplane `sum_{e in G'} sigma_e = 0` for each listed subgraph.
    pub hyperplanes: Vec<LinearForm>,
    /// `m = sum over strictly divergent G' of (d*b1 - 2|E'| + 1)`.
    pub order_bound: usize,
}

/// Enumerates every nonempty edge subset whose induced subgraph satisfies the
/// superficial divergence condition in dimension `d`.
pub fn divergent_subgraphs(graph: &FeynmanGraph, d: usize) -> Result<DivergenceReport> {
    let ne = graph.edge_count();
    if ne > EDGE_CAP {
        return Err(CoreError::EdgeCapExceeded(ne, EDGE_CAP));
    }
    let mut subs = vec![];
    let mut hyper = vec![];
    let mut order_bound = 0usize;
    for mask in 1u32..(1u32 << ne) {
        let subset: Vec<usize> = (0..ne).filter(|&e| mask & (1 << e) != 0).collect();
        let b1 = graph.betti_of_subset(&subset)?;
        let superficial = 2 * subset.len() as i64 - (d * b1) as i64;
        if superficial <= 0 {
            hyper.push(LinearForm::coordinate_sum(&subset, ne));
            subs.push(subset.clone());
        }
        if superficial - 1 < 0 {
            order_bound += (-(superficial - 1)) as usize;
        }
    }
    Ok(DivergenceReport {
        divergent_subgraphs: subs,
        hyperplanes: hyper,
        order_bound,
    })
}

/// Per-sector refinement of the order bound: sums only over divergent
/// filtration steps and takes the supremum over permutations. Exposed as a
/// diagnostic alongside the bound above.
pub fn order_bound_sector_refined(graph: &FeynmanGraph, d: usize) -> Result<usize> {
    let ne = graph.edge_count();
    if ne > EDGE_CAP / 2 {
        return Err(CoreError::EdgeCapExceeded(ne, EDGE_CAP / 2));
    }
    let mut best = 0usize;
    for perm in Permutations::new(ne) {
        let mut m = 0usize;
        for i in 1..=ne {
            let step = &perm[..i];
            let b1 = graph.betti_of_subset(step)?;
            let sup = 2 * i as i64 - (d * b1) as i64;
            if sup - 1 < 0 {
                m += (-(sup - 1)) as usize;
            }
        }
        best = best.max(m);
    }
    Ok(best)
}

/// Streams the permutations of `0..n` lexicographically without materializing
/// all `n!` of them.
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Permutations {
    pub fn new(n: usize) -> Self {
        Permutations {
            next: Some((0..n).collect()),
        }
    }
}

impl Iterator for Permutations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        // standard next-permutation step
        let n = nxt.len();
        if n >= 2 {
            let mut i = n - 1;
            while i > 0 && nxt[i - 1] >= nxt[i] {
                i -= 1;
            }
            if i > 0 {
                let mut j = n - 1;
                while nxt[j] <= nxt[i - 1] {
                    j -= 1;
                }
                nxt.swap(i - 1, j);
                nxt[i..].reverse();
                self.next = Some(nxt);
            }
        }
        Some(cur)
    }
}

#[derive(Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    pub fn unite(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            self.parent[ra] = rb;
        } else {
            self.parent[rb] = ra;
            if self.rank[ra] == self.rank[rb] {
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn component_count(&self) -> usize {
        self.components
    }
}

/// JSON schema for graphs: vertex ids, edge endpoint pairs (1-based vertex
/// ids as given), optional labels and lengths. Edge order in the file defines
/// the edge indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

impl GraphJson {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_graph(&self) -> Result<FeynmanGraph> {
        FeynmanGraph::new(self.vertices.clone(), self.edges.clone())
    }

    pub fn to_labelled(&self) -> Result<LabelledGraph> {
        let g = self.to_graph()?;
        match &self.labels {
            Some(l) => LabelledGraph::new(g, l.clone()),
            None => Ok(LabelledGraph::zero_labels(g)),
        }
    }

    pub fn to_metric(&self) -> Result<MetricGraph> {
        let g = self.to_graph()?;
        let lengths = self
            .lengths
            .clone()
            .ok_or_else(|| CoreError::Parse("graph JSON has no \"lengths\"".into()))?;
        MetricGraph::new(g, lengths)
    }
}

/// Standard small graphs used across the test suite and docs.
pub mod families {
    use super::FeynmanGraph;

    /// `n`-banana: two vertices joined by `n` parallel edges.
    pub fn banana(n: usize) -> FeynmanGraph {
        FeynmanGraph::new(vec![1, 2], vec![(1, 2); n]).unwrap()
    }

    pub fn triangle() -> FeynmanGraph {
        FeynmanGraph::new(vec![1, 2, 3], vec![(1, 2), (2, 3), (1, 3)]).unwrap()
    }

    /// Path graph on `n` vertices.
    pub fn path(n: usize) -> FeynmanGraph {
        FeynmanGraph::new((1..=n).collect(), (1..n).map(|i| (i, i + 1)).collect()).unwrap()
    }

    /// Two-loop sunset with one external leg on each side:
    /// 1 -- 2 === 3 -- 4 with a triple edge in the middle.
    pub fn sunset_with_legs() -> FeynmanGraph {
        FeynmanGraph::new(
            vec![1, 2, 3, 4],
            vec![(1, 2), (2, 3), (2, 3), (2, 3), (3, 4)],
        )
        .unwrap()
    }

    /// Single edge between two vertices.
    pub fn single_edge() -> FeynmanGraph {
        FeynmanGraph::new(vec![1, 2], vec![(1, 2)]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::families::*;
    use super::*;

    #[test]
    fn betti_examples() {
        assert_eq!(triangle().betti(), 1);
        assert_eq!(path(4).betti(), 0);
        assert_eq!(banana(3).betti(), 2);
    }

    #[test]
    fn no_self_loops() {
        assert!(FeynmanGraph::new(vec![1, 2], vec![(1, 1)]).is_err());
    }

    #[test]
    fn induced_subgraph_examples() {
        let t = triangle();
        let (g, idx) = t.induced_subgraph(&[0]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(idx, vec![0]);
        let (g, _) = t.induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(g, t);
        let (g, _) = banana(3).induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(g, banana(2));
        assert!(t.induced_subgraph(&[7]).is_err());
    }

    /// Brute force: enumerate all spanning trees and keep those whose trace is
    /// a spanning forest at every filtration step.
    fn brute_force_kruskal(metric: &MetricGraph) -> Vec<Vec<usize>> {
        let g = &metric.graph;
        let ne = g.edge_count();
        let order = metric.rank_order().unwrap();
        let target = ne - g.betti();
        let mut found = vec![];
        for mask in 0u32..(1 << ne) {
            let subset: Vec<usize> = (0..ne).filter(|&e| mask & (1 << e) != 0).collect();
            if subset.len() != target {
                continue;
            }
            // spanning tree: forest touching all vertices, right edge count
            if g.betti_of_subset(&subset).unwrap() != 0 {
                continue;
            }
            let mut verts = BTreeSet::new();
            for &e in &subset {
                let (a, b) = g.edges()[e];
                verts.insert(a);
                verts.insert(b);
            }
            if verts.len() != g.vertex_count() && ne > 0 {
                continue;
            }
            let ok = (1..=ne).all(|i| {
                let step: Vec<usize> = order[..i].to_vec();
                let trace: Vec<usize> =
                    step.iter().copied().filter(|e| subset.contains(e)).collect();
                let b1 = g.betti_of_subset(&step).unwrap();
                trace.len() == step.len() - b1
            });
            if ok {
                found.push(subset);
            }
        }
        found
    }

    #[test]
    fn kruskal_tree_examples() {
        // path graph: the whole graph is its own spanning tree
        let m = MetricGraph::new(path(4), vec![0.5, 0.2, 0.9]).unwrap();
        let r = kruskal_tree(&m).unwrap();
        assert_eq!(r.tree_edges, vec![0, 1, 2]);
        assert!(r.per_step_trace_ok.iter().all(|&b| b));

        // triangle with lengths (0.1, 0.2, 0.3): brute force agrees
        let m = MetricGraph::new(triangle(), vec![0.1, 0.2, 0.3]).unwrap();
        let r = kruskal_tree(&m).unwrap();
        assert_eq!(r.tree_edges, vec![0, 1]);
        assert_eq!(brute_force_kruskal(&m), vec![vec![0, 1]]);

        // banana-2 with lengths (0.4, 0.7)
        let m = MetricGraph::new(banana(2), vec![0.4, 0.7]).unwrap();
        let r = kruskal_tree(&m).unwrap();
        assert_eq!(r.tree_edges, vec![0]);
        assert_eq!(brute_force_kruskal(&m), vec![vec![0]]);
    }

    #[test]
    fn kruskal_rejects_bad_input() {
        let m = MetricGraph::new(banana(2), vec![0.4, 0.4]).unwrap();
        assert!(matches!(kruskal_tree(&m), Err(CoreError::TiedLengths)));
        let disconnected =
            FeynmanGraph::new(vec![1, 2, 3, 4], vec![(1, 2), (3, 4)]).unwrap();
        let m = MetricGraph::new(disconnected, vec![0.1, 0.2]).unwrap();
        assert!(matches!(kruskal_tree(&m), Err(CoreError::Disconnected)));
    }

    #[test]
    fn fundamental_cycle_examples() {
        let t = triangle();
        let c = fundamental_cycle(&t, &[0, 1], 2).unwrap();
        let edges: Vec<usize> = c.iter().map(|&(e, _)| e).collect();
        assert_eq!(edges, vec![0, 1, 2]);

        let c = fundamental_cycle(&banana(2), &[0], 1).unwrap();
        let edges: Vec<usize> = c.iter().map(|&(e, _)| e).collect();
        assert_eq!(edges, vec![0, 1]);

        // theta graph: same as banana-3 here; tree {e1}, cycle of e3 is (e1, e3)
        let c = fundamental_cycle(&banana(3), &[0], 2).unwrap();
        let edges: Vec<usize> = c.iter().map(|&(e, _)| e).collect();
        assert_eq!(edges, vec![0, 2]);

        assert!(fundamental_cycle(&t, &[0, 1], 1).is_err());
        assert!(fundamental_cycle(&t, &[0], 2).is_err());
    }

    #[test]
    fn kruskal_cycle_edge_is_length_maximum() {
        let m = MetricGraph::new(banana(3), vec![0.3, 0.2, 0.5]).unwrap();
        let r = kruskal_tree(&m).unwrap();
        assert_eq!(r.tree_edges, vec![1]);
        for e in 0..3 {
            if r.tree_edges.contains(&e) {
                continue;
            }
            let cyc = fundamental_cycle(&m.graph, &r.tree_edges, e).unwrap();
            for &(e2, _) in &cyc {
                if e2 != e {
                    assert!(m.lengths[e] > m.lengths[e2]);
                }
            }
        }
    }

    #[test]
    fn sector_filtration_examples() {
        let (g, _) = banana(2)
            .sector_filtration(&[0, 1])
            .unwrap()
            .into_iter()
            .next()
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        let f = triangle().sector_filtration(&[0, 1, 2]).unwrap();
        assert_eq!(f[0].1, vec![0]);
        assert_eq!(f[1].1, vec![0, 1]);
        assert_eq!(f[2].0, triangle());
        let f = banana(3).sector_filtration(&[2, 0, 1]).unwrap();
        assert_eq!(f[0].1, vec![2]);
        assert_eq!(f[1].1, vec![0, 2]);
        assert_eq!(f[2].1, vec![0, 1, 2]);
        assert!(banana(3).sector_filtration(&[0, 0, 1]).is_err());
    }

    /// Brute force the divergence condition over all nonempty subsets.
    fn brute_force_divergent(g: &FeynmanGraph, d: usize) -> Vec<Vec<usize>> {
        let ne = g.edge_count();
        let mut out = vec![];
        for mask in 1u32..(1 << ne) {
            let subset: Vec<usize> = (0..ne).filter(|&e| mask & (1 << e) != 0).collect();
            let b1 = g.betti_of_subset(&subset).unwrap();
            if 2 * subset.len() as i64 - (d * b1) as i64 <= 0 {
                out.push(subset);
            }
        }
        out
    }

    #[test]
    fn divergent_subgraph_examples() {
        let r = divergent_subgraphs(&banana(2), 4).unwrap();
        assert_eq!(r.divergent_subgraphs, vec![vec![0, 1]]);
        assert_eq!(r.hyperplanes[0], LinearForm::from_integers(&[1, 1]));
        assert_eq!(r.divergent_subgraphs, brute_force_divergent(&banana(2), 4));

        let r = divergent_subgraphs(&triangle(), 4).unwrap();
        assert!(r.divergent_subgraphs.is_empty());
        assert!(brute_force_divergent(&triangle(), 4).is_empty());

        let r = divergent_subgraphs(&banana(3), 4).unwrap();
        assert_eq!(r.divergent_subgraphs.len(), 4);
        assert_eq!(r.divergent_subgraphs, brute_force_divergent(&banana(3), 4));
        // each pair has 2E - d*b1 - 1 = -1 and contributes 1; the full graph
        // contributes d*b1 - 2E + 1 = 8 - 6 + 1 = 3
        assert_eq!(r.order_bound, 6);
    }

    #[test]
    fn edge_partition_examples() {
        let (i, ic, cross) = banana(2).edge_partition_by_vertex_split(&[1]);
        assert!(i.is_empty() && ic.is_empty());
        assert_eq!(cross, vec![0, 1]);

        let two = FeynmanGraph::new(vec![1, 2, 3, 4], vec![(1, 2), (3, 4)]).unwrap();
        let (i, ic, cross) = two.edge_partition_by_vertex_split(&[1, 2]);
        assert_eq!(i, vec![0]);
        assert_eq!(ic, vec![1]);
        assert!(cross.is_empty());

        let (i, ic, cross) = triangle().edge_partition_by_vertex_split(&[1, 2]);
        assert_eq!(i, vec![0]);
        assert!(ic.is_empty());
        assert_eq!(cross, vec![1, 2]);
    }

    #[test]
    fn permutation_stream() {
        let all: Vec<_> = Permutations::new(3).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[5], vec![2, 1, 0]);
        assert_eq!(Permutations::new(0).count(), 1);
    }

    #[test]
    fn divergence_monotone_under_edge_addition() {
        // adding an edge never removes an already-listed subgraph
        let g3 = banana(3);
        let g4 = banana(4);
        let r3 = divergent_subgraphs(&g3, 4).unwrap();
        let r4 = divergent_subgraphs(&g4, 4).unwrap();
        for s in &r3.divergent_subgraphs {
            assert!(r4.divergent_subgraphs.contains(s));
        }
    }
}
