//! Uniform (hierarchical) spanning trees and population-balanced tree cuts.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{county_fragments, local_index, quotient_multigraph, EdgeId, GraphError, Multigraph, NodeId, Plan, RegionGraph};
use crate::measures::{within_tolerance, Dsu};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("region is disconnected")]
    Disconnected,
    #[error("tree {district} has {found} edges, expected {expected}")]
    EdgeCount { district: usize, found: usize, expected: usize },
    #[error("tree {0} leaves its district or has a cycle")]
    NotSpanning(usize),
    #[error("tree {0} does not restrict to a spanning tree on every county fragment")]
    NotHierarchical(usize),
    #[error("forest has {found} trees, plan has {expected} districts")]
    TreeCount { found: usize, expected: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One spanning tree (sorted graph edge ids) per district.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningForest {
    pub trees: Vec<Vec<EdgeId>>,
}

impl SpanningForest {
    /// Checks every tree spans its district and respects the county hierarchy.
    pub fn validate(&self, g: &RegionGraph, plan: &Plan) -> Result<(), ForestError> {
        if self.trees.len() != plan.num_districts() {
            return Err(ForestError::TreeCount { found: self.trees.len(), expected: plan.num_districts() });
        }
        for (d, members) in plan.district_members().iter().enumerate() {
            let tree = &self.trees[d];
            if tree.len() + 1 != members.len() {
                return Err(ForestError::EdgeCount { district: d, found: tree.len(), expected: members.len() - 1 });
            }
            if !spans(g, members, tree) {
                return Err(ForestError::NotSpanning(d));
            }
            if !is_hierarchical(g, members, tree) {
                return Err(ForestError::NotHierarchical(d));
            }
        }
        Ok(())
    }

    /// Draws a uniform hierarchical tree for every district.
    pub fn random<R: Rng + ?Sized>(g: &RegionGraph, plan: &Plan, rng: &mut R) -> Result<Self, ForestError> {
        let trees = plan
            .district_members()
            .iter()
            .map(|m| hierarchical_tree_draw(g, m, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SpanningForest { trees })
    }
}

/// True when `tree` is an acyclic edge set inside `nodes` touching all of them.
fn spans(g: &RegionGraph, nodes: &[NodeId], tree: &[EdgeId]) -> bool {
    let local = local_index(g.num_units(), nodes);
    let mut dsu = Dsu::new(nodes.len());
    for &e in tree {
        let edge = g.edge(e);
        let (a, b) = (local[edge.a], local[edge.b]);
        if a == u32::MAX || b == u32::MAX || !dsu.union(a as usize, b as usize) {
            return false;
        }
    }
    tree.len() + 1 == nodes.len()
}

/// A spanning tree of `nodes` is hierarchical iff each county fragment holds
/// exactly `|F| - 1` of its edges.
pub fn is_hierarchical(g: &RegionGraph, nodes: &[NodeId], tree: &[EdgeId]) -> bool {
    let fragments = county_fragments(g, nodes);
    let mut frag_of = vec![u32::MAX; g.num_units()];
    for (i, f) in fragments.iter().enumerate() {
        for &n in &f.nodes {
            frag_of[n] = i as u32;
        }
    }
    let mut inside = vec![0usize; fragments.len()];
    for &e in tree {
        let edge = g.edge(e);
        if frag_of[edge.a] == frag_of[edge.b] {
            inside[frag_of[edge.a] as usize] += 1;
        }
    }
    fragments.iter().zip(&inside).all(|(f, &c)| c + 1 == f.nodes.len())
}

/// Uniform spanning tree of a connected multigraph by Wilson's loop-erased
/// random walks. Returns local edge indices; a walk leaves a vertex along
/// each incident edge copy with equal probability, so parallel edges are
/// weighted by multiplicity.
pub fn wilson_ust<R: Rng + ?Sized>(mg: &Multigraph, rng: &mut R) -> Result<Vec<usize>, ForestError> {
    if mg.n == 0 || !mg.is_connected() {
        return Err(ForestError::Disconnected);
    }
    if mg.n == 1 {
        return Ok(Vec::new());
    }
    let adj = mg.adjacency();
    let mut in_tree = vec![false; mg.n];
    let mut next = vec![usize::MAX; mg.n];
    let root = rng.gen_range(0..mg.n);
    in_tree[root] = true;
    for start in 0..mg.n {
        let mut u = start;
        while !in_tree[u] {
            let (v, e) = adj[u][rng.gen_range(0..adj[u].len())];
            next[u] = e;
            u = v;
        }
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            let (a, b) = mg.edges[next[u]];
            u = if a == u { b } else { a };
        }
    }
    let mut tree: Vec<usize> = (0..mg.n).filter(|&u| u != root).map(|u| next[u]).collect();
    tree.sort_unstable();
    Ok(tree)
}

/// Uniform hierarchical spanning tree of `region`: a uniform tree of the
/// county quotient multigraph (each quotient edge is a concrete graph edge),
/// then a uniform tree inside every fragment. Returns sorted graph edge ids.
pub fn hierarchical_tree_draw<R: Rng + ?Sized>(
    g: &RegionGraph,
    region: &[NodeId],
    rng: &mut R,
) -> Result<Vec<EdgeId>, ForestError> {
    let fragments = county_fragments(g, region);
    let quotient = quotient_multigraph(g, &fragments);
    let mut tree: Vec<EdgeId> = wilson_ust(&quotient, rng)?.into_iter().map(|i| quotient.labels[i]).collect();
    for f in &fragments {
        let mg = g.induced_subgraph(&f.nodes)?.to_multigraph();
        tree.extend(wilson_ust(&mg, rng)?.into_iter().map(|i| mg.labels[i]));
    }
    tree.sort_unstable();
    Ok(tree)
}

/// A tree edge whose removal leaves two balanced components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutCandidate {
    pub edge: EdgeId,
    /// Population on the side of the edge's `a` endpoint, then the `b` side.
    pub side_pops: (f64, f64),
}

/// Rooted view of a spanning tree used for subtree sums and splits.
struct RootedTree {
    /// Node ids in DFS preorder; `order[0]` is the root.
    order: Vec<usize>,
    /// Parent edge (graph id) of each local node; `usize::MAX` at the root.
    parent_edge: Vec<EdgeId>,
    parent: Vec<usize>,
}

fn root_tree(g: &RegionGraph, nodes: &[NodeId], local: &[u32], tree: &[EdgeId]) -> RootedTree {
    let n = nodes.len();
    let mut adj: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); n];
    for &e in tree {
        let edge = g.edge(e);
        let (a, b) = (local[edge.a] as usize, local[edge.b] as usize);
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    let mut parent_edge = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut stack = vec![0usize];
    visited[0] = true;
    while let Some(u) = stack.pop() {
        order.push(u);
        for &(v, e) in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                parent[v] = u;
                parent_edge[v] = e;
                stack.push(v);
            }
        }
    }
    debug_assert_eq!(order.len(), n, "tree does not span its region");
    RootedTree { order, parent_edge, parent }
}

/// Every tree edge whose two sides both lie within `pop_tolerance` of
/// `total_pop / k`, by one pass of subtree population sums. Sorted by edge id.
pub fn balanced_cuts(
    g: &RegionGraph,
    nodes: &[NodeId],
    tree: &[EdgeId],
    pop_tolerance: f64,
    k: usize,
    total_pop: f64,
) -> Vec<CutCandidate> {
    let ideal = total_pop / k as f64;
    let mut cuts = tree_cuts(g, nodes, tree);
    cuts.retain(|c| {
        within_tolerance(c.side_pops.0, ideal, pop_tolerance) && within_tolerance(c.side_pops.1, ideal, pop_tolerance)
    });
    cuts
}

/// Every edge of a spanning tree of `nodes` with the populations of both
/// sides. Sorted by edge id.
pub fn tree_cuts(g: &RegionGraph, nodes: &[NodeId], tree: &[EdgeId]) -> Vec<CutCandidate> {
    if nodes.len() < 2 {
        return Vec::new();
    }
    let local = local_index(g.num_units(), nodes);
    let rooted = root_tree(g, nodes, &local, tree);
    let mut sub: Vec<f64> = nodes.iter().map(|&v| g.population(v)).collect();
    for &u in rooted.order.iter().rev() {
        let p = rooted.parent[u];
        if p != usize::MAX {
            sub[p] += sub[u];
        }
    }
    let region_pop = sub[rooted.order[0]];
    let mut cuts: Vec<CutCandidate> = (1..nodes.len())
        .map(|u| {
            let e = rooted.parent_edge[u];
            let (below, above) = (sub[u], region_pop - sub[u]);
            // `u` is the child endpoint of `e`.
            let side_pops = if local[g.edge(e).a] as usize == u { (below, above) } else { (above, below) };
            CutCandidate { edge: e, side_pops }
        })
        .collect();
    cuts.sort_by_key(|c| c.edge);
    cuts
}

/// The two pieces left after removing `cut` from a spanning tree of `nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSplit {
    /// Side containing the `a` endpoint of the cut edge: sorted nodes, sorted edges.
    pub a_side: (Vec<NodeId>, Vec<EdgeId>),
    pub b_side: (Vec<NodeId>, Vec<EdgeId>),
}

pub fn split_tree(g: &RegionGraph, nodes: &[NodeId], tree: &[EdgeId], cut: EdgeId) -> TreeSplit {
    let local = local_index(g.num_units(), nodes);
    let mut adj: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); nodes.len()];
    for &e in tree {
        if e == cut {
            continue;
        }
        let edge = g.edge(e);
        let (a, b) = (local[edge.a] as usize, local[edge.b] as usize);
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let start = local[g.edge(cut).a] as usize;
    let mut on_a = vec![false; nodes.len()];
    on_a[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &(v, _) in &adj[u] {
            if !on_a[v] {
                on_a[v] = true;
                stack.push(v);
            }
        }
    }
    let mut a_side = (Vec::new(), Vec::new());
    let mut b_side = (Vec::new(), Vec::new());
    for (i, &v) in nodes.iter().enumerate() {
        if on_a[i] { a_side.0.push(v) } else { b_side.0.push(v) }
    }
    for &e in tree {
        if e == cut {
            continue;
        }
        if on_a[local[g.edge(e).a] as usize] { a_side.1.push(e) } else { b_side.1.push(e) }
    }
    a_side.0.sort_unstable();
    b_side.0.sort_unstable();
    a_side.1.sort_unstable();
    b_side.1.sort_unstable();
    TreeSplit { a_side, b_side }
}

/// Graph edges with one endpoint in each district, sorted.
pub fn connecting_edges(g: &RegionGraph, district_a: &[NodeId], district_b: &[NodeId]) -> Vec<EdgeId> {
    let in_a = g.mask(district_a);
    let in_b = g.mask(district_b);
    let mut out: Vec<EdgeId> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| (in_a[e.a] && in_b[e.b]) || (in_b[e.a] && in_a[e.b]))
        .map(|(i, _)| i)
        .collect();
    out.sort_unstable();
    out
}
