//! Attributed dual graph of population units, plans, and the subgraph,
//! county-fragment and quotient utilities shared by every other module.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

const NONE: u32 = u32::MAX;

/// Two-party vote counts for one election.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Votes {
    pub dem: f64,
    pub rep: f64,
}

impl Votes {
    pub fn new(dem: f64, rep: f64) -> Self {
        Votes { dem, rep }
    }

    pub fn total(&self) -> f64 {
        self.dem + self.rep
    }
}

impl core::ops::AddAssign for Votes {
    fn add_assign(&mut self, rhs: Votes) {
        self.dem += rhs.dem;
        self.rep += rhs.rep;
    }
}

/// One population unit (precinct, or a merged collection of precincts).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub population: f64,
    pub area: f64,
    /// Length of the unit's boundary that lies on the outer (state) border.
    pub exterior_perimeter: f64,
    pub county: String,
    pub bvap: f64,
    pub tvap: f64,
    /// Votes indexed like [`RegionGraph::elections`].
    pub votes: Vec<Votes>,
    /// Units sharing a tag are the polygons of one multi-polygon precinct.
    pub multipolygon: Option<String>,
}

impl Unit {
    /// A unit with no demographic or election data.
    pub fn bare(id: impl Into<String>, population: f64, area: f64, county: impl Into<String>) -> Self {
        Unit {
            id: id.into(),
            population,
            area,
            exterior_perimeter: 0.0,
            county: county.into(),
            bvap: 0.0,
            tvap: 0.0,
            votes: Vec::new(),
            multipolygon: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub shared_len: f64,
}

impl Edge {
    #[inline]
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("edge references unknown unit id {0:?}")]
    UnknownUnit(String),
    #[error("duplicate unit id {0:?}")]
    DuplicateUnit(String),
    #[error("edge {0:?}-{1:?} is a self loop")]
    SelfLoop(String, String),
    #[error("duplicate edge {0:?}-{1:?}")]
    DuplicateEdge(String, String),
    #[error("unit {id:?} has invalid {field}: {value}")]
    InvalidAttribute { id: String, field: &'static str, value: f64 },
    #[error("unit {id:?} has bvap {bvap} > tvap {tvap}")]
    BvapExceedsTvap { id: String, bvap: f64, tvap: f64 },
    #[error("unit {id:?} has {found} vote columns, expected {expected}")]
    VoteColumns { id: String, found: usize, expected: usize },
    #[error("graph is disconnected ({components} components; unit {unreached:?} unreachable from {root:?})")]
    Disconnected { components: usize, root: String, unreached: String },
    #[error("graph has no units")]
    Empty,
    #[error("empty unit selection")]
    EmptySelection,
    #[error("plan assigns {found} units, graph has {expected}")]
    PlanSize { found: usize, expected: usize },
    #[error("plan assigns unit {unit} to district {district} >= {districts}")]
    DistrictOutOfRange { unit: usize, district: u32, districts: usize },
    #[error("district {0} is empty")]
    EmptyDistrict(usize),
    #[error("district {0} is not connected")]
    DisconnectedDistrict(usize),
    #[error("multi-polygon component {0:?} has no neighbor")]
    IsolatedComponent(String),
}

/// Immutable, validated dual graph.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGraph {
    units: Vec<Unit>,
    edges: Vec<Edge>,
    elections: Vec<String>,
    counties: Vec<String>,
    county_of: Vec<u32>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    total_population: f64,
}

impl RegionGraph {
    /// Builds a graph from units and edges given by unit id.
    pub fn from_parts(
        elections: Vec<String>,
        units: Vec<Unit>,
        edges: Vec<(String, String, f64)>,
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateUnit(u.id.clone()));
            }
        }
        let mut indexed = Vec::with_capacity(edges.len());
        for (a, b, len) in edges {
            let ia = *index.get(&a).ok_or_else(|| GraphError::UnknownUnit(a.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| GraphError::UnknownUnit(b.clone()))?;
            indexed.push(Edge { a: ia, b: ib, shared_len: len });
        }
        Self::new(elections, units, indexed)
    }

    /// Builds a graph from index-based edges, checking every invariant.
    pub fn new(elections: Vec<String>, units: Vec<Unit>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if units.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut ids = BTreeSet::new();
        for u in &units {
            if !ids.insert(u.id.as_str()) {
                return Err(GraphError::DuplicateUnit(u.id.clone()));
            }
            validate_unit(u, elections.len())?;
        }
        let n = units.len();
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (ei, e) in edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                let bad = if e.a >= n { e.a } else { e.b };
                return Err(GraphError::UnknownUnit(alloc::format!("#{bad}")));
            }
            if e.a == e.b {
                return Err(GraphError::SelfLoop(units[e.a].id.clone(), units[e.b].id.clone()));
            }
            if !(e.shared_len >= 0.0) || !e.shared_len.is_finite() {
                return Err(GraphError::InvalidAttribute {
                    id: units[e.a].id.clone(),
                    field: "shared boundary length",
                    value: e.shared_len,
                });
            }
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(units[e.a].id.clone(), units[e.b].id.clone()));
            }
            adjacency[e.a].push((e.b, ei));
            adjacency[e.b].push((e.a, ei));
        }

        let mut counties: Vec<String> = units.iter().map(|u| u.county.clone()).collect();
        counties.sort();
        counties.dedup();
        let county_of = units
            .iter()
            .map(|u| counties.binary_search(&u.county).expect("county listed") as u32)
            .collect();
        let total_population = units.iter().map(|u| u.population).sum();

        let g = RegionGraph { units, edges, elections, counties, county_of, adjacency, total_population };
        let comps = g.components(&(0..n).collect::<Vec<_>>());
        if comps.len() > 1 {
            return Err(GraphError::Disconnected {
                components: comps.len(),
                root: g.units[comps[0][0]].id.clone(),
                unreached: g.units[comps[1][0]].id.clone(),
            });
        }
        Ok(g)
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, n: NodeId) -> &Unit {
        &self.units[n]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn elections(&self) -> &[String] {
        &self.elections
    }

    pub fn election_index(&self, name: &str) -> Option<usize> {
        self.elections.iter().position(|e| e == name)
    }

    pub fn counties(&self) -> &[String] {
        &self.counties
    }

    pub fn num_counties(&self) -> usize {
        self.counties.len()
    }

    /// Dense county index of a unit.
    #[inline]
    pub fn county_of(&self, n: NodeId) -> usize {
        self.county_of[n] as usize
    }

    #[inline]
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[n]
    }

    pub fn population(&self, n: NodeId) -> f64 {
        self.units[n].population
    }

    pub fn total_population(&self) -> f64 {
        self.total_population
    }

    pub fn unit_index(&self, id: &str) -> Option<NodeId> {
        self.units.iter().position(|u| u.id == id)
    }

    /// Returns a boolean mask of length `num_units` marking `nodes`.
    pub fn mask(&self, nodes: &[NodeId]) -> Vec<bool> {
        let mut m = vec![false; self.units.len()];
        for &n in nodes {
            m[n] = true;
        }
        m
    }

    /// Connected components of the subgraph induced by `nodes`, each sorted,
    /// ordered by smallest member.
    pub fn components(&self, nodes: &[NodeId]) -> Vec<Vec<NodeId>> {
        let inside = self.mask(nodes);
        let mut seen = vec![false; self.units.len()];
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for &s in &sorted {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &(v, _) in &self.adjacency[u] {
                    if inside[v] && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Unit ids and plan assignment must line up; plans are validated here.
    pub fn validate_plan(&self, plan: &Plan) -> Result<(), GraphError> {
        if plan.assignment.len() != self.units.len() {
            return Err(GraphError::PlanSize { found: plan.assignment.len(), expected: self.units.len() });
        }
        for (d, members) in plan.district_members().iter().enumerate() {
            if !is_connected(&self.induced_subgraph(members)?) {
                return Err(GraphError::DisconnectedDistrict(d));
            }
        }
        Ok(())
    }
}

fn validate_unit(u: &Unit, n_elections: usize) -> Result<(), GraphError> {
    let bad = |field: &'static str, value: f64| GraphError::InvalidAttribute { id: u.id.clone(), field, value };
    if !(u.population >= 0.0) || !u.population.is_finite() {
        return Err(bad("population", u.population));
    }
    if !(u.area > 0.0) || !u.area.is_finite() {
        return Err(bad("area", u.area));
    }
    if !(u.exterior_perimeter >= 0.0) || !u.exterior_perimeter.is_finite() {
        return Err(bad("exterior perimeter", u.exterior_perimeter));
    }
    if !(u.bvap >= 0.0) {
        return Err(bad("bvap", u.bvap));
    }
    if !(u.tvap >= 0.0) {
        return Err(bad("tvap", u.tvap));
    }
    if u.bvap > u.tvap {
        return Err(GraphError::BvapExceedsTvap { id: u.id.clone(), bvap: u.bvap, tvap: u.tvap });
    }
    if u.votes.len() != n_elections {
        return Err(GraphError::VoteColumns { id: u.id.clone(), found: u.votes.len(), expected: n_elections });
    }
    for v in &u.votes {
        if !(v.dem >= 0.0) {
            return Err(bad("dem votes", v.dem));
        }
        if !(v.rep >= 0.0) {
            return Err(bad("rep votes", v.rep));
        }
    }
    Ok(())
}

/// Assignment of every unit to one of `districts` districts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Plan {
    assignment: Vec<u32>,
    districts: usize,
}

impl Plan {
    /// Checks indices and non-emptiness; contiguity is checked against a
    /// graph by [`RegionGraph::validate_plan`].
    pub fn new(assignment: Vec<u32>, districts: usize) -> Result<Self, GraphError> {
        let mut used = vec![false; districts];
        for (unit, &d) in assignment.iter().enumerate() {
            if d as usize >= districts {
                return Err(GraphError::DistrictOutOfRange { unit, district: d, districts });
            }
            used[d as usize] = true;
        }
        if let Some(d) = used.iter().position(|u| !u) {
            return Err(GraphError::EmptyDistrict(d));
        }
        Ok(Plan { assignment, districts })
    }

    #[inline]
    pub fn district_of(&self, n: NodeId) -> usize {
        self.assignment[n] as usize
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn num_districts(&self) -> usize {
        self.districts
    }

    pub fn members(&self, d: usize) -> Vec<NodeId> {
        (0..self.assignment.len()).filter(|&n| self.assignment[n] as usize == d).collect()
    }

    pub fn district_members(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.districts];
        for (n, &d) in self.assignment.iter().enumerate() {
            out[d as usize].push(n);
        }
        out
    }

    pub(crate) fn reassign(&mut self, nodes: &[NodeId], d: usize) {
        for &n in nodes {
            self.assignment[n] = d as u32;
        }
    }

    /// Canonical form independent of district labels: districts renumbered
    /// in order of their smallest unit.
    pub fn canonical(&self) -> Vec<u32> {
        let mut relabel = vec![NONE; self.districts];
        let mut next = 0u32;
        self.assignment
            .iter()
            .map(|&d| {
                if relabel[d as usize] == NONE {
                    relabel[d as usize] = next;
                    next += 1;
                }
                relabel[d as usize]
            })
            .collect()
    }

    /// Sorted list of adjacent district pairs `(a, b)` with `a < b`.
    pub fn adjacent_pairs(&self, g: &RegionGraph) -> Vec<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        for e in g.edges() {
            let (da, db) = (self.district_of(e.a), self.district_of(e.b));
            if da != db {
                pairs.insert((da.min(db), da.max(db)));
            }
        }
        pairs.into_iter().collect()
    }
}

/// Local multigraph over `0..n` whose edges remember the graph edge they
/// came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Multigraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<EdgeId>,
}

impl Multigraph {
    pub fn new(n: usize) -> Self {
        Multigraph { n, edges: Vec::new(), labels: Vec::new() }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, label: EdgeId) {
        self.edges.push((a, b));
        self.labels.push(label);
    }

    /// Incident (neighbor, local edge index) lists; parallel edges appear
    /// once per copy.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Subgraph induced by a unit set, keeping only internal edges.
#[derive(Clone, Debug)]
pub struct Subgraph<'g> {
    graph: &'g RegionGraph,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

impl<'g> Subgraph<'g> {
    pub fn graph(&self) -> &'g RegionGraph {
        self.graph
    }

    /// Member units, sorted ascending.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn population(&self) -> f64 {
        self.nodes.iter().map(|&n| self.graph.units[n].population).sum()
    }

    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|&n| self.graph.units[n].area).sum()
    }

    /// Local multigraph; node `i` is `self.nodes()[i]`.
    pub fn to_multigraph(&self) -> Multigraph {
        let local = local_index(self.graph.num_units(), &self.nodes);
        let mut mg = Multigraph::new(self.nodes.len());
        for &e in &self.edges {
            let edge = self.graph.edges[e];
            mg.add_edge(local[edge.a] as usize, local[edge.b] as usize, e);
        }
        mg
    }
}

/// Maps graph node ids to positions in `nodes` (`u32::MAX` when absent).
pub(crate) fn local_index(n: usize, nodes: &[NodeId]) -> Vec<u32> {
    let mut local = vec![NONE; n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i as u32;
    }
    local
}

impl RegionGraph {
    pub fn induced_subgraph(&self, units: &[NodeId]) -> Result<Subgraph<'_>, GraphError> {
        induced_subgraph(self, units)
    }
}

pub fn induced_subgraph<'g>(g: &'g RegionGraph, units: &[NodeId]) -> Result<Subgraph<'g>, GraphError> {
    if units.is_empty() {
        return Err(GraphError::EmptySelection);
    }
    let mut nodes = units.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let inside = g.mask(&nodes);
    let mut edges = Vec::new();
    for &u in &nodes {
        for &(v, e) in g.neighbors(u) {
            if u < v && inside[v] {
                edges.push(e);
            }
        }
    }
    edges.sort_unstable();
    Ok(Subgraph { graph: g, nodes, edges })
}

pub fn is_connected(view: &Subgraph<'_>) -> bool {
    view.graph.components(&view.nodes).len() <= 1
}

/// The units of one county inside a district that form one connected piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub county: usize,
    pub nodes: Vec<NodeId>,
}

/// Splits a district by county, then each county piece into connected
/// components. Ordered by county index, then smallest unit.
pub fn county_fragments(g: &RegionGraph, district: &[NodeId]) -> Vec<Fragment> {
    let mut by_county: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for &n in district {
        by_county.entry(g.county_of(n)).or_default().push(n);
    }
    let mut out = Vec::new();
    for (county, nodes) in by_county {
        for comp in g.components(&nodes) {
            out.push(Fragment { county, nodes: comp });
        }
    }
    out
}

/// One vertex per fragment, one parallel edge per original edge joining two
/// fragments. Edge labels are graph edge ids.
pub fn quotient_multigraph(g: &RegionGraph, fragments: &[Fragment]) -> Multigraph {
    let mut frag_of = vec![NONE; g.num_units()];
    for (i, f) in fragments.iter().enumerate() {
        for &n in &f.nodes {
            frag_of[n] = i as u32;
        }
    }
    let mut mg = Multigraph::new(fragments.len());
    for (ei, e) in g.edges().iter().enumerate() {
        let (fa, fb) = (frag_of[e.a], frag_of[e.b]);
        if fa != NONE && fb != NONE && fa != fb {
            mg.add_edge(fa as usize, fb as usize, ei);
        }
    }
    mg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use alloc::string::ToString;

    fn path4() -> RegionGraph {
        fixtures::path(&[1.0, 1.0, 1.0, 1.0], &["A", "A", "B", "B"])
    }

    #[test]
    fn path_graph_loads() {
        let g = path4();
        assert_eq!(g.num_units(), 4);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.total_population(), 4.0);
    }

    #[test]
    fn grid_edge_count() {
        let g = fixtures::grid(4, 4, |_, _| "A".to_string());
        assert_eq!(g.num_units(), 16);
        assert_eq!(g.num_edges(), 2 * 4 * 3);
    }

    #[test]
    fn unknown_unit_is_named() {
        let units = alloc::vec![Unit::bare("a", 1.0, 1.0, "A"), Unit::bare("b", 1.0, 1.0, "A")];
        let err = RegionGraph::from_parts(
            Vec::new(),
            units,
            alloc::vec![("a".into(), "Z".into(), 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::UnknownUnit("Z".into()));
        assert!(alloc::format!("{err}").contains("\"Z\""));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mk = |pop: f64| alloc::vec![Unit::bare("a", pop, 1.0, "A"), Unit::bare("b", 1.0, 1.0, "A")];
        let e = || alloc::vec![("a".into(), "b".into(), 1.0)];
        assert!(matches!(
            RegionGraph::from_parts(Vec::new(), mk(-1.0), e()),
            Err(GraphError::InvalidAttribute { field: "population", .. })
        ));
        assert!(matches!(
            RegionGraph::from_parts(Vec::new(), mk(1.0), Vec::new()),
            Err(GraphError::Disconnected { components: 2, .. })
        ));
        let dup = alloc::vec![("a".into(), "b".into(), 1.0), ("b".into(), "a".into(), 1.0)];
        assert!(matches!(
            RegionGraph::from_parts(Vec::new(), mk(1.0), dup),
            Err(GraphError::DuplicateEdge(..))
        ));
        let mut units = mk(1.0);
        units[0].bvap = 5.0;
        units[0].tvap = 1.0;
        assert!(matches!(
            RegionGraph::from_parts(Vec::new(), units, e()),
            Err(GraphError::BvapExceedsTvap { .. })
        ));
    }

    #[test]
    fn induced_subgraph_cases() {
        let c4 = fixtures::cycle(4);
        assert_eq!(c4.induced_subgraph(&[0, 1, 2, 3]).unwrap().edges().len(), 4);
        assert_eq!(c4.induced_subgraph(&[2]).unwrap().edges().len(), 0);
        let p = c4.induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(p.edges().len(), 2);
        assert!(is_connected(&p));
        assert_eq!(p.population(), 3.0);
        assert_eq!(c4.induced_subgraph(&[]).unwrap_err(), GraphError::EmptySelection);
    }

    #[test]
    fn connectivity_cases() {
        let g = path4();
        assert!(is_connected(&g.induced_subgraph(&[1]).unwrap()));
        assert!(!is_connected(&g.induced_subgraph(&[0, 2]).unwrap()));
        let c4 = fixtures::cycle(4);
        assert!(is_connected(&c4.induced_subgraph(&[0, 1, 3]).unwrap()));
    }

    #[test]
    fn fragments_split_by_county_and_component() {
        // 5-node path a-b-c-d-e with counties A,A,B,A,A: A splits into {a,b} and {d,e}.
        let g = fixtures::path(&[1.0; 5], &["A", "A", "B", "A", "A"]);
        let f = county_fragments(&g, &[0, 1, 2, 3, 4]);
        assert_eq!(f.len(), 3);
        assert_eq!(f[0], Fragment { county: 0, nodes: alloc::vec![0, 1] });
        assert_eq!(f[1], Fragment { county: 0, nodes: alloc::vec![3, 4] });
        assert_eq!(f[2], Fragment { county: 1, nodes: alloc::vec![2] });

        let one = fixtures::path(&[1.0; 3], &["A", "A", "A"]);
        assert_eq!(county_fragments(&one, &[0, 1, 2]).len(), 1);
        assert_eq!(county_fragments(&path4(), &[0, 1, 2, 3]).len(), 2);
    }

    #[test]
    fn quotient_counts_cross_edges() {
        // 2x2 cycle a-b-d-c-a with counties {a,b} and {c,d}.
        let g = fixtures::grid(2, 2, |r, _| if r == 0 { "A".into() } else { "B".into() });
        let frags = county_fragments(&g, &[0, 1, 2, 3]);
        let q = quotient_multigraph(&g, &frags);
        assert_eq!(q.n, 2);
        assert_eq!(q.edges.len(), 2);

        let p = path4();
        let q = quotient_multigraph(&p, &county_fragments(&p, &[0, 1, 2, 3]));
        assert_eq!((q.n, q.edges.len()), (2, 1));

        let single = quotient_multigraph(&p, &county_fragments(&p, &[0, 1]));
        assert_eq!((single.n, single.edges.len()), (1, 0));
    }

    #[test]
    fn plan_pairs_and_canonical() {
        let g = path4();
        let plan = Plan::new(alloc::vec![1, 1, 0, 0], 2).unwrap();
        g.validate_plan(&plan).unwrap();
        assert_eq!(plan.adjacent_pairs(&g), alloc::vec![(0, 1)]);
        assert_eq!(plan.canonical(), alloc::vec![0, 0, 1, 1]);
        assert!(matches!(Plan::new(alloc::vec![0, 0, 0, 0], 2), Err(GraphError::EmptyDistrict(1))));
        let bad = Plan::new(alloc::vec![0, 1, 0, 1], 2).unwrap();
        assert!(matches!(g.validate_plan(&bad), Err(GraphError::DisconnectedDistrict(_))));
    }
}
