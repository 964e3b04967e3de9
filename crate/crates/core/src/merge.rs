//! Multi-polygon precinct preprocessing.
//!
//! Units sharing a `multipolygon` tag are the pieces of one precinct. The
//! pieces lying in the precinct's dominant county are joined into a single
//! node through the neighbours that add the least population. Pieces in
//! another county stay separate (or, with `absorb_isolated`, join the
//! neighbour they share the longest boundary with). A merged collection above
//! the population cap is dissolved back into its pieces.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, GraphError, NodeId, RegionGraph, Unit};
use crate::measures::Dsu;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeOptions {
    pub pop_cap: f64,
    /// Absorb out-of-county pieces into their longest-boundary neighbour
    /// instead of leaving them as their own nodes.
    pub absorb_isolated: bool,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions { pop_cap: 20_000.0, absorb_isolated: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MergeDecision {
    /// Pieces of `tag` joined, possibly through intermediate units.
    Joined { tag: String, pieces: Vec<String>, via: Vec<String>, added_population: f64 },
    /// A piece outside the dominant county left as its own node.
    IsolatedKept { tag: String, unit: String },
    /// A piece outside the dominant county absorbed into a neighbour.
    IsolatedAbsorbed { tag: String, unit: String, into: String },
    /// A collection above the cap dissolved into its members.
    Dissolved { members: Vec<String>, population: f64 },
    /// A final merged node.
    Node { id: String, members: Vec<String>, population: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub decisions: Vec<MergeDecision>,
}

/// Cheapest node-weighted path from the current collection to any target.
/// Cost counts the population of intermediate units; ties go to the
/// lexicographically smallest (cost, target, predecessor chain) by node index.
fn cheapest_link(g: &RegionGraph, sources: &[NodeId], is_target: &[bool]) -> Option<(NodeId, Vec<NodeId>, f64)> {
    let n = g.num_units();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();

    #[derive(PartialEq)]
    struct Entry(f64, NodeId);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    for &s in sources {
        dist[s] = 0.0;
        heap.push(Reverse(Entry(0.0, s)));
    }
    let mut in_sources = vec![false; n];
    for &s in sources {
        in_sources[s] = true;
    }
    while let Some(Reverse(Entry(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if is_target[u] && !in_sources[u] {
            let mut via = Vec::new();
            let mut v = prev[u];
            while v != usize::MAX && !in_sources[v] {
                via.push(v);
                v = prev[v];
            }
            via.reverse();
            return Some((u, via, d));
        }
        // Entering a non-source, non-target node costs its population.
        let step = if in_sources[u] { 0.0 } else { g.population(u) };
        for &(v, _) in g.neighbors(u) {
            if in_sources[v] {
                continue;
            }
            let nd = d + step;
            if nd < dist[v] || (nd == dist[v] && u < prev[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse(Entry(nd, v)));
            }
        }
    }
    None
}

/// Merges multi-polygon pieces as described in the module docs. Output units
/// carry no tags, so a second application is the identity.
pub fn merge_multipolygon_units(g: &RegionGraph, options: &MergeOptions) -> Result<(RegionGraph, MergeReport), GraphError> {
    let n = g.num_units();
    let mut report = MergeReport::default();
    let mut groups: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for (i, u) in g.units().iter().enumerate() {
        if let Some(tag) = &u.multipolygon {
            groups.entry(tag.as_str()).or_default().push(i);
        }
    }
    for members in groups.values() {
        if let Some(&lonely) = members.iter().find(|&&m| g.neighbors(m).is_empty()) {
            return Err(GraphError::IsolatedComponent(g.unit(lonely).id.clone()));
        }
    }

    let mut dsu = Dsu::new(n);
    for (&tag, members) in &groups {
        let mut county_pop: BTreeMap<usize, f64> = BTreeMap::new();
        for &m in members {
            *county_pop.entry(g.county_of(m)).or_default() += g.population(m);
        }
        let dominant = county_pop
            .iter()
            .fold((usize::MAX, f64::NEG_INFINITY), |best, (&c, &p)| if p > best.1 { (c, p) } else { best })
            .0;

        let mut home = Vec::new();
        for &m in members {
            if g.county_of(m) == dominant {
                home.push(m);
            } else if options.absorb_isolated {
                let &(into, _) = g
                    .neighbors(m)
                    .iter()
                    .filter(|(v, _)| !members.contains(v))
                    .max_by(|x, y| {
                        g.edge(x.1).shared_len.total_cmp(&g.edge(y.1).shared_len).then(y.0.cmp(&x.0))
                    })
                    .unwrap_or(&g.neighbors(m)[0]);
                dsu.union(m, into);
                report.decisions.push(MergeDecision::IsolatedAbsorbed {
                    tag: tag.into(),
                    unit: g.unit(m).id.clone(),
                    into: g.unit(into).id.clone(),
                });
            } else {
                report.decisions.push(MergeDecision::IsolatedKept { tag: tag.into(), unit: g.unit(m).id.clone() });
            }
        }
        if home.len() < 2 {
            continue;
        }

        let mut is_target = vec![false; n];
        for &m in &home {
            is_target[m] = true;
        }
        let mut collection = vec![home[0]];
        let mut joined = vec![false; n];
        joined[home[0]] = true;
        let mut via_all = Vec::new();
        let mut added = 0.0;
        while home.iter().any(|&m| !joined[m]) {
            let (target, via, cost) = cheapest_link(g, &collection, &is_target).expect("graph is connected");
            for &v in via.iter().chain(core::iter::once(&target)) {
                dsu.union(home[0], v);
                if !joined[v] {
                    joined[v] = true;
                    collection.push(v);
                }
            }
            via_all.extend(via.iter().map(|&v| g.unit(v).id.clone()));
            added += cost;
        }
        report.decisions.push(MergeDecision::Joined {
            tag: tag.into(),
            pieces: home.iter().map(|&m| g.unit(m).id.clone()).collect(),
            via: via_all,
            added_population: added,
        });
    }

    // Collect classes; dissolve those over the cap.
    let mut classes: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for v in 0..n {
        classes.entry(dsu.find(v)).or_default().push(v);
    }
    let mut node_of = vec![usize::MAX; n];
    let mut nodes: Vec<Vec<NodeId>> = Vec::new();
    let mut ordered: Vec<Vec<NodeId>> = Vec::new();
    for members in classes.into_values() {
        let pop: f64 = members.iter().map(|&m| g.population(m)).sum();
        if members.len() > 1 && pop > options.pop_cap {
            report.decisions.push(MergeDecision::Dissolved {
                members: members.iter().map(|&m| g.unit(m).id.clone()).collect(),
                population: pop,
            });
            ordered.extend(members.into_iter().map(|m| vec![m]));
        } else {
            ordered.push(members);
        }
    }
    ordered.sort_by_key(|m| m[0]);
    for members in ordered {
        for &m in &members {
            node_of[m] = nodes.len();
        }
        nodes.push(members);
    }

    let units: Vec<Unit> = nodes.iter().map(|members| combine(g, members)).collect();
    for (members, unit) in nodes.iter().zip(&units) {
        if members.len() > 1 {
            report.decisions.push(MergeDecision::Node {
                id: unit.id.clone(),
                members: members.iter().map(|&m| g.unit(m).id.clone()).collect(),
                population: unit.population,
            });
        }
    }
    let mut shared: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in g.edges() {
        let (a, b) = (node_of[e.a], node_of[e.b]);
        if a != b {
            *shared.entry((a.min(b), a.max(b))).or_default() += e.shared_len;
        }
    }
    let edges = shared.into_iter().map(|((a, b), shared_len)| Edge { a, b, shared_len }).collect();
    let merged = RegionGraph::new(g.elections().to_vec(), units, edges)?;
    Ok((merged, report))
}

fn combine(g: &RegionGraph, members: &[NodeId]) -> Unit {
    if members.len() == 1 {
        let mut u = g.unit(members[0]).clone();
        u.multipolygon = None;
        return u;
    }
    let mut ids: Vec<&str> = members.iter().map(|&m| g.unit(m).id.as_str()).collect();
    ids.sort_unstable();
    let mut county_pop: BTreeMap<&str, f64> = BTreeMap::new();
    for &m in members {
        *county_pop.entry(g.unit(m).county.as_str()).or_default() += g.population(m);
    }
    let county = county_pop
        .iter()
        .fold(("", f64::NEG_INFINITY), |best, (&c, &p)| if p > best.1 { (c, p) } else { best })
        .0;
    let mut out = Unit::bare(ids.join("+"), 0.0, 0.0, county);
    out.votes = vec![Default::default(); g.elections().len()];
    for &m in members {
        let u = g.unit(m);
        out.population += u.population;
        out.area += u.area;
        out.exterior_perimeter += u.exterior_perimeter;
        out.bvap += u.bvap;
        out.tvap += u.tvap;
        for (acc, v) in out.votes.iter_mut().zip(&u.votes) {
            *acc += *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn build(units: Vec<Unit>, edges: &[(usize, usize, f64)]) -> RegionGraph {
        let edges = edges.iter().map(|&(a, b, shared_len)| Edge { a, b, shared_len }).collect();
        RegionGraph::new(Vec::new(), units, edges).unwrap()
    }

    fn unit(id: &str, pop: f64, county: &str, tag: Option<&str>) -> Unit {
        let mut u = Unit::bare(id, pop, 1.0, county);
        u.multipolygon = tag.map(|t| t.to_string());
        u
    }

    #[test]
    fn no_tags_is_identity() {
        let g = crate::fixtures::grid(2, 2, |_, _| "A".into());
        let (m, report) = merge_multipolygon_units(&g, &MergeOptions::default()).unwrap();
        assert_eq!(m, g);
        assert!(report.decisions.is_empty());
    }

    #[test]
    fn joins_through_cheaper_neighbour() {
        // p1 - n50 - p2 and p1 - n500 - p2.
        let units = vec![
            unit("p1", 10.0, "A", Some("P")),
            unit("n50", 50.0, "A", None),
            unit("n500", 500.0, "A", None),
            unit("p2", 10.0, "A", Some("P")),
        ];
        let g = build(units, &[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)]);
        let (m, _) = merge_multipolygon_units(&g, &MergeOptions::default()).unwrap();
        assert_eq!(m.num_units(), 2);
        assert_eq!(m.unit(0).id, "n50+p1+p2");
        assert_eq!(m.unit(0).population, 70.0);
        assert_eq!(m.unit(1).id, "n500");
        assert_eq!(m.num_edges(), 1);
        assert_eq!(m.edge(0).shared_len, 2.0);
        let (again, _) = merge_multipolygon_units(&m, &MergeOptions::default()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn over_cap_is_dissolved() {
        let units = vec![
            unit("p1", 12_000.0, "A", Some("P")),
            unit("n", 1_000.0, "A", None),
            unit("p2", 12_000.0, "A", Some("P")),
        ];
        let g = build(units, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let (m, report) = merge_multipolygon_units(&g, &MergeOptions::default()).unwrap();
        assert_eq!(m.num_units(), 3);
        assert!(m.units().iter().all(|u| u.multipolygon.is_none()));
        assert!(report.decisions.iter().any(|d| matches!(d, MergeDecision::Dissolved { population, .. } if *population == 25_000.0)));
    }

    #[test]
    fn isolated_piece_kept_or_absorbed() {
        let units = vec![
            unit("p1", 10.0, "A", Some("P")),
            unit("a", 5.0, "A", None),
            unit("p2", 1.0, "B", Some("P")),
            unit("b", 5.0, "B", None),
        ];
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 3.0), (1, 3, 1.0)];
        let g = build(units.clone(), &edges);
        let (m, report) = merge_multipolygon_units(&g, &MergeOptions::default()).unwrap();
        assert_eq!(m.num_units(), 4);
        assert!(matches!(&report.decisions[0], MergeDecision::IsolatedKept { unit, .. } if unit == "p2"));

        let opts = MergeOptions { absorb_isolated: true, ..Default::default() };
        let (m, _) = merge_multipolygon_units(&g, &opts).unwrap();
        assert_eq!(m.num_units(), 3);
        assert!(m.units().iter().any(|u| u.id == "b+p2" && u.county == "B"));
    }
}
