//! Brute-force oracles and frozen reference values shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use recom_core::fixtures;
use recom_core::graph::{Edge, Unit, Votes};
use recom_core::RegionGraph;

pub struct Dsu(Vec<usize>);

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// False when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Every `k`-subset of `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Spanning trees of a multigraph as sorted edge-index lists.
pub fn spanning_trees(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    if n <= 1 {
        return vec![Vec::new()];
    }
    combinations(edges.len(), n - 1)
        .into_iter()
        .filter(|subset| {
            let mut dsu = Dsu::new(n);
            subset.iter().all(|&e| dsu.union(edges[e].0, edges[e].1))
        })
        .collect()
}

/// Random connected multigraph: a random spanning tree plus `extra` random
/// edges (parallel edges allowed, no self-loops).
pub fn random_connected_multigraph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    if n >= 2 {
        for _ in 0..extra {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            edges.push((a, b));
        }
    }
    edges
}

/// One feasible plan of the 4x4 oracle instance: `bits[i]` is `'1'` when
/// unit `i` is not in the district of unit 0.
pub struct OracleRow {
    pub bits: &'static str,
    pub tau_hier: f64,
    pub iso: f64,
    pub tau_flat: f64,
}

/// Frozen from an independent enumeration (networkx spanning-tree counts):
/// all feasible two-district plans of the 4x4 grid with counties by column
/// `{0 | 1-2 | 3}`, 7 to 9 units per district and at most one split county.
/// `tau_*` are products over the two districts.
pub const ORACLE: [OracleRow; 19] = [
    OracleRow { bits: "0001001101110111", tau_hier: 24.0, iso: 49.77777777777778, tau_flat: 224.0 },
    OracleRow { bits: "0001010101110111", tau_hier: 8.0, iso: 65.01587301587301, tau_flat: 15.0 },
    OracleRow { bits: "0011001100110111", tau_hier: 12.0, iso: 42.349206349206355, tau_flat: 840.0 },
    OracleRow { bits: "0111001100110011", tau_hier: 12.0, iso: 42.349206349206355, tau_flat: 840.0 },
    OracleRow { bits: "0111011100110001", tau_hier: 24.0, iso: 49.77777777777778, tau_flat: 224.0 },
    OracleRow { bits: "0111011101010001", tau_hier: 8.0, iso: 65.01587301587301, tau_flat: 15.0 },
    OracleRow { bits: "0001000101110111", tau_hier: 64.0, iso: 49.0, tau_flat: 225.0 },
    OracleRow { bits: "0001001100110111", tau_hier: 9.0, iso: 49.0, tau_flat: 225.0 },
    OracleRow { bits: "0001010101010111", tau_hier: 1.0, iso: 81.0, tau_flat: 1.0 },
    OracleRow { bits: "0011001100110011", tau_hier: 16.0, iso: 36.0, tau_flat: 3136.0 },
    OracleRow { bits: "0111001100110001", tau_hier: 9.0, iso: 49.0, tau_flat: 225.0 },
    OracleRow { bits: "0111010101010001", tau_hier: 1.0, iso: 81.0, tau_flat: 1.0 },
    OracleRow { bits: "0111011100010001", tau_hier: 64.0, iso: 49.0, tau_flat: 225.0 },
    OracleRow { bits: "0001000100110111", tau_hier: 24.0, iso: 49.77777777777778, tau_flat: 224.0 },
    OracleRow { bits: "0001000101010111", tau_hier: 8.0, iso: 65.01587301587301, tau_flat: 15.0 },
    OracleRow { bits: "0001001100110011", tau_hier: 12.0, iso: 42.349206349206355, tau_flat: 840.0 },
    OracleRow { bits: "0011001100110001", tau_hier: 12.0, iso: 42.349206349206355, tau_flat: 840.0 },
    OracleRow { bits: "0111001100010001", tau_hier: 24.0, iso: 49.77777777777778, tau_flat: 224.0 },
    OracleRow { bits: "0111010100010001", tau_hier: 8.0, iso: 65.01587301587301, tau_flat: 15.0 },
];

/// Frozen probabilities of the plan `0011001100110011` (two 2-column halves).
pub const HALVES_PROB_W05_G1: f64 = 0.8731594199863109;
pub const HALVES_PROB_W05_G05: f64 = 0.4629209919052691;

/// Plan key: bit `i` set when unit `i` is not with unit 0.
pub fn plan_key(assignment: &[u32]) -> u16 {
    assignment.iter().enumerate().fold(0u16, |k, (i, &d)| if d != assignment[0] { k | (1 << i) } else { k })
}

pub fn bits_key(bits: &str) -> u16 {
    bits.bytes().enumerate().fold(0u16, |k, (i, b)| if b == b'1' { k | (1 << i) } else { k })
}

/// Exact plan law `tau_hier * exp(-gamma w J)` over the frozen table.
pub fn exact_law(gamma: f64, w: f64) -> BTreeMap<u16, f64> {
    let weights: Vec<(u16, f64)> =
        ORACLE.iter().map(|r| (bits_key(r.bits), r.tau_hier * (-gamma * w * r.iso).exp())).collect();
    let z: f64 = weights.iter().map(|w| w.1).sum();
    weights.into_iter().map(|(k, w)| (k, w / z)).collect()
}

pub fn total_variation(counts: &BTreeMap<u16, u64>, exact: &BTreeMap<u16, f64>) -> f64 {
    let n: u64 = counts.values().sum();
    let mut keys: Vec<u16> = counts.keys().chain(exact.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (*counts.get(k).unwrap_or(&0) as f64 / n as f64 - exact.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

pub fn empirical_tv(a: &BTreeMap<u16, u64>, b: &BTreeMap<u16, u64>) -> f64 {
    let nb: u64 = b.values().sum();
    let law: BTreeMap<u16, f64> = b.iter().map(|(&k, &c)| (k, c as f64 / nb as f64)).collect();
    total_variation(a, &law)
}

/// Independent enumeration of the oracle instance from grid geometry alone:
/// `(key, tau_hier product, J)` for every feasible plan. Hierarchical trees
/// are counted by definition: spanning trees of the district whose
/// restriction to each county piece is a spanning tree of that piece.
pub fn enumerate_oracle() -> Vec<(u16, f64, f64)> {
    const N: usize = 4;
    let county = |v: usize| match v % N {
        0 => 0,
        3 => 2,
        _ => 1,
    };
    let mut edges = Vec::new();
    for r in 0..N {
        for c in 0..N {
            let v = r * N + c;
            if c + 1 < N {
                edges.push((v, v + 1));
            }
            if r + 1 < N {
                edges.push((v, v + N));
            }
        }
    }
    let exterior = |v: usize| {
        let (r, c) = (v / N, v % N);
        [r == 0, r == N - 1, c == 0, c == N - 1].iter().filter(|&&b| b).count() as f64
    };
    let mut out = Vec::new();
    for mask in 0u32..(1 << (N * N)) {
        if mask & 1 != 0 {
            continue;
        }
        let side = |v: usize| (mask >> v) & 1;
        let sizes = [(0..16).filter(|&v| side(v) == 0).count(), (0..16).filter(|&v| side(v) == 1).count()];
        if sizes.iter().any(|&s| !(7..=9).contains(&s)) {
            continue;
        }
        let mut split = 0;
        for c in 0..3 {
            let sides: Vec<u32> = (0..16).filter(|&v| county(v) == c).map(side).collect();
            if sides.iter().any(|&s| s != sides[0]) {
                split += 1;
            }
        }
        if split > 1 {
            continue;
        }
        let mut feasible = true;
        let mut tau = 1.0;
        let mut iso = 0.0;
        for d in 0..2u32 {
            let nodes: Vec<usize> = (0..16).filter(|&v| side(v) == d).collect();
            let local = |v: usize| nodes.iter().position(|&x| x == v).unwrap();
            let inner: Vec<(usize, usize)> =
                edges.iter().filter(|&&(a, b)| side(a) == d && side(b) == d).map(|&(a, b)| (local(a), local(b))).collect();
            let mut dsu = Dsu::new(nodes.len());
            let comps = nodes.len() - inner.iter().filter(|&&(a, b)| dsu.union(a, b)).count();
            // County pieces must each be connected.
            let mut pieces = Dsu::new(nodes.len());
            let same_county: Vec<(usize, usize)> =
                inner.iter().copied().filter(|&(a, b)| county(nodes[a]) == county(nodes[b])).collect();
            let joined = same_county.iter().filter(|&&(a, b)| pieces.union(a, b)).count();
            let counties_present = {
                let mut cs: Vec<usize> = nodes.iter().map(|&v| county(v)).collect();
                cs.sort_unstable();
                cs.dedup();
                cs.len()
            };
            if comps != 1 || nodes.len() - joined != counties_present {
                feasible = false;
                break;
            }
            let hier = spanning_trees(nodes.len(), &inner)
                .into_iter()
                .filter(|t| {
                    let internal = t.iter().filter(|&&e| county(nodes[inner[e].0]) == county(nodes[inner[e].1])).count();
                    internal == nodes.len() - counties_present
                })
                .count();
            tau *= hier as f64;
            let cut = edges.iter().filter(|&&(a, b)| (side(a) == d) != (side(b) == d)).count() as f64;
            let perimeter = cut + nodes.iter().map(|&v| exterior(v)).sum::<f64>();
            iso += perimeter * perimeter / nodes.len() as f64;
        }
        if feasible {
            out.push((mask as u16, tau, iso));
        }
    }
    out
}

/// A 6x6 grid in three two-column counties with unit population and
/// deterministic election and VAP data, for end-to-end runs.
pub fn demo_graph() -> RegionGraph {
    let (mut units, edges): (Vec<Unit>, Vec<Edge>) =
        fixtures::grid_parts(6, 6, |_, c| ["A", "B", "C"][c / 2].to_string());
    let elections: Vec<String> = ["E1", "E2", "B1"].iter().map(|s| s.to_string()).collect();
    for (i, u) in units.iter_mut().enumerate() {
        let d = 20.0 + ((i * 37) % 61) as f64;
        u.population = 100.0;
        u.tvap = 60.0;
        u.bvap = ((i * 13) % 41) as f64;
        u.votes = vec![Votes::new(d, 100.0 - d), Votes::new(d + 5.0, 95.0 - d), Votes::new(d - 3.0, 103.0 - d)];
    }
    RegionGraph::new(elections, units, edges).expect("demo graph is valid")
}
