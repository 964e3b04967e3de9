//! Spanning-tree counts via the matrix-tree theorem, in log domain.

use alloc::vec;

use thiserror::Error;

use crate::graph::{county_fragments, quotient_multigraph, GraphError, Multigraph, NodeId, RegionGraph};
use crate::math::ln;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeCountError {
    #[error("graph is disconnected: no spanning tree")]
    NoSpanningTree,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Natural log of the number of spanning trees of a multigraph (parallel
/// edges counted with multiplicity).
///
/// Computes the log-determinant of the Laplacian with its last row and
/// column removed, by LU elimination with partial pivoting.
pub fn log_tree_count(mg: &Multigraph) -> Result<f64, TreeCountError> {
    if mg.n == 0 {
        return Err(TreeCountError::NoSpanningTree);
    }
    if !mg.is_connected() {
        return Err(TreeCountError::NoSpanningTree);
    }
    let m = mg.n - 1;
    if m == 0 {
        return Ok(0.0);
    }
    let mut a = vec![0.0f64; m * m];
    for &(u, v) in &mg.edges {
        if u == v {
            continue;
        }
        if u < m {
            a[u * m + u] += 1.0;
        }
        if v < m {
            a[v * m + v] += 1.0;
        }
        if u < m && v < m {
            a[u * m + v] -= 1.0;
            a[v * m + u] -= 1.0;
        }
    }
    log_abs_det(&mut a, m).ok_or(TreeCountError::NoSpanningTree)
}

/// `ln |det A|` of a dense row-major `m x m` matrix, destroying `a`.
/// `None` when a pivot vanishes.
fn log_abs_det(a: &mut [f64], m: usize) -> Option<f64> {
    let mut log_det = 0.0;
    for k in 0..m {
        let mut piv = k;
        let mut best = a[k * m + k].abs();
        for r in (k + 1)..m {
            let v = a[r * m + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > 0.0) {
            return None;
        }
        if piv != k {
            for c in k..m {
                a.swap(k * m + c, piv * m + c);
            }
        }
        let p = a[k * m + k];
        log_det += ln(p.abs());
        for r in (k + 1)..m {
            let f = a[r * m + k] / p;
            if f == 0.0 {
                continue;
            }
            for c in (k + 1)..m {
                a[r * m + c] -= f * a[k * m + c];
            }
        }
    }
    Some(log_det)
}

/// Log of the number of hierarchical spanning trees of a district: a tree of
/// the county quotient multigraph times a spanning tree inside every county
/// fragment.
pub fn log_hierarchical_tree_count(g: &RegionGraph, district: &[NodeId]) -> Result<f64, TreeCountError> {
    let view = g.induced_subgraph(district)?;
    if !crate::graph::is_connected(&view) {
        return Err(TreeCountError::NoSpanningTree);
    }
    let fragments = county_fragments(g, view.nodes());
    let mut total = log_tree_count(&quotient_multigraph(g, &fragments))?;
    for f in &fragments {
        total += log_tree_count(&g.induced_subgraph(&f.nodes)?.to_multigraph())?;
    }
    Ok(total)
}

/// Log of the plain spanning-tree count of the subgraph induced by `district`.
pub fn log_flat_tree_count(g: &RegionGraph, district: &[NodeId]) -> Result<f64, TreeCountError> {
    log_tree_count(&g.induced_subgraph(district)?.to_multigraph())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use alloc::string::ToString;

    fn mg(n: usize, edges: &[(usize, usize)]) -> Multigraph {
        let mut m = Multigraph::new(n);
        for (i, &(a, b)) in edges.iter().enumerate() {
            m.add_edge(a, b, i);
        }
        m
    }

    #[test]
    fn small_counts() {
        assert!((log_tree_count(&mg(3, &[(0, 1), (1, 2), (2, 0)])).unwrap() - ln(3.0)).abs() < 1e-12);
        assert!((log_tree_count(&mg(2, &[(0, 1), (0, 1)])).unwrap() - ln(2.0)).abs() < 1e-12);
        assert_eq!(log_tree_count(&mg(1, &[])).unwrap(), 0.0);
        let g23 = fixtures::grid(2, 3, |_, _| "A".to_string());
        let all: alloc::vec::Vec<_> = (0..6).collect();
        assert!((log_flat_tree_count(&g23, &all).unwrap() - ln(15.0)).abs() < 1e-12);
    }

    #[test]
    fn disconnected_has_no_tree() {
        assert_eq!(log_tree_count(&mg(3, &[(0, 1)])), Err(TreeCountError::NoSpanningTree));
        let p = fixtures::path(&[1.0; 4], &["A"; 4]);
        assert_eq!(log_hierarchical_tree_count(&p, &[0, 2]), Err(TreeCountError::NoSpanningTree));
    }

    #[test]
    fn hierarchical_counts() {
        let one = fixtures::grid(2, 2, |_, _| "A".to_string());
        let all = [0, 1, 2, 3];
        assert!(
            (log_hierarchical_tree_count(&one, &all).unwrap() - log_flat_tree_count(&one, &all).unwrap()).abs()
                < 1e-12
        );
        let two = fixtures::grid(2, 2, |r, _| if r == 0 { "A".into() } else { "B".into() });
        assert!((log_hierarchical_tree_count(&two, &all).unwrap() - ln(2.0)).abs() < 1e-12);
        assert!((log_flat_tree_count(&two, &all).unwrap() - ln(4.0)).abs() < 1e-12);
        let p = fixtures::path(&[1.0; 4], &["A", "A", "B", "B"]);
        assert!(log_hierarchical_tree_count(&p, &all).unwrap().abs() < 1e-12);
    }
}
