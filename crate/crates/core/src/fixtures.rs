//! Small synthetic graphs: unit-square grids, paths and cycles. Unit ids are
//! the decimal node index, so `g.unit(i).id == i.to_string()`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::graph::{Edge, RegionGraph, Unit};

/// `rows x cols` grid of unit squares with unit population. Node `(r, c)` is
/// index `r * cols + c`; shared sides have length 1 and the outer border is
/// recorded as exterior perimeter.
pub fn grid(rows: usize, cols: usize, county: impl Fn(usize, usize) -> String) -> RegionGraph {
    let (units, edges) = grid_parts(rows, cols, county);
    RegionGraph::new(Vec::new(), units, edges).expect("grid fixture is valid")
}

/// Units and edges of [`grid`], for callers that want to attach data first.
pub fn grid_parts(rows: usize, cols: usize, county: impl Fn(usize, usize) -> String) -> (Vec<Unit>, Vec<Edge>) {
    let mut units = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut u = Unit::bare((r * cols + c).to_string(), 1.0, 1.0, county(r, c));
            let border = [r == 0, r + 1 == rows, c == 0, c + 1 == cols];
            u.exterior_perimeter = border.iter().filter(|&&b| b).count() as f64;
            units.push(u);
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                edges.push(Edge { a: id, b: id + 1, shared_len: 1.0 });
            }
            if r + 1 < rows {
                edges.push(Edge { a: id, b: id + cols, shared_len: 1.0 });
            }
        }
    }
    (units, edges)
}

/// Path `0 - 1 - ... - n-1` with the given populations and counties.
pub fn path(pops: &[f64], counties: &[&str]) -> RegionGraph {
    let edges = (1..pops.len()).map(|i| (i - 1, i)).collect::<Vec<_>>();
    from_edges(pops, counties, &edges)
}

/// Cycle on `n` unit-population nodes, one county.
pub fn cycle(n: usize) -> RegionGraph {
    let edges = (0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>();
    let counties = alloc::vec!["A"; n];
    from_edges(&alloc::vec![1.0; n], &counties, &edges)
}

/// Arbitrary simple graph with unit areas and unit shared lengths.
pub fn from_edges(pops: &[f64], counties: &[&str], edges: &[(usize, usize)]) -> RegionGraph {
    let units = pops
        .iter()
        .zip(counties)
        .enumerate()
        .map(|(i, (&p, &c))| Unit::bare(i.to_string(), p, 1.0, c))
        .collect();
    let edges = edges.iter().map(|&(a, b)| Edge { a, b, shared_len: 1.0 }).collect();
    RegionGraph::new(Vec::new(), units, edges).expect("fixture is valid")
}

/// 4x4 unit grid with counties `{column 0 | columns 1-2 | column 3}`, used as
/// the small exactly-enumerable instance.
pub fn oracle_grid() -> RegionGraph {
    grid(4, 4, |_, c| match c {
        0 => "L".to_string(),
        3 => "R".to_string(),
        _ => "M".to_string(),
    })
}

/// Parameters for [`oracle_grid`]: two districts of 7 to 9 units, at most
/// one split county.
pub fn oracle_params(gamma: f64, w: f64) -> crate::measures::MeasureParams {
    crate::measures::MeasureParams {
        gamma,
        w,
        pop_tolerance: 0.125,
        max_county_splits: 1,
        districts: 2,
        family: crate::measures::MeasureFamily::Concession,
    }
}
