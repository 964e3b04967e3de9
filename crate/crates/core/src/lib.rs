//! Sampling and audit core for ensembles of balanced, contiguous graph
//! partitions.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`graph`]: the attributed dual graph, plans, subgraph views, county
//!   fragments and quotient multigraphs; [`merge`] holds multi-polygon
//!   preprocessing.
//! * [`measures`] and [`trees`]: compactness scores, constraint checks,
//!   matrix-tree counts and the tempered spanning-forest log-density.
//! * [`forest`]: uniform (hierarchical) spanning trees and balanced tree cuts.
//! * [`chain`]: the Metropolized merge-split chain on forest states.
//! * [`tempering`]: replica ladders over the tempering parameter with a
//!   heat-bath reservoir.
//! * [`analysis`]: seat histograms, uniform swing, rank-ordered marginals,
//!   polarization, frequency maps, convergence and VRA screens.
//!
//! File formats, checkpoints, threading and the command line live in the
//! companion `recom` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod chain;
pub mod fixtures;
pub mod forest;
pub mod graph;
pub mod math;
pub mod measures;
pub mod merge;
pub mod tempering;
pub mod trees;

pub use chain::{ChainState, ProposalRecord};
pub use forest::SpanningForest;
pub use graph::{Edge, EdgeId, GraphError, Multigraph, NodeId, Plan, RegionGraph, Unit, Votes};
pub use measures::{MeasureFamily, MeasureParams, ScoreBreakdown};
