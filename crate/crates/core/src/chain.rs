//! Metropolized merge-split chain on hierarchical spanning-forest states.
//!
//! A state is a plan together with one hierarchical spanning tree per
//! district. The forest-space target is `1_C exp(-gamma E)`; its plan
//! marginal carries the product of hierarchical tree counts for free.
//!
//! Proposal: pick an adjacent district pair uniformly, draw a uniform
//! hierarchical tree on their union `R`, cut a uniform balanced edge. The
//! district that held `min(R)` keeps the side containing `min(R)`, so the
//! labelling is a deterministic function of the old plan and the cut and the
//! reverse move relabels identically. The probability of producing a given
//! pair of trees `(T_a, T_b)` is
//!
//! ```text
//! q = 1/N_pairs * 1/tau_hier(R) * sum_e 1/|cuts(T_a + T_b + e)|
//! ```
//!
//! over connecting edges `e` for which `T_a + T_b + e` is hierarchical and `e`
//! is one of its balanced cuts. `tau_hier(R)` is the same in both directions
//! and is left out of the logged values.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{
    balanced_cuts, connecting_edges, hierarchical_tree_draw, split_tree, tree_cuts, ForestError, SpanningForest,
};
use crate::graph::{county_fragments, EdgeId, GraphError, NodeId, Plan, RegionGraph};
use crate::math::{accept_prob, ln};
use crate::measures::{
    constraint_check, forest_energy, isoperimetric_score, score_breakdown, MeasureError, MeasureFamily,
    MeasureParams, ScoreBreakdown,
};
use crate::trees::log_hierarchical_tree_count;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("initial plan violates the constraints")]
    Infeasible,
    #[error("no feasible initial plan found after {0} attempts")]
    NoInitialPlan(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Plan, forest, cached score and the number of steps taken so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub plan: Plan,
    pub forest: SpanningForest,
    pub cached: ScoreBreakdown,
    pub step: u64,
}

impl ChainState {
    /// Validates plan and forest and scores the plan. Fails when the plan is
    /// infeasible.
    pub fn new(g: &RegionGraph, plan: Plan, forest: SpanningForest, p: &MeasureParams) -> Result<Self, ChainError> {
        g.validate_plan(&plan)?;
        forest.validate(g, &plan)?;
        let report = constraint_check(g, &plan, p);
        if !report.ok {
            return Err(ChainError::Infeasible);
        }
        let cached = score_breakdown(g, &plan, p, p.family == MeasureFamily::Interpolated)?;
        Ok(ChainState { plan, forest, cached, step: 0 })
    }

    /// Pairs a feasible plan with uniformly drawn hierarchical trees.
    pub fn with_random_forest<R: Rng + ?Sized>(
        g: &RegionGraph,
        plan: Plan,
        p: &MeasureParams,
        rng: &mut R,
    ) -> Result<Self, ChainError> {
        let forest = SpanningForest::random(g, &plan, rng)?;
        ChainState::new(g, plan, forest, p)
    }

    /// `E` of the current state under `p`'s family.
    pub fn energy(&self, p: &MeasureParams) -> f64 {
        forest_energy(&self.cached, p)
    }

    /// Rescores after a parameter change (needed when tree counts become
    /// necessary).
    pub fn rescore(&mut self, g: &RegionGraph, p: &MeasureParams) -> Result<(), ChainError> {
        self.cached = score_breakdown(g, &self.plan, p, p.family == MeasureFamily::Interpolated)?;
        Ok(())
    }
}

/// Builds a feasible plan by repeatedly drawing a hierarchical tree on the
/// unassigned region and cutting off one balanced district.
pub fn initial_plan<R: Rng + ?Sized>(
    g: &RegionGraph,
    p: &MeasureParams,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Plan, ChainError> {
    let k = p.districts;
    let ideal = p.ideal_population(g);
    'attempt: for _ in 0..max_attempts {
        let mut assignment = alloc::vec![u32::MAX; g.num_units()];
        let mut remaining: Vec<NodeId> = (0..g.num_units()).collect();
        for d in 0..k.saturating_sub(1) {
            let left = (k - d - 1) as f64;
            let tree = hierarchical_tree_draw(g, &remaining, rng)?;
            // Cut candidates: one side is a district, the other can still hold `left`.
            let mut options = Vec::new();
            for c in tree_cuts(g, &remaining, &tree) {
                for (mine, rest, take_a) in [(c.side_pops.0, c.side_pops.1, true), (c.side_pops.1, c.side_pops.0, false)] {
                    if crate::measures::within_tolerance(mine, ideal, p.pop_tolerance)
                        && crate::measures::within_tolerance(rest, left * ideal, p.pop_tolerance)
                    {
                        options.push((c.edge, take_a));
                    }
                }
            }
            if options.is_empty() {
                continue 'attempt;
            }
            let (edge, take_a) = options[rng.gen_range(0..options.len())];
            let split = split_tree(g, &remaining, &tree, edge);
            let (mine, rest) = if take_a { (split.a_side.0, split.b_side.0) } else { (split.b_side.0, split.a_side.0) };
            for &v in &mine {
                assignment[v] = d as u32;
            }
            remaining = rest;
        }
        for &v in &remaining {
            assignment[v] = (k - 1) as u32;
        }
        let plan = Plan::new(assignment, k)?;
        if constraint_check(g, &plan, p).ok {
            return Ok(plan);
        }
    }
    Err(ChainError::NoInitialPlan(max_attempts))
}

/// Outcome of one proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub pair: (usize, usize),
    /// The cut tree edge; `None` when no balanced cut existed (a self-loop).
    pub cut: Option<EdgeId>,
    /// New trees for `pair.0` and `pair.1`; empty on a self-loop.
    pub new_trees: (Vec<EdgeId>, Vec<EdgeId>),
    /// `ln q`, omitting the `-ln tau_hier(R)` term shared by both directions.
    pub log_q_fwd: f64,
    pub log_q_rev: f64,
    /// Whether the proposed plan satisfied every constraint.
    pub feasible: bool,
    pub accepted: bool,
}

impl ProposalRecord {
    fn self_loop(pair: (usize, usize)) -> Self {
        ProposalRecord {
            pair,
            cut: None,
            new_trees: (Vec::new(), Vec::new()),
            log_q_fwd: f64::NEG_INFINITY,
            log_q_rev: f64::NEG_INFINITY,
            feasible: false,
            accepted: false,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.cut.is_none()
    }
}

/// A proposed move before the accept/reject decision.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub record: ProposalRecord,
    pub plan: Plan,
    pub forest: SpanningForest,
}

/// Sorted union of two districts' members.
fn merged(plan: &Plan, a: usize, b: usize) -> Vec<NodeId> {
    plan.assignment()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d as usize == a || d as usize == b)
        .map(|(n, _)| n)
        .collect()
}

/// `ln sum_e 1/|cuts(T_a + T_b + e)|` over edges `e` producing a hierarchical
/// tree of which `e` is a balanced cut; `-inf` when none does.
pub fn log_producing_weight(
    g: &RegionGraph,
    region: &[NodeId],
    side_a: (&[NodeId], &[EdgeId]),
    side_b: (&[NodeId], &[EdgeId]),
    p: &MeasureParams,
) -> f64 {
    let fragments = county_fragments(g, region);
    let mut frag_of = alloc::vec![usize::MAX; g.num_units()];
    for (i, f) in fragments.iter().enumerate() {
        for &n in &f.nodes {
            frag_of[n] = i;
        }
    }
    // Components of T_a + T_b inside each fragment: |F| minus internal edges.
    let mut components: Vec<usize> = fragments.iter().map(|f| f.nodes.len()).collect();
    for &e in side_a.1.iter().chain(side_b.1) {
        let edge = g.edge(e);
        if frag_of[edge.a] == frag_of[edge.b] {
            components[frag_of[edge.a]] -= 1;
        }
    }
    if components.iter().any(|&c| c > 2) {
        return f64::NEG_INFINITY;
    }
    let split: Vec<usize> = (0..fragments.len()).filter(|&i| components[i] == 2).collect();
    if split.len() > 1 {
        return f64::NEG_INFINITY;
    }

    let mut tree: Vec<EdgeId> = side_a.1.iter().chain(side_b.1).copied().collect();
    let base = tree.len();
    let mut total = 0.0;
    for e in connecting_edges(g, side_a.0, side_b.0) {
        let edge = g.edge(e);
        let admissible = match split.first() {
            Some(&f) => frag_of[edge.a] == f && frag_of[edge.b] == f,
            None => frag_of[edge.a] != frag_of[edge.b],
        };
        if !admissible {
            continue;
        }
        tree.truncate(base);
        tree.push(e);
        let cuts = balanced_cuts(g, region, &tree, p.pop_tolerance, p.districts, g.total_population());
        if cuts.iter().any(|c| c.edge == e) {
            total += 1.0 / cuts.len() as f64;
        }
    }
    if total > 0.0 {
        ln(total)
    } else {
        f64::NEG_INFINITY
    }
}

/// Full `ln q` of moving from `plan` to the trees `(tree_a, tree_b)` on
/// districts `pair`, including the `-ln tau_hier(R)` term.
pub fn proposal_log_prob(
    g: &RegionGraph,
    plan: &Plan,
    pair: (usize, usize),
    side_a: (&[NodeId], &[EdgeId]),
    side_b: (&[NodeId], &[EdgeId]),
    p: &MeasureParams,
) -> Result<f64, ChainError> {
    let pairs = plan.adjacent_pairs(g);
    if !pairs.contains(&pair) {
        return Ok(f64::NEG_INFINITY);
    }
    let region = merged(plan, pair.0, pair.1);
    let log_tau = log_hierarchical_tree_count(g, &region).map_err(MeasureError::from)?;
    Ok(-ln(pairs.len() as f64) - log_tau + log_producing_weight(g, &region, side_a, side_b, p))
}

/// Draws one merge-split proposal from `state`. Constraint checks beyond
/// population balance happen at acceptance.
pub fn propose_merge_split<R: Rng + ?Sized>(
    g: &RegionGraph,
    state: &ChainState,
    p: &MeasureParams,
    rng: &mut R,
) -> Result<Proposal, ChainError> {
    let plan = &state.plan;
    let pairs = plan.adjacent_pairs(g);
    if pairs.is_empty() {
        return Ok(Proposal { record: ProposalRecord::self_loop((0, 0)), plan: plan.clone(), forest: state.forest.clone() });
    }
    let pair = pairs[rng.gen_range(0..pairs.len())];
    let (a, b) = pair;
    let region = merged(plan, a, b);
    let tree = hierarchical_tree_draw(g, &region, rng)?;
    let cuts = balanced_cuts(g, &region, &tree, p.pop_tolerance, p.districts, g.total_population());
    if cuts.is_empty() {
        return Ok(Proposal { record: ProposalRecord::self_loop(pair), plan: plan.clone(), forest: state.forest.clone() });
    }
    let cut = cuts[rng.gen_range(0..cuts.len())].edge;
    let split = split_tree(g, &region, &tree, cut);

    let anchor = region[0];
    let anchor_on_a_side = split.a_side.0.binary_search(&anchor).is_ok();
    let (anchor_side, other_side) = if anchor_on_a_side { (split.a_side, split.b_side) } else { (split.b_side, split.a_side) };
    let anchor_district = plan.district_of(anchor);
    let other_district = if anchor_district == a { b } else { a };

    let mut new_plan = plan.clone();
    new_plan.reassign(&anchor_side.0, anchor_district);
    new_plan.reassign(&other_side.0, other_district);
    let mut new_forest = state.forest.clone();
    new_forest.trees[anchor_district] = anchor_side.1.clone();
    new_forest.trees[other_district] = other_side.1.clone();

    let (new_a, new_b) = if anchor_district == a { (&anchor_side, &other_side) } else { (&other_side, &anchor_side) };
    let log_q_fwd = -ln(pairs.len() as f64)
        + log_producing_weight(g, &region, (&new_a.0, &new_a.1), (&new_b.0, &new_b.1), p);

    let old_a = plan.members(a);
    let old_b = plan.members(b);
    let rev_pairs = new_plan.adjacent_pairs(g).len();
    let log_q_rev = -ln(rev_pairs as f64)
        + log_producing_weight(g, &region, (&old_a, &state.forest.trees[a]), (&old_b, &state.forest.trees[b]), p);

    let record = ProposalRecord {
        pair,
        cut: Some(cut),
        new_trees: (new_a.1.clone(), new_b.1.clone()),
        log_q_fwd,
        log_q_rev,
        feasible: false,
        accepted: false,
    };
    Ok(Proposal { record, plan: new_plan, forest: new_forest })
}

/// `min(1, exp(log_ratio))`.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    accept_prob(log_ratio)
}

/// Scores a proposed plan, reusing the unchanged districts' tree counts.
fn score_proposal(
    g: &RegionGraph,
    state: &ChainState,
    proposal: &Proposal,
    p: &MeasureParams,
) -> Result<Option<ScoreBreakdown>, ChainError> {
    let report = constraint_check(g, &proposal.plan, p);
    if !report.ok {
        return Ok(None);
    }
    let iso = isoperimetric_score(g, &proposal.plan)?;
    let log_tau = if p.family == MeasureFamily::Interpolated {
        let mut lt = state.cached.log_tau.clone();
        for d in [proposal.record.pair.0, proposal.record.pair.1] {
            lt[d] = log_hierarchical_tree_count(g, &proposal.plan.members(d)).map_err(MeasureError::from)?;
        }
        lt
    } else {
        Vec::new()
    };
    Ok(Some(ScoreBreakdown {
        total_iso: iso.total,
        per_district_iso: iso.per_district_iso,
        per_district_pp: iso.per_district_pp,
        log_tau,
        splits: report.splits,
        constraint_ok: true,
    }))
}

/// One Metropolis-Hastings step. The state changes only on acceptance; the
/// step counter always advances.
pub fn mh_step<R: Rng + ?Sized>(
    g: &RegionGraph,
    state: &mut ChainState,
    p: &MeasureParams,
    rng: &mut R,
) -> Result<ProposalRecord, ChainError> {
    let mut proposal = propose_merge_split(g, state, p, rng)?;
    state.step += 1;
    if proposal.record.is_self_loop() {
        return Ok(proposal.record);
    }
    let Some(score) = score_proposal(g, state, &proposal, p)? else {
        return Ok(proposal.record);
    };
    proposal.record.feasible = true;
    let energy_new = forest_energy(&score, p);
    let log_ratio = -p.gamma * (energy_new - state.energy(p)) + proposal.record.log_q_rev - proposal.record.log_q_fwd;
    let u: f64 = rng.gen();
    if u < acceptance_probability(log_ratio) {
        state.plan = proposal.plan;
        state.forest = proposal.forest;
        state.cached = score;
        proposal.record.accepted = true;
        #[cfg(debug_assertions)]
        {
            let fresh = score_breakdown(g, &state.plan, p, p.family == MeasureFamily::Interpolated)?;
            debug_assert_eq!(fresh.total_iso, state.cached.total_iso);
            debug_assert_eq!(fresh.splits, state.cached.splits);
        }
    }
    Ok(proposal.record)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: u64,
    pub accepted: u64,
    pub self_loops: u64,
    pub infeasible: u64,
    pub emitted: u64,
}

impl RunStats {
    pub fn record(&mut self, r: &ProposalRecord) {
        self.steps += 1;
        if r.accepted {
            self.accepted += 1;
        } else if r.is_self_loop() {
            self.self_loops += 1;
        } else if !r.feasible {
            self.infeasible += 1;
        }
    }
}

/// Runs `steps` MH steps, handing the state to `sink` whenever the absolute
/// step counter is a multiple of `subsample_every`. Because emission keys on
/// the absolute counter, a resumed chain emits exactly what an uninterrupted
/// one would.
pub fn run_chain<R, E, F>(
    g: &RegionGraph,
    state: &mut ChainState,
    steps: u64,
    subsample_every: u64,
    p: &MeasureParams,
    rng: &mut R,
    mut sink: F,
) -> Result<RunStats, E>
where
    R: Rng + ?Sized,
    E: From<ChainError>,
    F: FnMut(&ChainState) -> Result<(), E>,
{
    let mut stats = RunStats::default();
    for _ in 0..steps {
        let record = mh_step(g, state, p, rng)?;
        stats.record(&record);
        if subsample_every > 0 && state.step % subsample_every == 0 {
            sink(state)?;
            stats.emitted += 1;
        }
    }
    Ok(stats)
}
