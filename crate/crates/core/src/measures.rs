//! Compactness scores, constraint indicators and the log-density of the
//! tempered spanning-forest measure family.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Plan, RegionGraph};
use crate::math::PI;
use crate::trees::{log_hierarchical_tree_count, TreeCountError};

/// Which tempered family a ladder interpolates along.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    /// `1_C(M) prod tau(M_i) exp(-gamma w J(M))`: the tree product is kept at
    /// every level, so on forest states only `gamma w J` varies.
    #[default]
    Concession,
    /// `1_C(M) prod tau(M_i)^(1-gamma) exp(-gamma w J(M))`: interpolates to
    /// the pure compactness measure. Needs tree counts at every step and
    /// requires far more rungs; kept for comparison runs.
    Interpolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub gamma: f64,
    /// Compactness weight; the effective weight at a rung is `gamma * w`.
    pub w: f64,
    pub pop_tolerance: f64,
    pub max_county_splits: usize,
    pub districts: usize,
    #[serde(default)]
    pub family: MeasureFamily,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("gamma {0} outside [0, 1]")]
    Gamma(f64),
    #[error("population tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("compactness weight must be non-negative, got {0}")]
    Weight(f64),
    #[error("district {0} has zero area")]
    ZeroArea(usize),
    #[error("plan has {found} districts, parameters expect {expected}")]
    DistrictCount { found: usize, expected: usize },
    #[error(transparent)]
    Trees(#[from] TreeCountError),
}

impl MeasureParams {
    /// Defaults used for the 14-district congressional configuration:
    /// 1% population tolerance, at most 21 split counties, `w = 0.04`.
    pub fn congressional() -> Self {
        MeasureParams {
            gamma: 1.0,
            w: 0.04,
            pop_tolerance: 0.01,
            max_county_splits: 21,
            districts: 14,
            family: MeasureFamily::Concession,
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(MeasureError::Gamma(self.gamma));
        }
        if !(self.pop_tolerance > 0.0) {
            return Err(MeasureError::Tolerance(self.pop_tolerance));
        }
        if !(self.w >= 0.0) {
            return Err(MeasureError::Weight(self.w));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn ideal_population(&self, g: &RegionGraph) -> f64 {
        g.total_population() / self.districts as f64
    }
}

/// `|pop - ideal| <= tolerance * ideal`; equality at the boundary is feasible.
#[inline]
pub fn within_tolerance(pop: f64, ideal: f64, tolerance: f64) -> bool {
    (pop - ideal).abs() <= tolerance * ideal
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// `J`: sum of per-district isoperimetric ratios.
    pub total_iso: f64,
    pub per_district_iso: Vec<f64>,
    pub per_district_pp: Vec<f64>,
    /// Per-district log hierarchical tree counts; empty unless requested.
    pub log_tau: Vec<f64>,
    pub splits: usize,
    pub constraint_ok: bool,
}

impl ScoreBreakdown {
    pub fn sum_log_tau(&self) -> f64 {
        self.log_tau.iter().sum()
    }

    /// Polsby-Popper scores sorted ascending (least compact first).
    pub fn ranked_pp(&self) -> Vec<f64> {
        let mut pp = self.per_district_pp.clone();
        pp.sort_by(f64::total_cmp);
        pp
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsoScores {
    pub per_district_iso: Vec<f64>,
    pub per_district_pp: Vec<f64>,
    pub area: Vec<f64>,
    pub perimeter: Vec<f64>,
    pub total: f64,
}

/// District perimeter is the shared length of cut edges plus member units'
/// exterior perimeter; `iso = P^2 / A`, `pp = 4 pi / iso`.
pub fn isoperimetric_score(g: &RegionGraph, plan: &Plan) -> Result<IsoScores, MeasureError> {
    let k = plan.num_districts();
    let mut area = vec![0.0; k];
    let mut perimeter = vec![0.0; k];
    for (n, u) in g.units().iter().enumerate() {
        let d = plan.district_of(n);
        area[d] += u.area;
        perimeter[d] += u.exterior_perimeter;
    }
    for e in g.edges() {
        let (da, db) = (plan.district_of(e.a), plan.district_of(e.b));
        if da != db {
            perimeter[da] += e.shared_len;
            perimeter[db] += e.shared_len;
        }
    }
    let mut iso = Vec::with_capacity(k);
    for d in 0..k {
        if !(area[d] > 0.0) {
            return Err(MeasureError::ZeroArea(d));
        }
        iso.push(perimeter[d] * perimeter[d] / area[d]);
    }
    let pp = iso.iter().map(|&i| 4.0 * PI / i).collect();
    let total = iso.iter().sum();
    Ok(IsoScores { per_district_iso: iso, per_district_pp: pp, area, perimeter, total })
}

/// Number of counties whose units fall in two or more districts.
pub fn county_splits(g: &RegionGraph, plan: &Plan) -> usize {
    const UNSET: u32 = u32::MAX;
    const MULTI: u32 = u32::MAX - 1;
    let mut seen = vec![UNSET; g.num_counties()];
    for n in 0..g.num_units() {
        let c = g.county_of(n);
        let d = plan.assignment()[n];
        match seen[c] {
            UNSET => seen[c] = d,
            MULTI => {}
            prev if prev != d => seen[c] = MULTI,
            _ => {}
        }
    }
    seen.iter().filter(|&&s| s == MULTI).count()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DistrictCount { found: usize, expected: usize },
    Disconnected { district: usize, components: usize },
    Population { district: usize, population: f64, ideal: f64 },
    TooManySplits { splits: usize, max: usize },
    /// The district's units inside `county` form more than one piece.
    Traversal { district: usize, county: usize, pieces: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub ok: bool,
    pub splits: usize,
    pub violations: Vec<Violation>,
}

/// Contiguity, population balance, split-count and county-traversal checks.
pub fn constraint_check(g: &RegionGraph, plan: &Plan, p: &MeasureParams) -> ConstraintReport {
    let k = plan.num_districts();
    let mut violations = Vec::new();
    if k != p.districts {
        violations.push(Violation::DistrictCount { found: k, expected: p.districts });
    }
    let n = g.num_units();
    let asg = plan.assignment();

    // (a) contiguity and (d) traversal via two union-find passes.
    let mut by_district = Dsu::new(n);
    let mut by_piece = Dsu::new(n);
    for e in g.edges() {
        if asg[e.a] == asg[e.b] {
            by_district.union(e.a, e.b);
            if g.county_of(e.a) == g.county_of(e.b) {
                by_piece.union(e.a, e.b);
            }
        }
    }
    let mut comps = vec![0usize; k];
    let mut pop = vec![0.0; k];
    for v in 0..n {
        pop[asg[v] as usize] += g.population(v);
        if by_district.find(v) == v {
            comps[asg[v] as usize] += 1;
        }
    }
    for (d, &c) in comps.iter().enumerate() {
        if c != 1 {
            violations.push(Violation::Disconnected { district: d, components: c });
        }
    }

    // (b) population balance.
    let ideal = g.total_population() / p.districts as f64;
    for (d, &pd) in pop.iter().enumerate() {
        if !within_tolerance(pd, ideal, p.pop_tolerance) {
            violations.push(Violation::Population { district: d, population: pd, ideal });
        }
    }

    // (c) split counties.
    let splits = county_splits(g, plan);
    if splits > p.max_county_splits {
        violations.push(Violation::TooManySplits { splits, max: p.max_county_splits });
    }

    // (d) each district-county intersection is one piece.
    let mut pieces: alloc::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for v in 0..n {
        if by_piece.find(v) == v {
            *pieces.entry((asg[v] as usize, g.county_of(v))).or_default() += 1;
        }
    }
    for ((district, county), count) in pieces {
        if count > 1 {
            violations.push(Violation::Traversal { district, county, pieces: count });
        }
    }

    ConstraintReport { ok: violations.is_empty(), splits, violations }
}

/// Full score of a plan. Tree counts are only computed when asked for, since
/// each costs a dense determinant per district.
pub fn score_breakdown(
    g: &RegionGraph,
    plan: &Plan,
    p: &MeasureParams,
    with_tree_counts: bool,
) -> Result<ScoreBreakdown, MeasureError> {
    let iso = isoperimetric_score(g, plan)?;
    let report = constraint_check(g, plan, p);
    let log_tau = if with_tree_counts {
        plan.district_members()
            .iter()
            .map(|m| log_hierarchical_tree_count(g, m))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    Ok(ScoreBreakdown {
        total_iso: iso.total,
        per_district_iso: iso.per_district_iso,
        per_district_pp: iso.per_district_pp,
        log_tau,
        splits: report.splits,
        constraint_ok: report.ok,
    })
}

/// Energy whose `-gamma` multiple is the forest-space log-density.
pub fn forest_energy(score: &ScoreBreakdown, p: &MeasureParams) -> f64 {
    match p.family {
        MeasureFamily::Concession => p.w * score.total_iso,
        MeasureFamily::Interpolated => p.w * score.total_iso + score.sum_log_tau(),
    }
}

/// Unnormalized log-density from a precomputed score.
///
/// On forest states: `-gamma w J` (every forest of a plan has equal weight).
/// On plans: the forest density plus `sum log tau_hier(M_i)`, which requires
/// `score.log_tau` to be filled. Infeasible plans get `-inf`.
pub fn log_density_from(score: &ScoreBreakdown, forest_present: bool, p: &MeasureParams) -> f64 {
    if !score.constraint_ok {
        return f64::NEG_INFINITY;
    }
    let forest = -p.gamma * forest_energy(score, p);
    if forest_present {
        forest
    } else {
        forest + score.sum_log_tau()
    }
}

pub fn log_density(g: &RegionGraph, plan: &Plan, forest_present: bool, p: &MeasureParams) -> Result<f64, MeasureError> {
    let need_tau = !forest_present || p.family == MeasureFamily::Interpolated;
    let score = score_breakdown(g, plan, p, need_tau)?;
    Ok(log_density_from(&score, forest_present, p))
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
