//! Ensemble-versus-reference statistics over per-district election totals.
//!
//! Shares are two-party Democratic shares `d / (d + r)`; third-party votes
//! never enter. Ranks are 1-based, rank 1 being the least Democratic
//! district of a plan under the election in question.

pub mod vra;

pub use vra::{black_turnout, general_condition, plan_passes, primary_condition, vra_district_passes, vra_estimate_c, vra_screen, CEstimate, VraModel};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Plan, RegionGraph, Votes};
use crate::measures::ScoreBreakdown;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("unknown election {0}")]
    UnknownElection(String),
    #[error("district {district} has no two-party votes in election {election}")]
    UndefinedShare { election: usize, district: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("record {0} carries no assignment")]
    MissingAssignment(u64),
    #[error("rank range {0:?} exceeds the district count {1}")]
    RankRange(RangeInclusive<usize>, usize),
    #[error("need at least {0} elections")]
    TooFewElections(usize),
    #[error("bvap/tvap data missing")]
    MissingVap,
}

/// Election names and which of them had a Black Democratic candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectionSet {
    pub names: Vec<String>,
    pub black_candidate: Vec<String>,
}

impl ElectionSet {
    pub const DEFAULT_BLACK_CANDIDATE: [&'static str; 3] = ["18GOV", "18INS", "20USS"];

    pub fn new(names: Vec<String>) -> Self {
        let black_candidate = Self::DEFAULT_BLACK_CANDIDATE
            .iter()
            .filter(|b| names.iter().any(|n| n == *b))
            .map(|b| b.to_string())
            .collect();
        ElectionSet { names, black_candidate }
    }

    pub fn index(&self, name: &str) -> Result<usize, AnalysisError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| AnalysisError::UnknownElection(name.into()))
    }

    pub fn is_black_candidate(&self, e: usize) -> bool {
        self.black_candidate.iter().any(|b| *b == self.names[e])
    }
}

/// Per-plan aggregates needed by every statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub plan_id: u64,
    pub district_pop: Vec<f64>,
    /// `votes[election][district]`.
    pub votes: Vec<Vec<Votes>>,
    pub total_iso: f64,
    pub splits: usize,
    pub bvap: Vec<f64>,
    pub tvap: Vec<f64>,
    pub pp: Vec<f64>,
    /// Unit assignment; only frequency maps need it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<u32>>,
}

impl EnsembleRecord {
    pub fn from_plan(g: &RegionGraph, plan: &Plan, plan_id: u64, score: &ScoreBreakdown, keep_assignment: bool) -> Self {
        let k = plan.num_districts();
        let ne = g.elections().len();
        let mut district_pop = vec![0.0; k];
        let mut bvap = vec![0.0; k];
        let mut tvap = vec![0.0; k];
        let mut votes = vec![vec![Votes::default(); k]; ne];
        for (n, u) in g.units().iter().enumerate() {
            let d = plan.district_of(n);
            district_pop[d] += u.population;
            bvap[d] += u.bvap;
            tvap[d] += u.tvap;
            for (e, v) in u.votes.iter().enumerate() {
                votes[e][d] += *v;
            }
        }
        EnsembleRecord {
            plan_id,
            district_pop,
            votes,
            total_iso: score.total_iso,
            splits: score.splits,
            bvap,
            tvap,
            pp: score.per_district_pp.clone(),
            assignment: keep_assignment.then(|| plan.assignment().to_vec()),
        }
    }

    pub fn num_districts(&self) -> usize {
        self.district_pop.len()
    }

    /// Two-party Democratic share of the whole state.
    pub fn statewide_share(&self, election: usize) -> f64 {
        let (d, t) = self.votes[election].iter().fold((0.0, 0.0), |(d, t), v| (d + v.dem, t + v.total()));
        d / t
    }
}

/// Per-district shares; `None` where a district has no two-party votes.
pub fn district_shares(record: &EnsembleRecord, election: usize) -> Vec<Option<f64>> {
    record.votes[election]
        .iter()
        .map(|v| if v.total() > 0.0 { Some(v.dem / v.total()) } else { None })
        .collect()
}

fn defined_shares(record: &EnsembleRecord, election: usize) -> Result<Vec<f64>, AnalysisError> {
    district_shares(record, election)
        .into_iter()
        .enumerate()
        .map(|(district, s)| s.ok_or(AnalysisError::UndefinedShare { election, district }))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatCount {
    pub seats: usize,
    /// Districts at exactly one half, counted as not won.
    pub ties: usize,
}

/// Seats with share strictly above one half.
pub fn seats_won(shares: &[f64]) -> SeatCount {
    SeatCount {
        seats: shares.iter().filter(|&&s| s > 0.5).count(),
        ties: shares.iter().filter(|&&s| s == 0.5).count(),
    }
}

pub fn record_seats(record: &EnsembleRecord, election: usize) -> Result<SeatCount, AnalysisError> {
    Ok(seats_won(&defined_shares(record, election)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeatHistogram {
    pub election: String,
    /// `counts[s]` plans winning `s` seats, `s = 0..=K`.
    pub counts: Vec<u64>,
    pub statewide_share: f64,
    pub reference_seats: usize,
}

impl SeatHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        let n: u64 = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

pub fn collected_seat_histogram(
    ensemble: &[EnsembleRecord],
    elections: &ElectionSet,
    selected: &[usize],
    reference: &EnsembleRecord,
) -> Result<Vec<SeatHistogram>, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let k = reference.num_districts();
    selected
        .iter()
        .map(|&e| {
            let mut counts = vec![0u64; k + 1];
            for r in ensemble {
                counts[record_seats(r, e)?.seats] += 1;
            }
            Ok(SeatHistogram {
                election: elections.names[e].clone(),
                counts,
                statewide_share: reference.statewide_share(e),
                reference_seats: record_seats(reference, e)?.seats,
            })
        })
        .collect()
}

/// Fraction of plans whose seat count is the same under every listed
/// election, with their ids.
pub fn responsiveness_fraction(ensemble: &[EnsembleRecord], elections: &[usize]) -> Result<(f64, Vec<u64>), AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let mut fixed = Vec::new();
    for r in ensemble {
        let seats = elections.iter().map(|&e| record_seats(r, e).map(|s| s.seats)).collect::<Result<Vec<_>, _>>()?;
        if seats.windows(2).all(|w| w[0] == w[1]) {
            fixed.push(r.plan_id);
        }
    }
    Ok((fixed.len() as f64 / ensemble.len() as f64, fixed))
}

/// Shifts every share by `delta`, clipped to `[0, 1]`.
pub fn uniform_swing(shares: &[f64], delta: f64) -> Vec<f64> {
    shares.iter().map(|&s| (s + delta).clamp(0.0, 1.0)).collect()
}

/// Two-party statewide share with district turnout held fixed.
pub fn statewide_from_shares(shares: &[f64], turnout: &[f64]) -> f64 {
    let t: f64 = turnout.iter().sum();
    shares.iter().zip(turnout).map(|(s, t)| s * t).sum::<f64>() / t
}

/// District shares after swinging every unit's share by `delta` (clipped)
/// at fixed unit turnout.
pub fn precinct_swing(g: &RegionGraph, assignment: &[u32], districts: usize, election: usize, delta: f64) -> Vec<f64> {
    let mut dem = vec![0.0; districts];
    let mut tot = vec![0.0; districts];
    for (n, u) in g.units().iter().enumerate() {
        let v = u.votes[election];
        if v.total() > 0.0 {
            let d = assignment[n] as usize;
            dem[d] += (v.dem / v.total() + delta).clamp(0.0, 1.0) * v.total();
            tot[d] += v.total();
        }
    }
    dem.iter().zip(&tot).map(|(d, t)| d / t).collect()
}

/// Statewide targets from 40% to 60% in half-point steps.
pub fn default_swing_grid() -> Vec<f64> {
    (0..=40).map(|i| 0.40 + 0.005 * i as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwingRow {
    pub target: f64,
    pub delta: f64,
    /// Statewide share after clipping, from the reference plan.
    pub realised: f64,
    pub counts: Vec<u64>,
    pub reference_seats: usize,
}

/// Seat histograms after swinging every plan to each statewide target.
pub fn swing_sweep(
    ensemble: &[EnsembleRecord],
    election: usize,
    reference: &EnsembleRecord,
    targets: &[f64],
) -> Result<Vec<SwingRow>, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let k = reference.num_districts();
    let base = reference.statewide_share(election);
    let ref_shares = defined_shares(reference, election)?;
    let ref_turnout: Vec<f64> = reference.votes[election].iter().map(Votes::total).collect();
    let mut shares = Vec::with_capacity(ensemble.len());
    for r in ensemble {
        shares.push(defined_shares(r, election)?);
    }
    Ok(targets
        .iter()
        .map(|&target| {
            let delta = target - base;
            let mut counts = vec![0u64; k + 1];
            for s in &shares {
                counts[seats_won(&uniform_swing(s, delta)).seats] += 1;
            }
            let swung_ref = uniform_swing(&ref_shares, delta);
            SwingRow {
                target,
                delta,
                realised: statewide_from_shares(&swung_ref, &ref_turnout),
                counts,
                reference_seats: seats_won(&swung_ref).seats,
            }
        })
        .collect())
}

/// Over all (plan, grid point) pairs with target in `[lo, hi]`, the fraction
/// where the plan wins no more seats than the reference.
pub fn swing_window_fraction(rows: &[SwingRow], lo: f64, hi: f64) -> f64 {
    let eps = 1e-9;
    let (mut hits, mut total) = (0u64, 0u64);
    for row in rows.iter().filter(|r| r.target >= lo - eps && r.target <= hi + eps) {
        for (s, &c) in row.counts.iter().enumerate() {
            total += c;
            if s <= row.reference_seats {
                hits += c;
            }
        }
    }
    hits as f64 / total as f64
}

/// Quantile levels reported per rank.
pub const QUANTILE_LEVELS: [f64; 7] = [0.025, 0.10, 0.25, 0.50, 0.75, 0.90, 0.975];

/// Linear interpolation between order statistics of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = crate::math::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Each plan's shares sorted ascending.
pub fn ranked_shares(record: &EnsembleRecord, election: usize) -> Result<Vec<f64>, AnalysisError> {
    let mut s = defined_shares(record, election)?;
    s.sort_by(f64::total_cmp);
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankQuantiles {
    pub rank: usize,
    pub quantiles: [f64; 7],
}

pub fn rank_ordered_marginals(ensemble: &[EnsembleRecord], election: usize) -> Result<Vec<RankQuantiles>, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let k = ensemble[0].num_districts();
    let mut by_rank = vec![Vec::with_capacity(ensemble.len()); k];
    for r in ensemble {
        for (i, s) in ranked_shares(r, election)?.into_iter().enumerate() {
            by_rank[i].push(s);
        }
    }
    Ok(by_rank
        .into_iter()
        .enumerate()
        .map(|(i, mut v)| {
            v.sort_by(f64::total_cmp);
            RankQuantiles { rank: i + 1, quantiles: QUANTILE_LEVELS.map(|q| quantile_sorted(&v, q)) }
        })
        .collect())
}

/// Democratic votes summed over 1-based share ranks.
fn ranked_dem_sum(record: &EnsembleRecord, election: usize, ranks: &RangeInclusive<usize>) -> Result<f64, AnalysisError> {
    let shares = defined_shares(record, election)?;
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[a].total_cmp(&shares[b]).then(a.cmp(&b)));
    Ok(order[ranks.start() - 1..*ranks.end()].iter().map(|&d| record.votes[election][d].dem).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationStats {
    /// Plans with no more Democratic votes than the reference over the low ranks.
    pub low_count: u64,
    /// Plans with at least as many over the high ranks.
    pub high_count: u64,
    pub plans: u64,
}

impl PolarizationStats {
    pub fn low_fraction(&self) -> f64 {
        self.low_count as f64 / self.plans as f64
    }

    pub fn high_fraction(&self) -> f64 {
        self.high_count as f64 / self.plans as f64
    }
}

pub fn polarization_stats(
    ensemble: &[EnsembleRecord],
    election: usize,
    reference: &EnsembleRecord,
    low: RangeInclusive<usize>,
    high: RangeInclusive<usize>,
) -> Result<PolarizationStats, AnalysisError> {
    let k = reference.num_districts();
    for r in [&low, &high] {
        if *r.start() == 0 || *r.end() > k || r.start() > r.end() {
            return Err(AnalysisError::RankRange(r.clone(), k));
        }
    }
    let ref_low = ranked_dem_sum(reference, election, &low)?;
    let ref_high = ranked_dem_sum(reference, election, &high)?;
    let mut stats = PolarizationStats { low_count: 0, high_count: 0, plans: ensemble.len() as u64 };
    for r in ensemble {
        if ranked_dem_sum(r, election, &low)? <= ref_low {
            stats.low_count += 1;
        }
        if ranked_dem_sum(r, election, &high)? >= ref_high {
            stats.high_count += 1;
        }
    }
    Ok(stats)
}

/// Which districts of a plan a frequency map or tail comparison looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Selector {
    /// The `k` most Democratic districts.
    TopDemocratic(usize),
    /// The `k` most Republican districts.
    MostRepublican(usize),
}

impl Selector {
    /// Selected districts, most extreme first.
    pub fn districts(&self, shares: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| shares[a].total_cmp(&shares[b]).then(a.cmp(&b)));
        match *self {
            Selector::TopDemocratic(k) => order.into_iter().rev().take(k).collect(),
            Selector::MostRepublican(k) => order.into_iter().take(k).collect(),
        }
    }
}

/// Per-unit counts of (plan, election) pairs in which the unit lies in a
/// selected district. Accumulators merge by addition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub hits: Vec<u64>,
    pub pairs: u64,
}

impl FrequencyMap {
    pub fn new(units: usize) -> Self {
        FrequencyMap { hits: vec![0; units], pairs: 0 }
    }

    pub fn add(&mut self, record: &EnsembleRecord, elections: &[usize], selector: Selector) -> Result<(), AnalysisError> {
        let assignment = record.assignment.as_ref().ok_or(AnalysisError::MissingAssignment(record.plan_id))?;
        for &e in elections {
            let mut selected = vec![false; record.num_districts()];
            for d in selector.districts(&defined_shares(record, e)?) {
                selected[d] = true;
            }
            for (h, &d) in self.hits.iter_mut().zip(assignment) {
                if selected[d as usize] {
                    *h += 1;
                }
            }
            self.pairs += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &FrequencyMap) {
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self.pairs += other.pairs;
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.hits.iter().map(|&h| h as f64 / self.pairs as f64).collect()
    }
}

pub fn district_frequency_map(
    ensemble: &[EnsembleRecord],
    units: usize,
    elections: &[usize],
    selector: Selector,
) -> Result<FrequencyMap, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let mut map = FrequencyMap::new(units);
    for r in ensemble {
        map.add(r, elections, selector)?;
    }
    Ok(map)
}

/// For each selected position (most extreme first), the fraction of plans
/// whose district at that position has a Democratic share at or below the
/// reference's. Values near 1 for `TopDemocratic` mean the reference packs
/// Democrats; values near 1 for `MostRepublican` mean its most Republican
/// districts hold fewer Republicans than the ensemble's.
pub fn tail_share_comparison(
    ensemble: &[EnsembleRecord],
    election: usize,
    reference: &EnsembleRecord,
    selector: Selector,
) -> Result<Vec<f64>, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let pick = |r: &EnsembleRecord| -> Result<Vec<f64>, AnalysisError> {
        let s = defined_shares(r, election)?;
        Ok(selector.districts(&s).into_iter().map(|d| s[d]).collect())
    };
    let reference = pick(reference)?;
    let mut below = vec![0u64; reference.len()];
    for r in ensemble {
        for (i, s) in pick(r)?.into_iter().enumerate() {
            if s <= reference[i] {
                below[i] += 1;
            }
        }
    }
    Ok(below.into_iter().map(|b| b as f64 / ensemble.len() as f64).collect())
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Largest pairwise KS distance per rank.
    pub per_rank: Vec<f64>,
    pub threshold: f64,
    pub passes: bool,
}

pub fn convergence_compare(
    streams: &[&[EnsembleRecord]],
    election: usize,
    threshold: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    if streams.is_empty() || streams.iter().any(|s| s.is_empty()) {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let k = streams[0][0].num_districts();
    let mut columns: Vec<Vec<Vec<f64>>> = Vec::new();
    for s in streams {
        let mut by_rank = vec![Vec::with_capacity(s.len()); k];
        for r in s.iter() {
            for (i, v) in ranked_shares(r, election)?.into_iter().enumerate() {
                by_rank[i].push(v);
            }
        }
        columns.push(by_rank);
    }
    let mut per_rank = vec![0.0f64; k];
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            for (r, d) in per_rank.iter_mut().enumerate() {
                *d = d.max(ks_statistic(&columns[a][r], &columns[b][r]));
            }
        }
    }
    let passes = per_rank.iter().all(|&d| d < threshold);
    Ok(ConvergenceReport { per_rank, threshold, passes })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: u64, votes: &[(f64, f64)]) -> EnsembleRecord {
        let k = votes.len();
        EnsembleRecord {
            plan_id: id,
            district_pop: vec![1.0; k],
            votes: vec![votes.iter().map(|&(d, r)| Votes::new(d, r)).collect()],
            total_iso: 0.0,
            splits: 0,
            bvap: vec![0.0; k],
            tvap: vec![1.0; k],
            pp: vec![0.0; k],
            assignment: None,
        }
    }

    #[test]
    fn shares_and_seats() {
        let r = record(0, &[(60.0, 40.0), (0.0, 100.0), (0.0, 0.0)]);
        assert_eq!(district_shares(&r, 0), vec![Some(0.6), Some(0.0), None]);
        assert!(record_seats(&r, 0).is_err());
        assert_eq!(seats_won(&[0.4, 0.6, 0.55]).seats, 2);
        assert_eq!(seats_won(&[0.1, 0.49]).seats, 0);
        assert_eq!(seats_won(&[0.5]), SeatCount { seats: 0, ties: 1 });
    }

    #[test]
    fn swing_examples() {
        assert_eq!(uniform_swing(&[0.3, 0.7], 0.0), vec![0.3, 0.7]);
        let s = uniform_swing(&[0.45, 0.55], 0.06);
        assert!((s[0] - 0.51).abs() < 1e-12 && (s[1] - 0.61).abs() < 1e-12);
        assert_eq!(seats_won(&[0.45, 0.55]).seats, 1);
        assert_eq!(seats_won(&s).seats, 2);
        assert_eq!(uniform_swing(&[0.98], 0.05), vec![1.0]);
        assert_eq!(default_swing_grid().len(), 41);
    }

    #[test]
    fn rank_quantile_example() {
        let e = [record(0, &[(40.0, 60.0), (60.0, 40.0)]), record(1, &[(20.0, 80.0), (80.0, 20.0)])];
        let m = rank_ordered_marginals(&e, 0).unwrap();
        assert!((m[0].quantiles[3] - 0.3).abs() < 1e-12);
        assert!((m[1].quantiles[3] - 0.7).abs() < 1e-12);
        assert!((quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-12);
    }
}
