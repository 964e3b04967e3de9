//! Closed-form screen for districts where Black voters can elect their
//! preferred candidate in both the primary and the general election.
//!
//! With `B = B_VAP (D + R) / T_VAP` the estimated Black turnout:
//!
//! * primary, assuming bloc voting against the preferred candidate: `2B > D`;
//! * general, with crossover coefficient `c`: `B + c(D - B) > R + (1 - c)(D - B)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, ElectionSet, EnsembleRecord};
use crate::graph::Votes;
use crate::math::mean_std;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VraModel {
    pub c: f64,
    pub required_districts: usize,
    pub min_passing_elections: usize,
    /// Minimum Black share of the voting-age population, if any.
    pub bvap_floor: Option<f64>,
}

impl Default for VraModel {
    fn default() -> Self {
        VraModel { c: 1.0, required_districts: 4, min_passing_elections: 14, bvap_floor: None }
    }
}

/// `B_VAP (D + R) / T_VAP`.
pub fn black_turnout(votes: Votes, bvap: f64, tvap: f64) -> f64 {
    bvap * votes.total() / tvap
}

pub fn primary_condition(black_turnout: f64, dem: f64) -> bool {
    2.0 * black_turnout > dem
}

/// Evaluated as `(D - R) - 2 (1 - c)(D - B) > 0`, which is exact at `c = 1`.
pub fn general_condition(black_turnout: f64, dem: f64, rep: f64, c: f64) -> bool {
    (dem - rep) - 2.0 * (1.0 - c) * (dem - black_turnout) > 0.0
}

pub fn vra_district_passes(votes: Votes, bvap: f64, tvap: f64, c: f64) -> bool {
    let b = black_turnout(votes, bvap, tvap);
    primary_condition(b, votes.dem) && general_condition(b, votes.dem, votes.rep, c)
}

/// Whether a plan has `required_districts` districts that each pass in at
/// least `min_passing_elections` elections and in every Black-candidate
/// election (and clear the BVAP floor, if set).
pub fn plan_passes(record: &EnsembleRecord, elections: &ElectionSet, model: &VraModel) -> Result<bool, AnalysisError> {
    if record.tvap.iter().any(|&t| !(t > 0.0)) {
        return Err(AnalysisError::MissingVap);
    }
    let ne = elections.names.len();
    let qualifying = (0..record.num_districts())
        .filter(|&d| {
            if let Some(floor) = model.bvap_floor {
                if record.bvap[d] / record.tvap[d] < floor {
                    return false;
                }
            }
            let mut passed = 0;
            for e in 0..ne {
                let ok = vra_district_passes(record.votes[e][d], record.bvap[d], record.tvap[d], model.c);
                if ok {
                    passed += 1;
                } else if elections.is_black_candidate(e) {
                    return false;
                }
            }
            passed >= model.min_passing_elections
        })
        .count();
    Ok(qualifying >= model.required_districts)
}

/// Ids of the plans that pass [`plan_passes`].
pub fn vra_screen(ensemble: &[EnsembleRecord], elections: &ElectionSet, model: &VraModel) -> Result<Vec<u64>, AnalysisError> {
    let mut out = Vec::new();
    for r in ensemble {
        if plan_passes(r, elections, model)? {
            out.push(r.plan_id);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CEstimate {
    pub mean: f64,
    /// Sample standard deviation over pairs.
    pub std: f64,
    pub pairs: usize,
    /// Pairs dropped for a vanishing denominator.
    pub skipped: usize,
}

/// Estimates the crossover coefficient from every (Black-candidate,
/// other) election pair, with votes and VAP summed over `scope`.
///
/// For a pair, the other election's Democratic share is carried over to the
/// Black-candidate election's two-party turnout to give `D'`, and
/// `c = (D_b - B_b) / (D' - B_b)`.
pub fn vra_estimate_c(
    votes: &[Vec<Votes>],
    bvap: &[f64],
    tvap: &[f64],
    elections: &ElectionSet,
    scope: &[usize],
) -> Result<CEstimate, AnalysisError> {
    let black: Vec<usize> = (0..elections.names.len()).filter(|&e| elections.is_black_candidate(e)).collect();
    let other: Vec<usize> = (0..elections.names.len()).filter(|&e| !elections.is_black_candidate(e)).collect();
    if black.is_empty() || other.is_empty() {
        return Err(AnalysisError::TooFewElections(2));
    }
    let total = |e: usize| {
        scope.iter().fold(Votes::default(), |mut acc, &u| {
            acc += votes[e][u];
            acc
        })
    };
    let b_vap: f64 = scope.iter().map(|&u| bvap[u]).sum();
    let t_vap: f64 = scope.iter().map(|&u| tvap[u]).sum();
    if !(t_vap > 0.0) {
        return Err(AnalysisError::MissingVap);
    }
    let mut cs = Vec::new();
    let mut skipped = 0;
    for &b in &black {
        let vb = total(b);
        let turnout_b = black_turnout(vb, b_vap, t_vap);
        for &nb in &other {
            let vnb = total(nb);
            let d_prime = vnb.dem / vnb.total() * vb.total();
            let denom = d_prime - turnout_b;
            if !(denom.abs() > 1e-9 * vb.total()) {
                skipped += 1;
                continue;
            }
            cs.push((vb.dem - turnout_b) / denom);
        }
    }
    let (mean, std) = mean_std(&cs);
    Ok(CEstimate { mean, std, pairs: cs.len(), skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn c_one_reduces_to_majority() {
        assert!(general_condition(30.0, 60.0, 40.0, 1.0));
        assert!(!general_condition(30.0, 40.0, 60.0, 1.0));
    }

    #[test]
    fn c_identities() {
        let set = ElectionSet { names: vec!["B".to_string(), "N".to_string()], black_candidate: vec!["B".to_string()] };
        // Equal shares, no Black VAP: c = 1.
        let votes = vec![vec![Votes::new(60.0, 40.0)], vec![Votes::new(30.0, 20.0)]];
        let est = vra_estimate_c(&votes, &[0.0], &[100.0], &set, &[0]).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12);
        // All Democratic votes Black: B = D_b, so c = 0 whenever D' > B.
        let votes = vec![vec![Votes::new(50.0, 50.0)], vec![Votes::new(70.0, 30.0)]];
        let est = vra_estimate_c(&votes, &[50.0], &[100.0], &set, &[0]).unwrap();
        assert_eq!(est.mean, 0.0);
    }
}
