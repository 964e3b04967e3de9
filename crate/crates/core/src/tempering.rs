//! Replica exchange over the tempering parameter, with the bottom rung
//! served either by a reservoir of pre-sampled `gamma = 0` states (heat
//! bath) or by a live chain.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{mh_step, ChainError, ChainState, RunStats};
use crate::forest::SpanningForest;
use crate::graph::{Plan, RegionGraph};
use crate::math::{accept_prob, exp};
use crate::measures::{forest_energy, MeasureParams, ScoreBreakdown};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemperingError {
    #[error("gamma grid must be strictly increasing within [0, 1]")]
    Grid,
    #[error("heat-bath ladders need gammas[0] = 0")]
    BaseGamma,
    #[error("ladder has {found} replicas, grid needs {expected}")]
    ReplicaCount { found: usize, expected: usize },
    #[error("reservoir is empty")]
    EmptyReservoir,
    #[error("swap interval must be positive")]
    SwapInterval,
    #[error("need at least 2 samples and 0 < target < 1")]
    SpacingInput,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// `(gamma_i - gamma_j) * w * (J_i - J_j)`: log acceptance ratio for swapping
/// the states held at `gamma_i` and `gamma_j`. Tree counts cancel.
pub fn swap_log_ratio(j_i: f64, j_j: f64, gamma_i: f64, gamma_j: f64, w: f64) -> f64 {
    (gamma_i - gamma_j) * w * (j_i - j_j)
}

/// Same ratio in terms of the family energy `E`.
pub fn swap_log_ratio_energy(e_i: f64, e_j: f64, gamma_i: f64, gamma_j: f64) -> f64 {
    (gamma_i - gamma_j) * (e_i - e_j)
}

/// A pooled `gamma = 0` plan. Forests are not stored: given the plan, the
/// `gamma = 0` forest is uniform, so one is drawn afresh when a record is
/// adopted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirRecord {
    pub plan: Plan,
    pub score: ScoreBreakdown,
}

impl From<&ChainState> for ReservoirRecord {
    fn from(s: &ChainState) -> Self {
        ReservoirRecord { plan: s.plan.clone(), score: s.cached.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub records: Vec<ReservoirRecord>,
}

impl Reservoir {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&ReservoirRecord, TemperingError> {
        if self.records.is_empty() {
            return Err(TemperingError::EmptyReservoir);
        }
        Ok(&self.records[rng.gen_range(0..self.records.len())])
    }
}

/// Runs independent `gamma = 0` chains and pools their subsampled states,
/// dropping the first `burn_in` fraction of each chain's steps.
pub fn reservoir_build<R: Rng>(
    g: &RegionGraph,
    p: &MeasureParams,
    chains: Vec<(ChainState, R)>,
    steps: u64,
    subsample_every: u64,
    burn_in: f64,
) -> Result<Reservoir, TemperingError> {
    let p = p.with_gamma(0.0);
    let burn = (steps as f64 * burn_in) as u64;
    let mut records = Vec::new();
    for (mut state, mut rng) in chains {
        let start = state.step;
        crate::chain::run_chain::<_, ChainError, _>(g, &mut state, steps, subsample_every, &p, &mut rng, |s| {
            if s.step - start > burn {
                records.push(ReservoirRecord::from(s));
            }
            Ok(())
        })?;
    }
    Ok(Reservoir { records })
}

/// Independence-Metropolis refresh of the lowest live replica from the
/// reservoir. The displaced state is discarded. Returns whether the replica
/// adopted the draw.
pub fn heat_bath_exchange<R: Rng + ?Sized>(
    g: &RegionGraph,
    state: &mut ChainState,
    gamma_low: f64,
    reservoir: &Reservoir,
    p: &MeasureParams,
    rng: &mut R,
) -> Result<bool, TemperingError> {
    let draw = reservoir.draw(rng)?;
    let log_ratio = swap_log_ratio_energy(state.energy(p), forest_energy(&draw.score, p), gamma_low, 0.0);
    let u: f64 = rng.gen();
    if u < accept_prob(log_ratio) {
        let forest = SpanningForest::random(g, &draw.plan, rng).map_err(ChainError::from)?;
        state.plan = draw.plan.clone();
        state.forest = forest;
        state.cached = draw.score.clone();
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapStats {
    /// Per adjacent grid pair `(k, k + 1)`.
    pub attempts: Vec<u64>,
    pub accepts: Vec<u64>,
}

impl SwapStats {
    pub fn new(pairs: usize) -> Self {
        SwapStats { attempts: alloc::vec![0; pairs], accepts: alloc::vec![0; pairs] }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.attempts
            .iter()
            .zip(&self.accepts)
            .map(|(&n, &a)| if n == 0 { f64::NAN } else { a as f64 / n as f64 })
            .collect()
    }
}

/// How the `gammas[0]` rung is realised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRung {
    /// Reservoir draws; replica `i` runs at `gammas[i + 1]`.
    #[default]
    Reservoir,
    /// A live chain; replica `i` runs at `gammas[i]`.
    Live,
}

/// A chain with its own random stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replica<R> {
    pub state: ChainState,
    pub rng: R,
}

impl<R: Rng> Replica<R> {
    /// `n` MH steps at `p`, calling `on_step` after every step.
    pub fn advance<F>(&mut self, g: &RegionGraph, p: &MeasureParams, n: u64, mut on_step: F) -> Result<RunStats, ChainError>
    where
        F: FnMut(&ChainState),
    {
        let mut stats = RunStats::default();
        for _ in 0..n {
            let r = mh_step(g, &mut self.state, p, &mut self.rng)?;
            stats.record(&r);
            on_step(&self.state);
        }
        Ok(stats)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ladder<R> {
    pub gammas: Vec<f64>,
    pub replicas: Vec<Replica<R>>,
    pub swap_interval: u64,
    /// Shared parameters; each replica overrides `gamma`.
    pub params: MeasureParams,
    pub base: BaseRung,
    /// Exchange rounds completed; its parity picks even or odd pairs.
    pub round: u64,
    pub stats: SwapStats,
}

impl<R: Rng> Ladder<R> {
    pub fn new(
        gammas: Vec<f64>,
        replicas: Vec<Replica<R>>,
        swap_interval: u64,
        params: MeasureParams,
        base: BaseRung,
    ) -> Result<Self, TemperingError> {
        if gammas.is_empty()
            || gammas.windows(2).any(|w| !(w[0] < w[1]))
            || gammas.iter().any(|g| !(0.0..=1.0).contains(g))
        {
            return Err(TemperingError::Grid);
        }
        if swap_interval == 0 {
            return Err(TemperingError::SwapInterval);
        }
        let offset = match base {
            BaseRung::Reservoir => {
                if gammas[0] != 0.0 {
                    return Err(TemperingError::BaseGamma);
                }
                1
            }
            BaseRung::Live => 0,
        };
        if replicas.len() + offset != gammas.len() {
            return Err(TemperingError::ReplicaCount { found: replicas.len(), expected: gammas.len() - offset });
        }
        let stats = SwapStats::new(gammas.len() - 1);
        Ok(Ladder { gammas, replicas, swap_interval, params, base, round: 0, stats })
    }

    fn offset(&self) -> usize {
        match self.base {
            BaseRung::Reservoir => 1,
            BaseRung::Live => 0,
        }
    }

    /// Gamma at which replica `i` runs.
    pub fn gamma_of(&self, i: usize) -> f64 {
        self.gammas[i + self.offset()]
    }

    pub fn params_of(&self, i: usize) -> MeasureParams {
        self.params.with_gamma(self.gamma_of(i))
    }

    /// One exchange round over even (`round` even) or odd grid pairs. Pair
    /// `(0, 1)` of a reservoir ladder is a heat-bath refresh.
    pub fn exchange_round<Q: Rng + ?Sized>(
        &mut self,
        g: &RegionGraph,
        reservoir: Option<&Reservoir>,
        rng: &mut Q,
    ) -> Result<(), TemperingError> {
        let parity = (self.round % 2) as usize;
        let offset = self.offset();
        let p = self.params;
        for k in (parity..self.gammas.len().saturating_sub(1)).step_by(2) {
            self.stats.attempts[k] += 1;
            let accepted = if offset == 1 && k == 0 {
                let reservoir = reservoir.ok_or(TemperingError::EmptyReservoir)?;
                heat_bath_exchange(g, &mut self.replicas[0].state, self.gammas[1], reservoir, &p, rng)?
            } else {
                let (lo, hi) = (k - offset, k + 1 - offset);
                let log_ratio = swap_log_ratio_energy(
                    self.replicas[lo].state.energy(&p),
                    self.replicas[hi].state.energy(&p),
                    self.gammas[k],
                    self.gammas[k + 1],
                );
                let u: f64 = rng.gen();
                let accept = u < accept_prob(log_ratio);
                if accept {
                    swap_states(&mut self.replicas, lo, hi);
                }
                accept
            };
            if accepted {
                self.stats.accepts[k] += 1;
            }
        }
        self.round += 1;
        Ok(())
    }

    /// Advances every replica by `n` steps in order; `sink(replica, state)`
    /// sees each state whose step counter is a multiple of `every`.
    pub fn local_round<E, F>(&mut self, g: &RegionGraph, n: u64, every: u64, sink: &mut F) -> Result<(), E>
    where
        E: From<ChainError>,
        F: FnMut(usize, &ChainState) -> Result<(), E>,
    {
        for i in 0..self.replicas.len() {
            let p = self.params_of(i);
            let mut err = None;
            self.replicas[i].advance(g, &p, n, |s| {
                if err.is_none() && every > 0 && s.step % every == 0 {
                    if let Err(e) = sink(i, s) {
                        err = Some(e);
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(())
    }
}

/// Exchanges the plan, forest and score of two replicas; step counters and
/// random streams stay with the replica.
pub fn swap_states<R>(replicas: &mut [Replica<R>], i: usize, j: usize) {
    let (si, sj) = (replicas[i].state.step, replicas[j].state.step);
    let (a, b) = if i < j { replicas.split_at_mut(j) } else { replicas.split_at_mut(i) };
    core::mem::swap(&mut a[i.min(j)].state, &mut b[0].state);
    replicas[i].state.step = si;
    replicas[j].state.step = sj;
}

/// Runs `steps` local steps per replica, exchanging every `swap_interval`.
/// `sink(replica, state)` receives every replica's subsampled states; the
/// top rung is replica `replicas.len() - 1`.
pub fn run_ladder<R, Q, E, F>(
    g: &RegionGraph,
    ladder: &mut Ladder<R>,
    reservoir: Option<&Reservoir>,
    steps: u64,
    subsample_every: u64,
    coordinator: &mut Q,
    mut sink: F,
) -> Result<(), E>
where
    R: Rng,
    Q: Rng + ?Sized,
    E: From<ChainError> + From<TemperingError>,
    F: FnMut(usize, &ChainState) -> Result<(), E>,
{
    let mut done = 0;
    while done < steps {
        let n = ladder.swap_interval.min(steps - done);
        ladder.local_round(g, n, subsample_every, &mut sink)?;
        done += n;
        if n == ladder.swap_interval {
            ladder.exchange_round(g, reservoir, coordinator)?;
        }
    }
    Ok(())
}

/// Result of [`estimate_gamma_spacing`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GammaSpacing {
    Bounded(f64),
    /// The swap rate never drops below the target.
    Unbounded,
}

/// Mean of `min(1, exp(dg * w * (J_a - J_b)))` over ordered pairs `a != b`.
pub fn expected_swap_rate(samples: &[f64], w: f64, dg: f64) -> f64 {
    let n = samples.len();
    let mut total = 0.0;
    for (a, &ja) in samples.iter().enumerate() {
        for (b, &jb) in samples.iter().enumerate() {
            if a != b {
                total += accept_prob(dg * w * (ja - jb));
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Largest gamma step keeping the mean pairwise swap acceptance at or above
/// `target`, by bisection to relative precision 1e-3. Samples beyond 1000
/// are thinned evenly.
pub fn estimate_gamma_spacing(samples: &[f64], w: f64, target: f64) -> Result<GammaSpacing, TemperingError> {
    const MAX_SAMPLES: usize = 1000;
    if samples.len() < 2 || !(target > 0.0 && target < 1.0) {
        return Err(TemperingError::SpacingInput);
    }
    let thinned: Vec<f64> = if samples.len() > MAX_SAMPLES {
        (0..MAX_SAMPLES).map(|i| samples[i * samples.len() / MAX_SAMPLES]).collect()
    } else {
        samples.to_vec()
    };
    let s = &thinned;
    let n = s.len();
    // As the step grows, only pairs with J_a >= J_b keep accepting.
    let limit = s.iter().map(|&a| s.iter().filter(|&&b| a >= b).count() - 1).sum::<usize>() as f64
        / (n * (n - 1)) as f64;
    if limit >= target || w == 0.0 {
        return Ok(GammaSpacing::Unbounded);
    }
    let rate = |dg: f64| expected_swap_rate(s, w, dg);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while rate(hi) >= target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if rate(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GammaSpacing::Bounded(lo))
}

/// Closed-form swap rate for `n` samples at each of two values `J` and
/// `J + gap`, used to cross-check [`expected_swap_rate`].
pub fn two_point_swap_rate(n: usize, gap: f64, w: f64, dg: f64) -> f64 {
    let n = n as f64;
    let same = 2.0 * n * (n - 1.0);
    (same + n * n + n * n * exp(-dg * w * gap)) / (same + 2.0 * n * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_ratio_examples() {
        assert_eq!(swap_log_ratio(120.0, 80.0, 0.4, 0.4, 0.04), 0.0);
        assert!((swap_log_ratio(150.0, 100.0, 0.6, 0.5, 0.04) - 0.2).abs() < 1e-12);
        let r = swap_log_ratio(100.0, 150.0, 0.6, 0.5, 0.04);
        assert!((r + 0.2).abs() < 1e-12);
        assert!((accept_prob(r) - 0.818_730_753).abs() < 1e-9);
    }

    #[test]
    fn spacing_unbounded_cases() {
        assert_eq!(estimate_gamma_spacing(&[5.0; 10], 0.04, 0.5).unwrap(), GammaSpacing::Unbounded);
        let mut two = alloc::vec![100.0; 20];
        two.extend([200.0; 20]);
        assert_eq!(estimate_gamma_spacing(&two, 0.04, 0.5).unwrap(), GammaSpacing::Unbounded);
        assert!(estimate_gamma_spacing(&[1.0], 0.04, 0.5).is_err());
    }

    #[test]
    fn spacing_two_point() {
        let n = 20;
        let mut two = alloc::vec![100.0; n];
        two.extend(alloc::vec![200.0; n]);
        for dg in [0.0, 0.05, 0.3] {
            assert!((expected_swap_rate(&two, 0.04, dg) - two_point_swap_rate(n, 100.0, 0.04, dg)).abs() < 1e-12);
        }
        let GammaSpacing::Bounded(dg) = estimate_gamma_spacing(&two, 0.04, 0.75).unwrap() else { panic!() };
        assert!((two_point_swap_rate(n, 100.0, 0.04, dg) - 0.75).abs() < 2e-3);
        // Larger targets need smaller steps.
        let GammaSpacing::Bounded(tight) = estimate_gamma_spacing(&two, 0.04, 0.9).unwrap() else { panic!() };
        assert!(tight < dg);
    }
}
