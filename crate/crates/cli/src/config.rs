//! Run configuration (TOML), its defaults, and the provenance hash.

use std::path::{Path, PathBuf};

use recom_core::analysis::{default_swing_grid, VraModel};
use recom_core::merge::MergeOptions;
use recom_core::tempering::BaseRung;
use recom_core::{MeasureFamily, MeasureParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// The 17 statewide elections, 2016 to 2020.
pub const GEORGIA_ELECTIONS: [&str; 17] = [
    "20PR", "20USS", "20PSC1", "20PSC4", "18GOV", "18LTG", "18ATG", "18LAB", "18AGR", "18PSC3", "18PSC5", "18SOS",
    "18SOSro", "18INS", "18SPI", "16USS", "16PR",
];

/// `levels` evenly spaced values from 0 to 1.
pub fn gamma_grid(levels: usize) -> Vec<f64> {
    match levels {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..levels).map(|i| i as f64 / (levels - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    pub chains: usize,
    pub steps: u64,
    pub subsample_every: u64,
    /// Fraction of each chain's steps dropped before collecting.
    pub burn_in: f64,
    /// Existing reservoir file; defaults to `<out>/reservoir.jsonl`.
    pub path: Option<PathBuf>,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        ReservoirConfig { chains: 4, steps: 10_000_000, subsample_every: 25, burn_in: 0.0, path: None }
    }
}

/// Units over which the crossover coefficient is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CScope {
    Statewide,
    /// Districts of the reference plan, by 0-based index.
    ReferenceDistricts(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub swing_elections: Vec<String>,
    pub swing_targets: Vec<f64>,
    pub swing_window: (f64, f64),
    /// Elections dropped one at a time for the responsiveness comparison.
    pub responsiveness_drop: Vec<String>,
    pub polarization_low: (usize, usize),
    pub polarization_high: (usize, usize),
    pub top_democratic: usize,
    pub most_republican: usize,
    pub frequency_maps: bool,
    /// Ensemble pieces compared for convergence.
    pub convergence_chunks: usize,
    pub convergence_threshold: f64,
    pub vra: VraModel,
    pub vra_floor_variant: Option<f64>,
    pub vra_c_scope: CScope,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            swing_elections: ["16PR", "16USS", "18GOV", "18LTG", "20PR", "20USS"].map(String::from).to_vec(),
            swing_targets: default_swing_grid(),
            swing_window: (0.54, 0.60),
            responsiveness_drop: vec!["16USS".into()],
            polarization_low: (5, 9),
            polarization_high: (10, 12),
            top_democratic: 3,
            most_republican: 1,
            frequency_maps: true,
            convergence_chunks: 2,
            convergence_threshold: 0.05,
            vra: VraModel::default(),
            vra_floor_variant: Some(0.45),
            vra_c_scope: CScope::Statewide,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: PathBuf,
    pub districts: usize,
    pub pop_tolerance: f64,
    pub max_county_splits: usize,
    pub w: f64,
    pub gammas: Vec<f64>,
    pub family: MeasureFamily,
    pub base: BaseRung,
    /// Steps per chain (per replica for tempering).
    pub steps: u64,
    pub subsample_every: u64,
    pub swap_interval: u64,
    /// Steps between checkpoints.
    pub checkpoint_every: u64,
    /// Master seed; every chain, replica and the coordinator get their own
    /// stream of it.
    pub seed: u64,
    pub initial_plan: Option<PathBuf>,
    pub initial_attempts: usize,
    /// Gamma of a plain `sample` run; defaults to the top of the grid.
    pub sample_gamma: Option<f64>,
    pub reservoir: ReservoirConfig,
    pub elections: Vec<String>,
    pub black_candidate: Vec<String>,
    pub reference_plan: Option<PathBuf>,
    pub out: PathBuf,
    pub merge: MergeOptions,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MeasureParams::congressional();
        RunConfig {
            graph: PathBuf::from("graph.json"),
            districts: m.districts,
            pop_tolerance: m.pop_tolerance,
            max_county_splits: m.max_county_splits,
            w: m.w,
            gammas: gamma_grid(11),
            family: MeasureFamily::Concession,
            base: BaseRung::Reservoir,
            steps: 10_000_000,
            subsample_every: 25,
            swap_interval: 50,
            checkpoint_every: 100_000,
            seed: 0,
            initial_plan: None,
            initial_attempts: 10_000,
            sample_gamma: None,
            reservoir: ReservoirConfig::default(),
            elections: GEORGIA_ELECTIONS.map(String::from).to_vec(),
            black_candidate: ["18GOV", "18INS", "20USS"].map(String::from).to_vec(),
            reference_plan: None,
            out: PathBuf::from("out"),
            merge: MergeOptions::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::invalid(path, e))?;
        // Relative paths in a config file are relative to the file.
        if let Some(dir) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut cfg.graph);
            fix(&mut cfg.out);
            cfg.initial_plan.as_mut().map(fix);
            cfg.reference_plan.as_mut().map(fix);
            cfg.reservoir.path.as_mut().map(fix);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self, gamma: f64) -> MeasureParams {
        MeasureParams {
            gamma,
            w: self.w,
            pop_tolerance: self.pop_tolerance,
            max_county_splits: self.max_county_splits,
            districts: self.districts,
            family: self.family,
        }
    }

    pub fn sample_gamma(&self) -> f64 {
        self.sample_gamma.or_else(|| self.gammas.last().copied()).unwrap_or(1.0)
    }

    pub fn reservoir_path(&self) -> PathBuf {
        self.reservoir.path.clone().unwrap_or_else(|| self.out.join("reservoir.jsonl"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.districts < 1 {
            return bad("districts must be at least 1".into());
        }
        if let Err(e) = self.params(self.sample_gamma()).validate() {
            return bad(e.to_string());
        }
        if self.gammas.is_empty()
            || self.gammas.windows(2).any(|w| !(w[0] < w[1]))
            || self.gammas.iter().any(|g| !(0.0..=1.0).contains(g))
        {
            return bad("gammas must be strictly increasing within [0, 1]".into());
        }
        if self.base == BaseRung::Reservoir && self.gammas[0] != 0.0 {
            return bad("a reservoir base needs gammas[0] = 0".into());
        }
        if self.subsample_every == 0 || self.swap_interval == 0 || self.checkpoint_every == 0 {
            return bad("subsample_every, swap_interval and checkpoint_every must be positive".into());
        }
        if self.reservoir.chains == 0 || self.reservoir.subsample_every == 0 {
            return bad("reservoir needs at least one chain and a positive subsample interval".into());
        }
        if !(0.0..1.0).contains(&self.reservoir.burn_in) {
            return bad("reservoir burn_in must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical config (output directory excluded)
    /// and the graph file bytes.
    pub fn hash(&self, graph_bytes: &[u8]) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        h.update(graph_bytes);
        hex::encode(h.finalize())
    }
}
