//! Restartable snapshots of single chains and whole ladders.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use recom_core::chain::RunStats;
use recom_core::tempering::SwapStats;
use recom_core::{ChainState, EdgeId, MeasureParams, Plan, RegionGraph, SpanningForest};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensemble::{rle_decode, rle_encode};
use crate::error::CliError;

/// Plan and forest of a chain state. The score is recomputed on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub step: u64,
    pub assignment: Vec<(u32, u32)>,
    pub forest: Vec<Vec<EdgeId>>,
}

impl StateSnapshot {
    pub fn of(state: &ChainState) -> Self {
        StateSnapshot {
            step: state.step,
            assignment: rle_encode(state.plan.assignment()),
            forest: state.forest.trees.clone(),
        }
    }

    pub fn restore(&self, g: &RegionGraph, p: &MeasureParams) -> Result<ChainState, CliError> {
        let plan = Plan::new(rle_decode(&self.assignment), p.districts)?;
        let forest = SpanningForest { trees: self.forest.clone() };
        let mut state = ChainState::new(g, plan, forest, p)?;
        state.step = self.step;
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint {
    pub config_hash: String,
    /// Lines of the ensemble file written so far.
    pub emitted: u64,
    pub rng: ChaCha8Rng,
    pub state: StateSnapshot,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaCheckpoint {
    pub rng: ChaCha8Rng,
    pub state: StateSnapshot,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCheckpoint {
    pub config_hash: String,
    pub emitted: u64,
    pub round: u64,
    pub coordinator: ChaCha8Rng,
    pub replicas: Vec<ReplicaCheckpoint>,
    pub swaps: SwapStats,
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::invalid(path, e))
}

pub fn check_hash(path: &Path, found: &str, expected: &str) -> Result<(), CliError> {
    if found != expected {
        return Err(CliError::invalid(
            path,
            format!("checkpoint belongs to config {found}, current config is {expected}"),
        ));
    }
    Ok(())
}
