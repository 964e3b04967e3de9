//! JSON-lines ensemble files: one emitted plan per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use recom_core::analysis::EnsembleRecord;
use recom_core::tempering::{Reservoir, ReservoirRecord};
use recom_core::measures::score_breakdown;
use recom_core::{ChainState, MeasureFamily, MeasureParams, Plan, RegionGraph, ScoreBreakdown, Votes};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Run-length encoding of an assignment in unit order: `(district, run)`.
pub fn rle_encode(assignment: &[u32]) -> Vec<(u32, u32)> {
    let mut runs: Vec<(u32, u32)> = Vec::new();
    for &d in assignment {
        match runs.last_mut() {
            Some((last, n)) if *last == d => *n += 1,
            _ => runs.push((d, 1)),
        }
    }
    runs
}

pub fn rle_decode(runs: &[(u32, u32)]) -> Vec<u32> {
    runs.iter().flat_map(|&(d, n)| std::iter::repeat(d).take(n as usize)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLine {
    pub plan_id: u64,
    pub step: u64,
    pub gamma: f64,
    pub assignment: Vec<(u32, u32)>,
    pub j: f64,
    pub splits: usize,
    pub district_pop: Vec<f64>,
    /// Per election, `(dem, rep)` per district.
    pub votes: BTreeMap<String, Vec<(f64, f64)>>,
    pub bvap: Vec<f64>,
    pub tvap: Vec<f64>,
    pub pp: Vec<f64>,
}

impl EnsembleLine {
    pub fn from_state(g: &RegionGraph, state: &ChainState, plan_id: u64, gamma: f64) -> Self {
        Self::from_plan(g, &state.plan, &state.cached, plan_id, state.step, gamma)
    }

    pub fn from_plan(g: &RegionGraph, plan: &Plan, score: &ScoreBreakdown, plan_id: u64, step: u64, gamma: f64) -> Self {
        let rec = EnsembleRecord::from_plan(g, plan, plan_id, score, false);
        EnsembleLine {
            plan_id,
            step,
            gamma,
            assignment: rle_encode(plan.assignment()),
            j: rec.total_iso,
            splits: rec.splits,
            district_pop: rec.district_pop,
            votes: g
                .elections()
                .iter()
                .zip(&rec.votes)
                .map(|(e, v)| (e.clone(), v.iter().map(|x| (x.dem, x.rep)).collect()))
                .collect(),
            bvap: rec.bvap,
            tvap: rec.tvap,
            pp: rec.pp,
        }
    }

    pub fn plan(&self, districts: usize) -> Result<Plan, CliError> {
        Ok(Plan::new(rle_decode(&self.assignment), districts)?)
    }

    /// Record with election columns in `elections` order.
    pub fn to_record(&self, elections: &[String], keep_assignment: bool) -> Result<EnsembleRecord, CliError> {
        let votes = elections
            .iter()
            .map(|e| {
                self.votes
                    .get(e)
                    .map(|v| v.iter().map(|&(d, r)| Votes::new(d, r)).collect())
                    .ok_or_else(|| CliError::Validation(format!("plan {}: unknown election {e}", self.plan_id)))
            })
            .collect::<Result<_, _>>()?;
        Ok(EnsembleRecord {
            plan_id: self.plan_id,
            district_pop: self.district_pop.clone(),
            votes,
            total_iso: self.j,
            splits: self.splits,
            bvap: self.bvap.clone(),
            tvap: self.tvap.clone(),
            pp: self.pp.clone(),
            assignment: keep_assignment.then(|| rle_decode(&self.assignment)),
        })
    }
}

/// Appending writer; every line is flushed with [`EnsembleWriter::flush`].
pub struct EnsembleWriter {
    path: PathBuf,
    out: BufWriter<File>,
    written: u64,
}

impl EnsembleWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(EnsembleWriter { path: path.to_path_buf(), out: BufWriter::new(f), written: 0 })
    }

    /// Opens an existing file keeping only its first `keep` lines.
    pub fn resume(path: &Path, keep: u64) -> Result<Self, CliError> {
        let offset = line_offset(path, keep)?;
        let f = OpenOptions::new().write(true).open(path).map_err(|e| CliError::io(path, e))?;
        f.set_len(offset).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(f);
        std::io::Seek::seek(out.get_mut(), std::io::SeekFrom::End(0)).map_err(|e| CliError::io(path, e))?;
        Ok(EnsembleWriter { path: path.to_path_buf(), out, written: keep })
    }

    pub fn write(&mut self, line: &EnsembleLine) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.out, line).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.out.write_all(b"\n").map_err(|e| CliError::io(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Byte offset just past line `keep`.
fn line_offset(path: &Path, keep: u64) -> Result<u64, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut offset = 0u64;
    let mut buf = Vec::new();
    for i in 0..keep {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 || buf.last() != Some(&b'\n') {
            return Err(CliError::invalid(path, format!("checkpoint expects {keep} lines, file has {i}")));
        }
        offset += n as u64;
    }
    Ok(offset)
}

/// Calls `f` on every line of an ensemble file.
pub fn for_each_line<F>(path: &Path, mut f: F) -> Result<u64, CliError>
where
    F: FnMut(EnsembleLine) -> Result<(), CliError>,
{
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut count = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EnsembleLine =
            serde_json::from_str(&line).map_err(|e| CliError::invalid(path, format!("line {}: {e}", i + 1)))?;
        f(parsed)?;
        count += 1;
    }
    Ok(count)
}

pub fn read_ensemble(path: &Path) -> Result<Vec<EnsembleLine>, CliError> {
    let mut out = Vec::new();
    for_each_line(path, |l| {
        out.push(l);
        Ok(())
    })?;
    Ok(out)
}

/// Loads a reservoir from an ensemble file, rescoring every plan (and
/// checking feasibility) under `p`.
pub fn load_reservoir(path: &Path, g: &RegionGraph, p: &MeasureParams) -> Result<Reservoir, CliError> {
    let mut records = Vec::new();
    for_each_line(path, |line| {
        let plan = line.plan(p.districts)?;
        g.validate_plan(&plan)?;
        let score = score_breakdown(g, &plan, p, p.family == MeasureFamily::Interpolated)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if !score.constraint_ok {
            return Err(CliError::invalid(path, format!("plan {} violates the constraints", line.plan_id)));
        }
        records.push(ReservoirRecord { plan, score });
        Ok(())
    })?;
    if records.is_empty() {
        return Err(CliError::invalid(path, "reservoir is empty"));
    }
    Ok(Reservoir { records })
}
