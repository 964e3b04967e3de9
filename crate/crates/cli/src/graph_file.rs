//! JSON graph files and two-column plan CSVs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use recom_core::{Plan, RegionGraph, Unit, Votes};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VoteEntry {
    pub d: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    pub id: String,
    pub pop: f64,
    pub area: f64,
    #[serde(default)]
    pub ext_perim: f64,
    pub county: String,
    #[serde(default)]
    pub bvap: f64,
    #[serde(default)]
    pub tvap: f64,
    #[serde(default)]
    pub votes: BTreeMap<String, VoteEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mp_component: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    /// Election order; defaults to the sorted union of the units' vote keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elections: Option<Vec<String>>,
    pub units: Vec<UnitEntry>,
    pub edges: Vec<(String, String, f64)>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<RegionGraph, CliError> {
        let elections = match self.elections {
            Some(e) => e,
            None => {
                let all: BTreeSet<&String> = self.units.iter().flat_map(|u| u.votes.keys()).collect();
                all.into_iter().cloned().collect()
            }
        };
        let mut units = Vec::with_capacity(self.units.len());
        for u in self.units {
            let mut votes = Vec::with_capacity(elections.len());
            for e in &elections {
                let v = u.votes.get(e).ok_or_else(|| {
                    CliError::Validation(format!("unit {}: no votes for election {e}", u.id))
                })?;
                votes.push(Votes::new(v.d, v.r));
            }
            if let Some(extra) = u.votes.keys().find(|k| !elections.contains(k)) {
                return Err(CliError::Validation(format!("unit {}: election {extra} not in the election list", u.id)));
            }
            units.push(Unit {
                id: u.id,
                population: u.pop,
                area: u.area,
                exterior_perimeter: u.ext_perim,
                county: u.county,
                bvap: u.bvap,
                tvap: u.tvap,
                votes,
                multipolygon: u.mp_component,
            });
        }
        Ok(RegionGraph::from_parts(elections, units, self.edges)?)
    }

    /// Canonical form: units sorted by id, edges by endpoint ids with the
    /// smaller id first.
    pub fn from_graph(g: &RegionGraph) -> Self {
        let mut units: Vec<UnitEntry> = g
            .units()
            .iter()
            .map(|u| UnitEntry {
                id: u.id.clone(),
                pop: u.population,
                area: u.area,
                ext_perim: u.exterior_perimeter,
                county: u.county.clone(),
                bvap: u.bvap,
                tvap: u.tvap,
                votes: g
                    .elections()
                    .iter()
                    .zip(&u.votes)
                    .map(|(e, v)| (e.clone(), VoteEntry { d: v.dem, r: v.rep }))
                    .collect(),
                mp_component: u.multipolygon.clone(),
            })
            .collect();
        units.sort_by(|a, b| a.id.cmp(&b.id));
        let mut edges: Vec<(String, String, f64)> = g
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (&g.unit(e.a).id, &g.unit(e.b).id);
                if a <= b {
                    (a.clone(), b.clone(), e.shared_len)
                } else {
                    (b.clone(), a.clone(), e.shared_len)
                }
            })
            .collect();
        edges.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        GraphFile { elections: Some(g.elections().to_vec()), units, edges }
    }
}

pub fn parse_graph(text: &str) -> Result<RegionGraph, CliError> {
    let file: GraphFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("graph file: {e}")))?;
    file.into_graph()
}

pub fn load_graph(path: &Path) -> Result<RegionGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_graph(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::invalid(path, m),
        other => other,
    })
}

pub fn graph_to_json(g: &RegionGraph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphFile::from_graph(g)).expect("graph serializes");
    s.push('\n');
    s
}

pub fn write_graph(path: &Path, g: &RegionGraph) -> Result<(), CliError> {
    fs::write(path, graph_to_json(g)).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
struct PlanRow {
    unit_id: String,
    district: String,
}

/// Reads `unit_id,district`. Labels are arbitrary strings; they are mapped
/// to `0..K` in sorted order (numerically when every label is an integer).
pub fn read_plan(path: &Path, g: &RegionGraph) -> Result<Plan, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::invalid(path, e))?;
    let mut labels = vec![None; g.num_units()];
    for row in reader.deserialize() {
        let row: PlanRow = row.map_err(|e| CliError::invalid(path, e))?;
        let n = g
            .unit_index(&row.unit_id)
            .ok_or_else(|| CliError::invalid(path, format!("unknown unit {}", row.unit_id)))?;
        if labels[n].replace(row.district).is_some() {
            return Err(CliError::invalid(path, format!("unit {} listed twice", row.unit_id)));
        }
    }
    let labels: Vec<String> = labels
        .into_iter()
        .enumerate()
        .map(|(n, l)| l.ok_or_else(|| CliError::invalid(path, format!("unit {} unassigned", g.unit(n).id))))
        .collect::<Result<_, _>>()?;
    let mut distinct: Vec<&String> = labels.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.iter().all(|l| l.parse::<i64>().is_ok()) {
        distinct.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    let index: BTreeMap<&String, u32> = distinct.iter().enumerate().map(|(i, l)| (*l, i as u32)).collect();
    let assignment = labels.iter().map(|l| index[l]).collect();
    let plan = Plan::new(assignment, distinct.len())?;
    g.validate_plan(&plan)?;
    Ok(plan)
}

pub fn write_plan(path: &Path, g: &RegionGraph, plan: &Plan) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::invalid(path, e))?;
    for (n, &d) in plan.assignment().iter().enumerate() {
        w.serialize(PlanRow { unit_id: g.unit(n).id.clone(), district: d.to_string() })
            .map_err(|e| CliError::invalid(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
