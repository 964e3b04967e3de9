//! Ensemble-versus-reference tables and the manifest consumed by plotting.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use recom_core::analysis::{
    collected_seat_histogram, convergence_compare, polarization_stats, quantile_sorted, rank_ordered_marginals,
    ranked_shares, record_seats, responsiveness_fraction, swing_sweep, swing_window_fraction, tail_share_comparison,
    vra_estimate_c, vra_screen, ElectionSet, EnsembleRecord, FrequencyMap, Selector, QUANTILE_LEVELS,
};
use recom_core::measures::score_breakdown;
use recom_core::{Plan, RegionGraph};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::CScope;
use crate::ensemble::{for_each_line, EnsembleLine};
use crate::error::CliError;
use crate::graph_file::read_plan;
use crate::run::Context;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub election: Option<String>,
    /// Plot style for the renderer; `None` for tables that are not drawn.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub ensemble_sha256: String,
    pub plans: usize,
    pub districts: usize,
    pub elections: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

/// Where `cmd_analyze` reads from and writes to.
#[derive(Debug, Clone)]
pub struct AnalyzeInputs {
    pub ensemble: PathBuf,
    pub reference: PathBuf,
    /// Independent ensembles for the convergence table; when empty the main
    /// ensemble is cut into contiguous pieces instead.
    pub compare: Vec<PathBuf>,
    pub out: PathBuf,
}

struct Tables {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Tables {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::invalid(&path, e))?;
        w.write_record(header).map_err(|e| CliError::invalid(&path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| CliError::invalid(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    fn record(&mut self, name: &str, kind: &str, election: Option<&str>, plot: Option<&str>) {
        let image = plot.map(|_| format!("plots/{}.png", name.rsplit_once('.').map_or(name, |(stem, _)| stem)));
        self.artifacts.push(Artifact {
            path: name.to_string(),
            kind: kind.to_string(),
            election: election.map(str::to_string),
            plot: plot.map(str::to_string),
            image,
        });
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Ensemble records in config election order, with frequency maps filled
/// in while streaming so assignments are never all held at once.
struct Loaded {
    records: Vec<EnsembleRecord>,
    top: FrequencyMap,
    bottom: FrequencyMap,
}

fn load_records(
    path: &Path,
    g: &RegionGraph,
    elections: &[String],
    selectors: Option<(Selector, Selector)>,
) -> Result<Loaded, CliError> {
    let all: Vec<usize> = (0..elections.len()).collect();
    let mut loaded = Loaded { records: Vec::new(), top: FrequencyMap::new(g.num_units()), bottom: FrequencyMap::new(g.num_units()) };
    for_each_line(path, |line| {
        if line.assignment.iter().map(|r| r.1 as usize).sum::<usize>() != g.num_units() {
            return Err(CliError::invalid(path, format!("plan {} does not cover the graph", line.plan_id)));
        }
        if let Some((top, bottom)) = selectors {
            let rec = line.to_record(elections, true)?;
            loaded.top.add(&rec, &all, top)?;
            loaded.bottom.add(&rec, &all, bottom)?;
            loaded.records.push(EnsembleRecord { assignment: None, ..rec });
        } else {
            loaded.records.push(line.to_record(elections, false)?);
        }
        Ok(())
    })?;
    if loaded.records.is_empty() {
        return Err(CliError::invalid(path, "ensemble is empty"));
    }
    Ok(loaded)
}

pub fn cmd_analyze(ctx: &Context, inputs: &AnalyzeInputs) -> Result<Manifest, CliError> {
    let cfg = &ctx.cfg;
    let a = &cfg.analysis;
    let g = &ctx.graph;
    let set = ElectionSet { names: cfg.elections.clone(), black_candidate: cfg.black_candidate.clone() };
    for name in cfg.elections.iter().chain(&cfg.black_candidate).chain(&a.swing_elections).chain(&a.responsiveness_drop) {
        if g.election_index(name).is_none() {
            return Err(CliError::Validation(format!("unknown election {name}")));
        }
        set.index(name)?;
    }
    let ne = set.names.len();
    let all: Vec<usize> = (0..ne).collect();

    let reference_plan = read_plan(&inputs.reference, g)?;
    if reference_plan.num_districts() != cfg.districts {
        return Err(CliError::invalid(&inputs.reference, format!("expected {} districts", cfg.districts)));
    }
    let p = cfg.params(1.0);
    let ref_score = score_breakdown(g, &reference_plan, &p, false).map_err(|e| CliError::Validation(e.to_string()))?;
    let reference = EnsembleLine::from_plan(g, &reference_plan, &ref_score, u64::MAX, 0, f64::NAN)
        .to_record(&set.names, true)?;

    let top_sel = Selector::TopDemocratic(a.top_democratic);
    let bottom_sel = Selector::MostRepublican(a.most_republican);
    let loaded = load_records(&inputs.ensemble, g, &set.names, a.frequency_maps.then_some((top_sel, bottom_sel)))?;
    let ensemble = &loaded.records;
    if let Some(r) = ensemble.iter().find(|r| r.num_districts() != cfg.districts) {
        return Err(CliError::invalid(&inputs.ensemble, format!("plan {} has {} districts", r.plan_id, r.num_districts())));
    }

    fs::create_dir_all(&inputs.out).map_err(|e| CliError::io(&inputs.out, e))?;
    let mut t = Tables { dir: inputs.out.clone(), artifacts: Vec::new() };
    let k = cfg.districts;

    // Collected seat histograms over the historical elections.
    let hists = collected_seat_histogram(ensemble, &set, &all, &reference)?;
    let mut rows = Vec::new();
    for h in &hists {
        for (s, (&c, fr)) in h.counts.iter().zip(h.frequencies()).enumerate() {
            rows.push(vec![h.election.clone(), s.to_string(), c.to_string(), f(fr), f(h.statewide_share), h.reference_seats.to_string()]);
        }
    }
    t.csv("seat_histograms.csv", &["election", "seats", "count", "frequency", "statewide_share", "reference_seats"], rows)?;
    t.record("seat_histograms.csv", "seat_histogram", None, Some("csh"));

    // Responsiveness: plans with one seat count across all elections.
    let (fraction, ids) = responsiveness_fraction(ensemble, &all)?;
    let ref_fixed = all
        .iter()
        .map(|&e| record_seats(&reference, e).map(|s| s.seats))
        .collect::<Result<BTreeSet<_>, _>>()?
        .len()
        == 1;
    let mut dropped = Vec::new();
    for name in &a.responsiveness_drop {
        let e = set.index(name)?;
        let rest: Vec<usize> = all.iter().copied().filter(|&x| x != e).collect();
        let (fr, ids) = responsiveness_fraction(ensemble, &rest)?;
        dropped.push(json!({"without": name, "fraction": fr, "count": ids.len()}));
    }
    t.json(
        "responsiveness.json",
        &json!({
            "elections": set.names, "plans": ensemble.len(), "fraction": fraction, "count": ids.len(),
            "reference_fixed": ref_fixed, "dropping": dropped,
        }),
    )?;
    t.record("responsiveness.json", "responsiveness", None, None);

    // Uniform swing.
    let mut window_rows = Vec::new();
    for name in &a.swing_elections {
        let e = set.index(name)?;
        let sweep = swing_sweep(ensemble, e, &reference, &a.swing_targets)?;
        let n = ensemble.len() as f64;
        let mut rows = Vec::new();
        for r in &sweep {
            for (s, &c) in r.counts.iter().enumerate() {
                rows.push(vec![f(r.target), f(r.delta), f(r.realised), s.to_string(), c.to_string(), f(c as f64 / n), r.reference_seats.to_string()]);
            }
        }
        let file = format!("swing_{name}.csv");
        t.csv(&file, &["target", "delta", "realised", "seats", "count", "frequency", "reference_seats"], rows)?;
        t.record(&file, "swing", Some(name), Some("swing_csh"));
        let (lo, hi) = a.swing_window;
        window_rows.push(vec![name.clone(), f(lo), f(hi), f(swing_window_fraction(&sweep, lo, hi))]);
    }
    t.csv("swing_window.csv", &["election", "lo", "hi", "fraction_at_or_below_reference"], window_rows)?;
    t.record("swing_window.csv", "swing_window", None, None);

    // Rank-ordered marginals.
    let qheader: Vec<String> = QUANTILE_LEVELS.iter().map(|q| format!("q{}", q * 100.0)).collect();
    let mut header: Vec<&str> = vec!["rank"];
    header.extend(qheader.iter().map(String::as_str));
    header.extend(["min", "max", "reference"]);
    for (e, name) in set.names.iter().enumerate() {
        let marg = rank_ordered_marginals(ensemble, e)?;
        let ranked: Vec<Vec<f64>> = ensemble.iter().map(|r| ranked_shares(r, e)).collect::<Result<_, _>>()?;
        let ref_ranked = ranked_shares(&reference, e)?;
        let rows = marg
            .iter()
            .map(|m| {
                let col = ranked.iter().map(|r| r[m.rank - 1]);
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                let mut row = vec![m.rank.to_string()];
                row.extend(m.quantiles.iter().map(|&q| f(q)));
                row.extend([f(lo), f(hi), f(ref_ranked[m.rank - 1])]);
                row
            })
            .collect();
        let file = format!("rank_marginals_{name}.csv");
        t.csv(&file, &header, rows)?;
        t.record(&file, "rank_marginals", Some(name), Some("rank_box"));
    }

    // Polarization over rank blocks.
    let (l0, l1) = a.polarization_low;
    let (h0, h1) = a.polarization_high;
    let mut rows = Vec::new();
    for (e, name) in set.names.iter().enumerate() {
        let s = polarization_stats(ensemble, e, &reference, l0..=l1, h0..=h1)?;
        rows.push(vec![
            name.clone(),
            format!("{l0}-{l1}"),
            s.low_count.to_string(),
            f(s.low_fraction()),
            format!("{h0}-{h1}"),
            s.high_count.to_string(),
            f(s.high_fraction()),
            s.plans.to_string(),
        ]);
    }
    t.csv(
        "polarization.csv",
        &["election", "low_ranks", "low_count", "low_fraction", "high_ranks", "high_count", "high_fraction", "plans"],
        rows,
    )?;
    t.record("polarization.csv", "polarization", None, None);

    // Spatial frequency of the extreme districts.
    if a.frequency_maps {
        for (sel, map, file) in [
            (top_sel, &loaded.top, "frequency_top_democratic.csv"),
            (bottom_sel, &loaded.bottom, "frequency_most_republican.csv"),
        ] {
            let mut own = FrequencyMap::new(g.num_units());
            own.add(&reference, &all, sel)?;
            let rows = map
                .frequencies()
                .into_iter()
                .zip(own.frequencies())
                .enumerate()
                .map(|(n, (fr, r))| vec![g.unit(n).id.clone(), f(fr), f(r)])
                .collect();
            t.csv(file, &["unit_id", "frequency", "reference_frequency"], rows)?;
            t.record(file, "frequency_map", None, Some("heat_map"));
        }
    }

    // Tails: how the reference's extreme districts compare.
    let mut rows = Vec::new();
    for (e, name) in set.names.iter().enumerate() {
        for (label, sel) in [("top_democratic", top_sel), ("most_republican", bottom_sel)] {
            for (pos, fr) in tail_share_comparison(ensemble, e, &reference, sel)?.into_iter().enumerate() {
                rows.push(vec![name.clone(), label.to_string(), (pos + 1).to_string(), f(fr)]);
            }
        }
    }
    t.csv("tail_shares.csv", &["election", "selector", "position", "fraction_at_or_below_reference"], rows)?;
    t.record("tail_shares.csv", "tail", None, None);

    // Compactness: ranked Polsby-Popper and per-plan scores.
    let mut by_rank = vec![Vec::with_capacity(ensemble.len()); k];
    let mut score_rows = Vec::with_capacity(ensemble.len());
    for r in ensemble {
        let mut pp = r.pp.clone();
        pp.sort_by(f64::total_cmp);
        for (i, &x) in pp.iter().enumerate() {
            by_rank[i].push(x);
        }
        let mut row = vec![r.plan_id.to_string(), f(r.total_iso), r.splits.to_string()];
        row.extend(pp.iter().map(|&x| f(x)));
        score_rows.push(row);
    }
    let ref_pp = ref_score.ranked_pp();
    let rows = by_rank
        .iter_mut()
        .enumerate()
        .map(|(i, v)| {
            v.sort_by(f64::total_cmp);
            let mut row = vec![(i + 1).to_string()];
            row.extend(QUANTILE_LEVELS.iter().map(|&q| f(quantile_sorted(v, q))));
            row.extend([f(v[0]), f(v[v.len() - 1]), f(ref_pp[i])]);
            row
        })
        .collect();
    t.csv("compactness.csv", &header, rows)?;
    t.record("compactness.csv", "compactness", None, Some("pp_box"));
    let pp_cols: Vec<String> = (1..=k).map(|i| format!("pp_{i}")).collect();
    let mut sheader = vec!["plan_id", "J", "splits"];
    sheader.extend(pp_cols.iter().map(String::as_str));
    t.csv("scores.csv", &sheader, score_rows)?;
    t.record("scores.csv", "scores", None, None);

    // Convergence between independent streams or contiguous pieces.
    let extra: Vec<Vec<EnsembleRecord>> = inputs
        .compare
        .iter()
        .map(|p| load_records(p, g, &set.names, None).map(|l| l.records))
        .collect::<Result<_, _>>()?;
    let streams: Vec<&[EnsembleRecord]> = if extra.is_empty() {
        let pieces = a.convergence_chunks.max(1);
        let size = ensemble.len().div_ceil(pieces);
        ensemble.chunks(size.max(1)).collect()
    } else {
        std::iter::once(ensemble.as_slice()).chain(extra.iter().map(Vec::as_slice)).collect()
    };
    let mut conv_rows = Vec::new();
    for (e, name) in set.names.iter().enumerate() {
        let report = convergence_compare(&streams, e, a.convergence_threshold)?;
        for (r, d) in report.per_rank.iter().enumerate() {
            conv_rows.push(vec![name.clone(), (r + 1).to_string(), f(*d), f(report.threshold), report.passes.to_string()]);
        }
        let mut rows = Vec::new();
        for (s, stream) in streams.iter().enumerate() {
            for m in rank_ordered_marginals(stream, e)? {
                let mut row = vec![s.to_string(), m.rank.to_string()];
                row.extend(m.quantiles.iter().map(|&q| f(q)));
                rows.push(row);
            }
        }
        let mut cheader = vec!["stream", "rank"];
        cheader.extend(qheader.iter().map(String::as_str));
        let file = format!("convergence_{name}.csv");
        t.csv(&file, &cheader, rows)?;
        t.record(&file, "convergence_marginals", Some(name), Some("violin"));
    }
    t.csv("convergence.csv", &["election", "rank", "ks", "threshold", "passes"], conv_rows)?;
    t.record("convergence.csv", "convergence", None, None);

    // VRA screen and crossover estimate.
    let vra = match vra_report(g, &set, ensemble, &reference_plan, &cfg.analysis) {
        Err(CliError::Validation(reason)) if !vra_data_present(g) || set.black_candidate.is_empty() => {
            VraReport { summary: json!({"skipped": reason}), passing: Vec::new() }
        }
        other => other?,
    };
    t.json("vra.json", &vra.summary)?;
    t.record("vra.json", "vra", None, None);
    t.csv("vra_passing.csv", &["plan_id"], vra.passing.iter().map(|id| vec![id.to_string()]).collect())?;
    t.record("vra_passing.csv", "vra_passing", None, None);

    let manifest = Manifest {
        config_hash: ctx.hash.clone(),
        ensemble_sha256: sha256_file(&inputs.ensemble)?,
        plans: ensemble.len(),
        districts: k,
        elections: set.names.clone(),
        artifacts: t.artifacts.clone(),
    };
    t.json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn vra_data_present(g: &RegionGraph) -> bool {
    g.units().iter().any(|u| u.tvap > 0.0)
}

struct VraReport {
    summary: serde_json::Value,
    passing: Vec<u64>,
}

fn vra_report(
    g: &RegionGraph,
    set: &ElectionSet,
    ensemble: &[EnsembleRecord],
    reference: &Plan,
    a: &crate::config::AnalysisConfig,
) -> Result<VraReport, CliError> {
    let idx: Vec<usize> = set.names.iter().map(|n| g.election_index(n).expect("checked")).collect();
    let votes: Vec<Vec<_>> = idx.iter().map(|&e| g.units().iter().map(|u| u.votes[e]).collect()).collect();
    let bvap: Vec<f64> = g.units().iter().map(|u| u.bvap).collect();
    let tvap: Vec<f64> = g.units().iter().map(|u| u.tvap).collect();
    let scope: Vec<usize> = match &a.vra_c_scope {
        CScope::Statewide => (0..g.num_units()).collect(),
        CScope::ReferenceDistricts(ds) => (0..g.num_units()).filter(|&n| ds.contains(&reference.district_of(n))).collect(),
    };
    let c = vra_estimate_c(&votes, &bvap, &tvap, set, &scope)?;
    let passing = vra_screen(ensemble, set, &a.vra)?;
    let floored = match a.vra_floor_variant {
        Some(floor) => {
            let model = recom_core::analysis::VraModel { bvap_floor: Some(floor), ..a.vra };
            Some(json!({"bvap_floor": floor, "count": vra_screen(ensemble, set, &model)?.len()}))
        }
        None => None,
    };
    let summary = json!({
        "model": a.vra,
        "plans": ensemble.len(),
        "passing": passing.len(),
        "passing_fraction": passing.len() as f64 / ensemble.len() as f64,
        "with_floor": floored,
        "c_estimate": c,
        "c_scope": a.vra_c_scope,
        "black_candidate": set.black_candidate,
    });
    Ok(VraReport { summary, passing })
}
