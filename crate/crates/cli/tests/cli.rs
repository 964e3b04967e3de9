use std::fs;
use std::path::Path;
use std::process::Command;

use recom::analyze::{cmd_analyze, AnalyzeInputs};
use recom::config::{AnalysisConfig, RunConfig};
use recom::ensemble::{EnsembleLine, EnsembleWriter};
use recom::graph_file::{load_graph, parse_graph, read_plan};
use recom::run::Context;
use recom::CliError;
use recom_core::analysis::record_seats;
use recom_core::measures::score_breakdown;
use recom_core::MeasureParams;

fn grid_json(rows: usize, cols: usize) -> String {
    let id = |r: usize, c: usize| format!("u{r}_{c}");
    let mut units = Vec::new();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            units.push(format!(r#"{{"id": "{}", "pop": 10, "area": 1, "ext_perim": 0, "county": "C{c}"}}"#, id(r, c)));
            if c + 1 < cols {
                edges.push(format!(r#"["{}", "{}", 1]"#, id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push(format!(r#"["{}", "{}", 1]"#, id(r, c), id(r + 1, c)));
            }
        }
    }
    format!(r#"{{"units": [{}], "edges": [{}]}}"#, units.join(","), edges.join(","))
}

#[test]
fn grid_file_loads() {
    let g = parse_graph(&grid_json(4, 4)).unwrap();
    assert_eq!((g.num_units(), g.num_edges()), (16, 24));
    let bad = grid_json(4, 4).replace(r#"["u0_0", "u0_1", 1]"#, r#"["u0_0", "Z", 1]"#);
    let err = parse_graph(&bad).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert!(err.to_string().contains('Z'), "{err}");
}

/// Four single-unit districts carrying the reference votes of elections A
/// and B (16 voters each).
const PATH_GRAPH: &str = r#"{"units": [
    {"id": "a", "pop": 16, "area": 1, "ext_perim": 4, "county": "X", "votes": {"A": {"d": 5, "r": 11}, "B": {"d": 3, "r": 13}}},
    {"id": "b", "pop": 16, "area": 1, "ext_perim": 2, "county": "X", "votes": {"A": {"d": 7, "r": 9}, "B": {"d": 6, "r": 10}}},
    {"id": "c", "pop": 16, "area": 1, "ext_perim": 2, "county": "Y", "votes": {"A": {"d": 10, "r": 6}, "B": {"d": 8, "r": 8}}},
    {"id": "d", "pop": 16, "area": 1, "ext_perim": 4, "county": "Y", "votes": {"A": {"d": 13, "r": 3}, "B": {"d": 11, "r": 5}}}],
    "edges": [["a", "b", 1], ["b", "c", 1], ["c", "d", 1]]}"#;

fn golden_setup(dir: &Path) -> (Context, AnalyzeInputs) {
    fs::write(dir.join("graph.json"), PATH_GRAPH).unwrap();
    fs::write(dir.join("ref.csv"), "unit_id,district\na,1\nb,2\nc,3\nd,4\n").unwrap();
    let cfg = RunConfig {
        graph: dir.join("graph.json"),
        districts: 4,
        pop_tolerance: 0.1,
        max_county_splits: 4,
        elections: vec!["A".into(), "B".into()],
        black_candidate: Vec::new(),
        out: dir.join("out"),
        analysis: AnalysisConfig {
            swing_elections: vec!["A".into()],
            swing_targets: vec![23.0 / 64.0, 35.0 / 64.0, 43.0 / 64.0],
            swing_window: (35.0 / 64.0, 43.0 / 64.0),
            responsiveness_drop: vec!["B".into()],
            polarization_low: (1, 2),
            polarization_high: (3, 4),
            top_democratic: 1,
            most_republican: 1,
            ..AnalysisConfig::default()
        },
        ..RunConfig::default()
    };
    let ctx = Context::load(cfg).unwrap();
    let plan = read_plan(&dir.join("ref.csv"), &ctx.graph).unwrap();
    let score = score_breakdown(&ctx.graph, &plan, &ctx.cfg.params(0.0), false).unwrap();
    let fixture: [([f64; 4], [f64; 4]); 3] = [
        ([6.0, 9.0, 8.0, 11.0], [5.0, 7.0, 9.0, 7.0]),
        ([4.0, 5.0, 11.0, 14.0], [5.0, 9.0, 10.0, 12.0]),
        ([9.0, 9.0, 9.0, 10.0], [2.0, 3.0, 5.0, 3.0]),
    ];
    let path = dir.join("ensemble.jsonl");
    let mut w = EnsembleWriter::create(&path).unwrap();
    for (i, (a, b)) in fixture.iter().enumerate() {
        let mut line = EnsembleLine::from_plan(&ctx.graph, &plan, &score, i as u64, i as u64, 0.0);
        line.votes.insert("A".into(), a.iter().map(|&d| (d, 16.0 - d)).collect());
        line.votes.insert("B".into(), b.iter().map(|&d| (d, 16.0 - d)).collect());
        w.write(&line).unwrap();
    }
    w.flush().unwrap();
    let inputs = AnalyzeInputs { ensemble: path, reference: dir.join("ref.csv"), compare: Vec::new(), out: dir.join("tables") };
    (ctx, inputs)
}

#[test]
fn analyze_matches_golden_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (ctx, inputs) = golden_setup(tmp.path());
    let manifest = cmd_analyze(&ctx, &inputs).unwrap();
    assert_eq!((manifest.plans, manifest.districts), (3, 4));

    let csh = fs::read_to_string(inputs.out.join("seat_histograms.csv")).unwrap();
    let expected = "\
election,seats,count,frequency,statewide_share,reference_seats
A,0,0,0,0.546875,2
A,1,0,0,0.546875,2
A,2,2,0.6666666666666666,0.546875,2
A,3,0,0,0.546875,2
A,4,1,0.3333333333333333,0.546875,2
B,0,1,0.3333333333333333,0.4375,1
B,1,1,0.3333333333333333,0.4375,1
B,2,0,0,0.4375,1
B,3,1,0.3333333333333333,0.4375,1
B,4,0,0,0.4375,1
";
    assert_eq!(csh, expected);

    let window = fs::read_to_string(inputs.out.join("swing_window.csv")).unwrap();
    assert_eq!(window, "election,lo,hi,fraction_at_or_below_reference\nA,0.546875,0.671875,0.6666666666666666\n");

    let swing = fs::read_to_string(inputs.out.join("swing_A.csv")).unwrap();
    let low: Vec<&str> = swing.lines().filter(|l| l.starts_with("0.359375,")).collect();
    assert_eq!(low.len(), 5);
    assert_eq!(low[0], "0.359375,-0.1875,0.359375,0,2,0.6666666666666666,1");

    let resp: serde_json::Value = serde_json::from_str(&fs::read_to_string(inputs.out.join("responsiveness.json")).unwrap()).unwrap();
    assert_eq!(resp["fraction"], 0.0);
    assert_eq!(resp["dropping"][0]["fraction"], 1.0);

    let listed: Vec<&str> = manifest.artifacts.iter().map(|a| a.path.as_str()).collect();
    for name in ["seat_histograms.csv", "swing_A.csv", "rank_marginals_A.csv", "rank_marginals_B.csv", "polarization.csv"] {
        assert!(listed.contains(&name), "{name} missing from manifest");
        assert!(inputs.out.join(name).exists());
    }
    let on_disk: serde_json::Value = serde_json::from_str(&fs::read_to_string(inputs.out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk["plans"], 3);
}

#[test]
fn analyze_names_missing_election() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut ctx, inputs) = golden_setup(tmp.path());
    ctx.cfg.analysis.swing_elections = vec!["16PR".into()];
    let err = cmd_analyze(&ctx, &inputs).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert!(err.to_string().contains("16PR"), "{err}");
}

#[test]
fn enacted_plan_seat_count() {
    // Seven districts along a path with string labels; five lean Democratic.
    let dem = [60, 55, 52, 45, 70, 51, 30];
    let units: Vec<String> = dem
        .iter()
        .enumerate()
        .map(|(i, d)| format!(r#"{{"id": "p{i}", "pop": 100, "area": 1, "county": "K{i}", "votes": {{"G": {{"d": {d}, "r": {}}}}}}}"#, 100 - d))
        .collect();
    let edges: Vec<String> = (1..7).map(|i| format!(r#"["p{}", "p{i}", 1]"#, i - 1)).collect();
    let tmp = tempfile::tempdir().unwrap();
    let graph = tmp.path().join("g.json");
    fs::write(&graph, format!(r#"{{"units": [{}], "edges": [{}]}}"#, units.join(","), edges.join(","))).unwrap();
    let plan_csv = tmp.path().join("enacted.csv");
    let rows: String = (0..7).map(|i| format!("p{i},dist-{}\n", (b'a' + i as u8) as char)).collect();
    fs::write(&plan_csv, format!("unit_id,district\n{rows}")).unwrap();

    let g = load_graph(&graph).unwrap();
    let plan = read_plan(&plan_csv, &g).unwrap();
    let p = MeasureParams { districts: 7, max_county_splits: 7, ..MeasureParams::congressional() };
    let score = score_breakdown(&g, &plan, &p, false).unwrap();
    let rec = EnsembleLine::from_plan(&g, &plan, &score, 0, 0, 0.0).to_record(&["G".to_string()], false).unwrap();
    assert_eq!(record_seats(&rec, 0).unwrap().seats, 5);
}

fn recom_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_recom"))
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let status = recom_bin().arg("sample").arg("--bogus").output().unwrap().status;
    assert_eq!(status.code(), Some(1));

    let missing = tmp.path().join("absent.toml");
    let status = recom_bin().args(["sample", "--config"]).arg(&missing).output().unwrap().status;
    assert_eq!(status.code(), Some(3));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, grid_json(2, 2).replace(r#"["u0_0", "u0_1", 1]"#, r#"["u0_0", "Z", 1]"#)).unwrap();
    let out = recom_bin().arg("preprocess").arg(&bad).arg(tmp.path().join("o.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('Z'));
}

#[test]
fn preprocess_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.json");
    fs::write(&input, grid_json(3, 3)).unwrap();
    let once = tmp.path().join("once.json");
    let twice = tmp.path().join("twice.json");
    assert!(recom_bin().arg("preprocess").arg(&input).arg(&once).status().unwrap().success());
    assert!(recom_bin().arg("preprocess").arg(&once).arg(&twice).status().unwrap().success());
    assert_eq!(fs::read(&once).unwrap(), fs::read(&twice).unwrap());
    assert!(tmp.path().join("once.json.report.json").exists());
}
