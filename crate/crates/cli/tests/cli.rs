use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn wplzx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wplzx")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn decode_toy_graph_reports_anchor_cost() {
    let o = wplzx(&["decode", "--graph", p(&fixture("toy.json")), "--lambda", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    assert!(row.contains("1.1875"), "{out}");
    assert!(out.starts_with("lambda,mode,cost,"));
}

#[test]
fn exact_decode_of_large_graph_hits_resource_cap() {
    let dir = TempDir::new().unwrap();
    let vertices: Vec<String> = (0..18)
        .map(|i| format!(r#"{{"id": {i}, "pos": [{i}, 0], "a": 4, "k": 1, "virtual": false}}"#))
        .collect();
    let path = dir.path().join("big.json");
    fs::write(&path, format!(r#"{{"vertices": [{}], "edges": []}}"#, vertices.join(","))).unwrap();
    assert_eq!(code(&wplzx(&["decode", "--graph", p(&path), "--lambda", "1", "--exact"])), 3);
    assert_eq!(code(&wplzx(&["decode", "--graph", p(&path), "--lambda", "1"])), 0);
}

#[test]
fn exact_and_greedy_are_mutually_exclusive() {
    let o = wplzx(&["decode", "--graph", p(&fixture("toy.json")), "--exact", "--greedy"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn normalize_is_idempotent_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_eq!(code(&wplzx(&["normalize", "--input", p(&fixture("euler_adjacent.json")), "--out", p(&first)])), 0);
    let norm = first.join("euler_adjacent.norm.json");
    assert_eq!(code(&wplzx(&["normalize", "--input", p(&norm), "--out", p(&second)])), 0);
    let again = second.join("euler_adjacent.norm.norm.json");
    assert_eq!(fs::read(&norm).unwrap(), fs::read(&again).unwrap());
    assert_eq!(
        fs::read(first.join("euler_adjacent.summary.json")).unwrap(),
        fs::read(second.join("euler_adjacent.norm.summary.json")).unwrap()
    );
    assert!(fs::read_to_string(second.join("euler_adjacent.norm.trace.jsonl")).unwrap().is_empty());
}

fn summary_phases(path: &Path) -> Vec<(String, String)> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["spiders"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            let t = &s["theta"];
            (s["kind"].as_str().unwrap().to_string(), format!("{}/{}", t["num"], t["den"]))
        })
        .collect()
}

#[test]
fn euler_fixtures_normalize_as_expected() {
    let dir = TempDir::new().unwrap();
    for name in ["euler_chain.json", "euler_adjacent.json"] {
        assert_eq!(code(&wplzx(&["normalize", "--input", p(&fixture(name)), "--out", p(dir.path())])), 0);
    }
    // Z(1/8) X(1/3) Z(1/5): nothing of one colour is adjacent.
    let chain = summary_phases(&dir.path().join("euler_chain.summary.json"));
    assert_eq!(chain.len(), 3);
    // Z(1/8) Z(1/5) X(1/3) fuses to Z(13/40) X(1/3).
    let mut adjacent = summary_phases(&dir.path().join("euler_adjacent.summary.json"));
    adjacent.sort();
    assert_eq!(adjacent, vec![("X".into(), "1/3".into()), ("Z".into(), "13/40".into())]);
}

#[test]
fn corrupted_input_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"inputs": ["q0"], "outputs": [], "nodes": [], "wires": [[{"boundary": "in""#).unwrap();
    let o = wplzx(&["normalize", "--input", p(&bad), "--out", p(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&wplzx(&["gen", "--preset", "d9", "--out", p(dir.path())])), 2);
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = wplzx(&["gen", "--preset", "d1-main", "--seed", "7", "--count", "3", "--out", p(out)]);
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["instances"].as_array().unwrap().len(), 3);
}

#[test]
fn gen_hea_respects_qubits_and_layers() {
    let dir = TempDir::new().unwrap();
    let o = wplzx(&["gen", "--preset", "d2-main", "--qubits", "4", "--layers", "3", "--count", "1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("d2-main-0000.circ")).unwrap();
    assert_eq!(text.lines().next(), Some("qubits 4"));
    assert_eq!(text.lines().filter(|l| l.starts_with("CX")).count(), 3 * 3);
}

#[test]
fn verify_accepts_normalization_and_rejects_corrupted_trace() {
    let dir = TempDir::new().unwrap();
    let input = fixture("euler_adjacent.json");
    let o = wplzx(&["verify", "--input", p(&input)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("\"verdict\":\"SOUND\""));

    assert_eq!(code(&wplzx(&["normalize", "--input", p(&input), "--out", p(dir.path())])), 0);
    let trace = dir.path().join("euler_adjacent.trace.jsonl");
    let text = fs::read_to_string(&trace).unwrap().replace(r#""alpha":{"num":13,"den":40}"#, r#""alpha":{"num":1,"den":2}"#);
    let corrupted = dir.path().join("corrupted.jsonl");
    fs::write(&corrupted, text).unwrap();
    let o = wplzx(&["verify", "--input", p(&input), "--trace", p(&corrupted)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("\"verdict\":\"UNSOUND\""));
}

#[test]
fn verify_oversize_diagram_exits_with_resource_code() {
    let o = wplzx(&["verify", "--input", p(&fixture("euler_chain.json")), "--max-open-wires", "1"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("hint"));
}

fn sweep_rows(out: &str) -> Vec<Vec<f64>> {
    out.lines()
        .skip(1)
        .map(|l| l.split(',').take(8).map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sweep_is_reproducible_and_risk_is_monotone() {
    let args = ["sweep", "--lambda", "0,0.1,0.3", "--d", "3", "--p", "0.05", "--trials", "200", "--seed", "1"];
    let (a, b) = (wplzx(&args), wplzx(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(
        out.lines().next().unwrap(),
        "lambda,p_phys,distance,trials,logical_error_rate,drg_toy_mean,drg_pm_mean,mean_cost,mode"
    );
    let rows = sweep_rows(&out);
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1][5] >= w[0][5] && w[1][6] >= w[0][6]);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"trials": 30, "seed": 4, "lambda": [0.0, 0.5]}"#).unwrap();
    let o = wplzx(&["--config", p(&cfg), "sweep"]);
    assert_eq!(code(&o), 0);
    let rows = sweep_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][3], 30.0);
    let o = wplzx(&["--config", p(&cfg), "sweep", "--trials", "20"]);
    assert_eq!(sweep_rows(&stdout(&o))[0][3], 20.0);

    fs::write(&cfg, r#"{"trails": 30}"#).unwrap();
    assert_eq!(code(&wplzx(&["--config", p(&cfg), "sweep"])), 2);
}

#[test]
fn metrics_csv_has_fixed_columns_and_footer() {
    let o = wplzx(&["metrics", "--preset", "d2-main", "--count", "3", "--seed", "2", "--qubits", "3", "--layers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "seed,n_qubits,n_spiders,pqvr,csc_total,csc_cnot,fp");
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert!(lines[4].starts_with("mean,"));
    assert!(lines[5].starts_with("stddev,"));
    for row in &lines[1..4] {
        let cells: Vec<&str> = row.split(',').collect();
        let pqvr: f64 = cells[3].parse().unwrap();
        let fp: f64 = cells[6].parse().unwrap();
        assert!(pqvr > 0.0 && pqvr <= 1.0);
        assert!((0.0..=1.0).contains(&fp));
    }
}

#[test]
fn raw_phase_metrics_keep_full_fidelity() {
    let o = wplzx(&["metrics", "--preset", "d2-main", "--count", "2", "--qubits", "3", "--phase-mode", "raw"]);
    assert_eq!(code(&o), 0);
    for row in stdout(&o).lines().skip(1).take(2) {
        let fp: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(fp > 1.0 - 1e-9, "{row}");
    }
}

#[test]
fn metrics_pairing_mismatch_fails() {
    let a = fixture("euler_chain.json");
    let o = wplzx(&["metrics", "--input", p(&a), p(&a), "--opt", p(&a)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairing mismatch"));
}

#[test]
fn metrics_reads_a_gen_manifest() {
    let dir = TempDir::new().unwrap();
    let o = wplzx(&["gen", "--preset", "d2-appendix", "--qubits", "3", "--layers", "2", "--count", "2", "--seed", "5", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let o = wplzx(&["metrics", "--manifest", p(&dir.path().join("manifest.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("5,3,"));
}

#[test]
fn curvature_landscape_csv() {
    let o = wplzx(&["curvature", "--lo", "0.2", "--hi", "0.8", "--points", "4"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "lambda_perp,lambda_par,b_eff,R,grad_norm");
    assert_eq!(out.lines().count(), 1 + 16);
    let diag: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(diag[3], 2.0);
}

#[test]
fn evaluate_prints_matrix_json() {
    let o = wplzx(&["evaluate", "--input", p(&fixture("euler_chain.json"))]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].as_array().unwrap().len(), 2);
}
