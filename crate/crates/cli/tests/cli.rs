//! End-to-end tests of the `baybn` binary: file contracts, determinism and
//! exit codes.

use std::path::Path;
use std::process::{Command, Output};

use baybn::datagen::{sample, ErrorSpec, ScenarioSpec};
use baybn::io::{read_json, write_dataset_csv, write_json, LearnResultJson, ModelJson};
use baybn::model::LinearSemModel;

fn baybn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baybn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn simulate_writes_expected_columns_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = baybn(&[
            "simulate",
            "--p",
            "3",
            "--d-m",
            "2",
            "--n",
            "10",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = String::from_utf8(read(&out_a.join("dataset.csv"))).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 3);
    assert_eq!(csv.lines().count(), 11);

    // Identical primary outputs across reruns with the same seed.
    for name in ["dataset.csv", "truth.json", "resolved_config.json"] {
        assert_eq!(read(&out_a.join(name)), read(&out_b.join(name)), "{name}");
    }
}

#[test]
fn simulate_truth_round_trips_through_model_loader() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = baybn(&[
        "simulate", "--p", "6", "--d-m", "3", "--n", "40", "--seed", "99", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc: ModelJson = read_json(&out.join("truth.json")).unwrap();
    let model = doc.to_model().unwrap();
    assert_eq!(model.p(), 6);
    assert!(model.dag().moral_degree() <= 3);
}

#[test]
fn learn_recovers_single_edge_from_chain_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("chain.csv");
    let model = LinearSemModel::chain(2, 0.8, 1.0);
    let dataset = sample(&model, 10_000, 123).unwrap();
    write_dataset_csv(&data_path, &dataset).unwrap();

    let out = dir.path().join("fit");
    let o = baybn(&[
        "learn",
        "--data",
        data_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result: LearnResultJson = read_json(&out.join("learn_result.json")).unwrap();
    assert_eq!(result.edges.len(), 1);
    assert_eq!((result.edges[0].parent, result.edges[0].child), (0, 1));
    assert!(result.edges[0].inclusion_probability >= 0.5);
    let edges_csv = String::from_utf8(read(&out.join("edges.csv"))).unwrap();
    assert_eq!(edges_csv.lines().count(), 2); // header + one edge
    assert!(edges_csv.lines().nth(1).unwrap().starts_with("x1,x2,"));
}

#[test]
fn learn_single_column_dataset_succeeds_with_empty_edges() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("one.csv");
    std::fs::write(&data_path, "v\n1.0\n2.0\n0.5\n").unwrap();
    let out = dir.path().join("fit");
    let o = baybn(&[
        "learn",
        "--data",
        data_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let result: LearnResultJson = read_json(&out.join("learn_result.json")).unwrap();
    assert!(result.edges.is_empty());
    assert_eq!(result.ordering, vec![0]);
}

#[test]
fn learn_reports_malformed_cell_with_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("bad.csv");
    std::fs::write(&data_path, "a,b\n1.0,2.0\n1.5,abc\n").unwrap();
    let o = baybn(&[
        "learn",
        "--data",
        data_path.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("row 2"), "{msg}");
    assert!(msg.contains("'b'"), "{msg}");
}

#[test]
fn eval_scores_identity_and_missing_edge() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = baybn(&[
        "simulate", "--p", "4", "--d-m", "2", "--n", "5000", "--seed", "3", "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let fit = dir.path().join("fit");
    let o = baybn(&[
        "learn",
        "--data",
        sim.join("dataset.csv").to_str().unwrap(),
        "--out",
        fit.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = dir.path().join("metrics");
    let o = baybn(&[
        "eval",
        "--truth",
        sim.join("truth.json").to_str().unwrap(),
        "--estimate",
        fit.join("learn_result.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value =
        serde_json::from_slice(&read(&out.join("metrics.json"))).unwrap();
    assert!(metrics["hamming"].is_u64());

    // Truth with one edge vs an empty estimate: hamming 1.
    let truth = ModelJson::from_model(
        &LinearSemModel::chain(2, 0.8, 1.0),
        vec!["x1".into(), "x2".into()],
        None,
    );
    let truth_path = dir.path().join("truth_small.json");
    write_json(&truth_path, &truth).unwrap();
    let empty = LearnResultJson {
        columns: vec!["x1".into(), "x2".into()],
        ordering: vec![0, 1],
        edges: vec![],
        steps: vec![],
        config_used: baybn::bagus::BagusConfig::defaults_for_n(10),
        warnings: vec![],
    };
    let est_path = dir.path().join("empty_est.json");
    write_json(&est_path, &empty).unwrap();
    let out2 = dir.path().join("metrics2");
    let o = baybn(&[
        "eval",
        "--truth",
        truth_path.to_str().unwrap(),
        "--estimate",
        est_path.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let metrics: serde_json::Value =
        serde_json::from_slice(&read(&out2.join("metrics.json"))).unwrap();
    assert_eq!(metrics["hamming"], 1);
    assert_eq!(metrics["false_negatives"], 1);
    assert_eq!(metrics["ordering_ok"], true);
}

#[test]
fn sweep_single_cell_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "seed": 11,
  "sweep": { "p": [6], "d_m": [2], "n": [150], "error_specs": ["gaussian"], "replications": 3 }
}"#,
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = baybn(&[
            "sweep",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        read(&out_a.join("sweep_agg.csv")),
        read(&out_b.join("sweep_agg.csv"))
    );
    // Raw rows are identical except the runtime column.
    let strip = |path: &Path| -> Vec<Vec<String>> {
        let mut r = csv::Reader::from_path(path).unwrap();
        r.records()
            .map(|rec| {
                let rec = rec.unwrap();
                rec.iter().take(7).map(str::to_string).collect()
            })
            .collect()
    };
    assert_eq!(
        strip(&out_a.join("sweep_raw.csv")),
        strip(&out_b.join("sweep_raw.csv"))
    );
}

#[test]
fn theory_on_chain_matches_analytic_constants() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("chain.json");
    let doc = ModelJson::from_model(
        &LinearSemModel::chain(6, 0.5, 1.0),
        (1..=6).map(|i| format!("x{i}")).collect(),
        None,
    );
    write_json(&model_path, &doc).unwrap();
    let out = dir.path().join("theory");
    let o = baybn(&[
        "theory",
        "--model",
        model_path.to_str().unwrap(),
        "--n",
        "10000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out.join("theory_report.json"))).unwrap();
    assert!((report["tau_min"].as_f64().unwrap() - 0.25).abs() < 1e-10);
    assert!((report["theta_min"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert_eq!(report["d"], 3);
    assert_eq!(report["d_m"], 2);
    let adm: serde_json::Value =
        serde_json::from_slice(&read(&out.join("admissibility.json"))).unwrap();
    assert_eq!(adm["flags"]["b0_window_nonempty"], true);
}

#[test]
fn theory_flags_star_degradation() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("star_small.json");
    let large = dir.path().join("star_large.json");
    for (path, p) in [(&small, 5usize), (&large, 40)] {
        let doc = ModelJson::from_model(
            &LinearSemModel::star(p, 0.5, 1.0),
            (1..=p).map(|i| format!("x{i}")).collect(),
            None,
        );
        write_json(path, &doc).unwrap();
    }
    let t = |path: &Path, out: &Path| -> serde_json::Value {
        let o = baybn(&[
            "theory",
            "--model",
            path.to_str().unwrap(),
            "--n",
            "10000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice(&read(&out.join("admissibility.json"))).unwrap()
    };
    let small_adm = t(&small, &dir.path().join("t1"));
    let large_adm = t(&large, &dir.path().join("t2"));
    let nu1_small = small_adm["config"]["nu1"].as_f64().unwrap();
    let nu1_large = large_adm["config"]["nu1"].as_f64().unwrap();
    let t_large = large_adm["config"]["threshold_t"].as_f64().unwrap();
    assert!(nu1_large > 50.0 * nu1_small, "{nu1_small} vs {nu1_large}");
    assert!(t_large > 0.9999, "T = {t_large}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.json");
    std::fs::write(&cfg_path, r#"{ "seed": 1, "nonsense": true }"#).unwrap();
    let o = baybn(&[
        "sweep",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense"));
}

#[test]
fn scenario_spec_parse_used_by_cli_matches_core_labels() {
    for label in ["gaussian", "subgaussian_mix", "student_t"] {
        assert_eq!(ErrorSpec::parse(label).unwrap().label(), label);
    }
    let spec = ScenarioSpec::new(3, 2, 10, ErrorSpec::StudentT, 0);
    assert_eq!(spec.error_spec.label(), "student_t");
}
