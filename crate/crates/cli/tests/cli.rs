use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aeromon::manifest::{file_digest, RunManifest, RunStatus};

const SMALL: &str = r#"
seed = 3
synthetic = true
synth_n_samples = 1500
ae_max_epochs = 40
baselines = ["gaussian_nb", "knn", "random_forest"]
knn_k_grid = [1, 5]
forest_n_trees = 15
cv_folds = 3
histogram_bins = 10
"#;

fn aeromon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeromon"))
        .args(args)
        .arg("--quiet")
        .env_remove("AEROMON_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digests(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), file_digest(&p).unwrap().0))
        .collect()
}

#[test]
fn run_writes_reports_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = aeromon(&["--config", s(&cfg), "--out", s(out), "run"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(digests(&a), digests(&b));

    let comparison = std::fs::read_to_string(a.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = comparison.lines().collect();
    assert_eq!(rows[0], "Model,Precision,Recall,F1-score,Accuracy");
    assert_eq!(rows.len(), 1 + 1 + 3);
    assert!(rows[1].starts_with("Autoencoder,"));

    let m = RunManifest::load(&a.join("manifest.json")).unwrap();
    let n = RunManifest::load(&b.join("manifest.json")).unwrap();
    assert_eq!(m.status, RunStatus::Success);
    assert!(!m.partial);
    assert_eq!(m.artifacts, n.artifacts);
    assert_eq!(m.config_hash, n.config_hash);
    assert!(aeromon::pipeline::verify_manifest(&a, &m).unwrap());
    assert!(!a.join(".aeromon.lock").exists());
}

#[test]
fn standalone_stages_reproduce_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let run = |args: &[&str]| {
        let mut full = vec!["--config", s(&cfg), "--out", s(&out)];
        full.extend_from_slice(args);
        let o = aeromon(&full);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    let hash = |name: &str| file_digest(&out.join(name)).unwrap().0;

    run(&["generate"]);
    run(&["split"]);
    let split = hash("test_features.csv");
    run(&["split"]);
    assert_eq!(split, hash("test_features.csv"));

    run(&["train-ae"]);
    let model = hash("ae_model.json");
    run(&["train-ae"]);
    assert_eq!(model, hash("ae_model.json"));

    run(&["calibrate"]);
    // labels are not needed to score
    let labels = out.join("test_labels.csv");
    let stash = tmp.path().join("labels.bak");
    std::fs::rename(&labels, &stash).unwrap();
    let scorer = out.join("scorer.json");
    run(&["score", "--model", s(&scorer)]);
    let scores = hash("predictions_autoencoder.csv");
    run(&["score", "--model", s(&scorer)]);
    assert_eq!(scores, hash("predictions_autoencoder.csv"));

    run(&["train-clf", "--kind", "knn", "--k", "3"]);
    let knn = std::fs::read_to_string(out.join("clf_knn.json")).unwrap();
    assert!(knn.contains(r#""config":{"kind":"knn","k":3}"#));
    run(&["score", "--model", s(&out.join("clf_knn.json"))]);
    std::fs::rename(&stash, &labels).unwrap();

    run(&["evaluate"]);
    run(&["compare"]);
    let comparison = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 3);
    run(&["histogram", "--bins", "5"]);
    let hist = std::fs::read_to_string(out.join("histograms.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 7 * 5);
}

#[test]
fn conflicting_sources_exit_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\nsynthetic = true\ncsv_path = \"x.csv\"\n");
    let o = aeromon(&["--config", s(&cfg), "--out", s(tmp.path()), "run"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one data source"));

    let cfg = write_config(tmp.path(), "seed = 1\nsynthetic = true\nbogus = 1\n");
    assert_eq!(code(&aeromon(&["--config", s(&cfg), "generate"])), 2);
    assert_eq!(code(&aeromon(&["generate"])), 2);
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_aeromon"))
        .args(["--seed", "1", "--out", "/nonexistent/never", "generate"])
        .env("AEROMON_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_inputs_and_locks_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = aeromon(&["--seed", "1", "--out", s(&out), "train-ae"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("aeromon split"));

    std::fs::write(out.join(".aeromon.lock"), "").unwrap();
    let o = aeromon(&["--seed", "1", "--out", s(&out), "run"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
    assert!(!out.join("data.csv").exists());
}

#[test]
fn degenerate_residuals_abort_with_numeric_exit_and_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("oat,mgt,pa,ias,np,cs,ot,label\n");
    for i in 0..400 {
        if i % 4 == 0 {
            let v = 1.0 + f64::from(i) / 100.0;
            csv += &format!("{v},{v},{v},{v},{v},{v},{v},anomalous\n");
        } else {
            csv += "1,2,3,4,5,6,7,normal\n";
        }
    }
    std::fs::write(tmp.path().join("flat.csv"), csv).unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\ncsv_path = \"flat.csv\"\nae_max_epochs = 5\n");
    let out = tmp.path().join("out");
    let o = aeromon(&["--config", s(&cfg), "--out", s(&out), "run"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert_eq!(m.failed_stage.as_deref(), Some("calibrate"));
    assert!(m.partial);
    assert!(m.artifacts.iter().any(|a| a.path == "ae_model.json"));
    assert!(!out.join(".aeromon.lock").exists());
}

#[test]
fn malformed_csv_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.csv"), "oat,mgt,pa,ias,np,cs,ot,label\n1,2,x,4,5,6,7,normal\n").unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\ncsv_path = \"bad.csv\"\n");
    let o = aeromon(&["--config", s(&cfg), "--out", s(&tmp.path().join("out")), "split"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));
}
