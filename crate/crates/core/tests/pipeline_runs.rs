use std::fs;
use std::path::Path;

use cadomics::pipeline::{phantom_feature_table, read_scores, run, Command, PipelineConfig};
use cadomics::table::FeatureTable;

fn small_config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.phantom.patients = 24;
    c.phantom.seed = 5;
    c.gbdt.iterations = 20;
    c.gbdt.learning_rate = 0.1;
    c.gbdt.depth = 3;
    c.selection.top_k = 10;
    c.selection.folds = 3;
    c.evaluation.k = 3;
    c.evaluation.repeats = 2;
    c.set_threads(2);
    c.out_dir = out.to_path_buf();
    c
}

fn phantom_and_extract(root: &Path) -> PipelineConfig {
    let mut c = small_config(&root.join("phantom"));
    let s = run(Command::Phantom, &c).unwrap();
    assert!(s.success(), "{:?}", s.failures);
    c.manifest = Some(root.join("phantom/manifest.csv"));
    c.out_dir = root.join("extract");
    let s = run(Command::Extract, &c).unwrap();
    assert!(s.success(), "{:?}", s.failures);
    assert_eq!(s.items, 24);
    c.features = Some(root.join("extract/features.csv"));
    c
}

#[test]
fn extract_from_disk_matches_in_memory_table() {
    let dir = tempfile::tempdir().unwrap();
    let c = phantom_and_extract(dir.path());
    let on_disk = fs::read_to_string(dir.path().join("extract/features.csv")).unwrap();
    let in_memory = phantom_feature_table(&c).unwrap();
    assert_eq!(on_disk, in_memory.to_csv_string());
    assert_eq!(in_memory.n_rows(), 24);
    assert_eq!(in_memory.n_cols(), 424);
    for f in ["calcium.csv", "fat.csv", "registry_clinical.csv", "registry_calcium.csv", "registry_fat.csv", "run_summary.json"] {
        assert!(dir.path().join("extract").join(f).is_file(), "{f}");
    }
}

#[test]
fn missing_mask_is_reported_per_patient() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(&dir.path().join("phantom"));
    c.phantom.patients = 4;
    run(Command::Phantom, &c).unwrap();
    fs::remove_file(dir.path().join("phantom/phantoms/PH0002_pericardium.json")).unwrap();

    c.manifest = Some(dir.path().join("phantom/manifest.csv"));
    c.out_dir = dir.path().join("extract");
    let s = run(Command::Extract, &c).unwrap();
    assert!(!s.success());
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].item, "PH0002");

    let table = FeatureTable::read_csv(dir.path().join("extract/features.csv")).unwrap();
    assert_eq!(table.patient_ids(), ["PH0000", "PH0001", "PH0003"]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("extract/run_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn missing_manifest_is_an_error_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.manifest = Some(dir.path().join("nope.csv"));
    assert!(run(Command::Extract, &c).is_err());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_summary.json")).unwrap()).unwrap();
    assert!(summary["error"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn select_train_evaluate_compare() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = phantom_and_extract(dir.path());

    c.out_dir = dir.path().join("select");
    assert!(run(Command::Select, &c).unwrap().success());
    let selected = fs::read_to_string(dir.path().join("select/selected_features.txt")).unwrap();
    assert_eq!(selected.lines().count(), 10);
    let importance = fs::read_to_string(dir.path().join("select/importance.csv")).unwrap();
    assert!(importance.starts_with("feature,mean_abs_shap,rank,selected\n"));

    c.selected_features = Some(dir.path().join("select/selected_features.txt"));
    c.out_dir = dir.path().join("train");
    assert!(run(Command::Train, &c).unwrap().success());
    let model = cadomics::gbdt::Model::load(dir.path().join("train/model.json")).unwrap();
    let mut names = model.feature_names.clone();
    let mut expected: Vec<String> = selected.lines().map(String::from).collect();
    names.sort();
    expected.sort();
    assert_eq!(names, expected);

    c.out_dir = dir.path().join("evaluate");
    assert!(run(Command::Evaluate, &c).unwrap().success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("evaluate/report.json")).unwrap()).unwrap();
    for m in ["sensitivity", "specificity", "accuracy", "f1", "auroc", "auprc"] {
        assert!(report["aggregate"][m]["mean"].is_number(), "{m}");
        assert!(report["aggregate"][m]["sd"].is_number(), "{m}");
    }
    assert_eq!(report["per_repeat"].as_array().unwrap().len(), 2);
    for f in ["roc.csv", "pr.csv", "scores.csv"] {
        assert!(dir.path().join("evaluate").join(f).is_file(), "{f}");
    }

    let scores = dir.path().join("evaluate/scores.csv");
    assert_eq!(read_scores(&scores).unwrap().scores.len(), 24);
    c.compare.scores_a = Some(scores.clone());
    c.compare.scores_b = Some(scores);
    c.out_dir = dir.path().join("compare");
    assert!(run(Command::Compare, &c).unwrap().success());
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("compare/compare.json")).unwrap()).unwrap();
    assert_eq!(cmp["delong"]["p"].as_f64(), Some(1.0));
    assert_eq!(cmp["mcnemar"]["p"].as_f64(), Some(1.0));
}

#[test]
fn gridsearch_marks_one_best_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = phantom_and_extract(dir.path());
    c.gridsearch.depths = vec![2, 3];
    c.gridsearch.learning_rates = vec![0.05, 0.2];
    c.gridsearch.iterations = vec![10];
    c.gridsearch.repeats = 1;
    c.out_dir = dir.path().join("grid");
    assert!(run(Command::Gridsearch, &c).unwrap().success());
    let text = fs::read_to_string(dir.path().join("grid/gridsearch.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let best = reader.headers().unwrap().iter().position(|h| h == "best").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| &r[best] == "true").count(), 1);
    let toml_text = fs::read_to_string(dir.path().join("grid/best_gbdt.toml")).unwrap();
    assert!(!toml_text.contains("threads"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = phantom_and_extract(a.path());
    let mut cb = phantom_and_extract(b.path());
    cb.set_threads(1);
    let fa = fs::read(a.path().join("extract/features.csv")).unwrap();
    let fb = fs::read(b.path().join("extract/features.csv")).unwrap();
    assert_eq!(fa, fb);
    for (c, root) in [(ca, a.path()), (cb, b.path())] {
        let mut c = c;
        c.out_dir = root.join("evaluate");
        run(Command::Evaluate, &c).unwrap();
    }
    assert_eq!(
        fs::read(a.path().join("evaluate/report.json")).unwrap(),
        fs::read(b.path().join("evaluate/report.json")).unwrap()
    );
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "manifest = \"data/manifest.csv\"\nout_dir = \"out\"\ngroup = \"clinical+calcium\"\n[gbdt]\ndepth = 4\n",
    )
    .unwrap();
    let c = PipelineConfig::load(&path).unwrap();
    assert_eq!(c.manifest.unwrap(), dir.path().join("data/manifest.csv"));
    assert_eq!(c.out_dir, dir.path().join("out"));
    assert_eq!(c.gbdt.depth, 4);
    assert_eq!(c.group.name(), "clinical+calcium");

    fs::write(&path, "[gbdt]\ndepht = 4\n").unwrap();
    assert!(PipelineConfig::load(&path).is_err());
}
