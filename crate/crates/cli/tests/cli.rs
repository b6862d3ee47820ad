use serde_json::Value;
use specconv::data::synth_separable_dataset;
use specconv::save_dataset;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn specconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specconv")).args(args).output().expect("spawn specconv")
}

fn dataset(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("sep.sgcd");
    save_dataset(&synth_separable_dataset(60, 3, 0.3, 1).unwrap(), &path).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args =
        vec!["train", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--K", "3", "--epochs", "15"];
    args.extend_from_slice(extra);
    specconv(&args)
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/metrics.schema.json");
    jsonschema::validator_for(&read_json(&path)).expect("schema compiles")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn metrics_match_schema_and_aggregate_rule() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let validator = schema();
    for runs in ["1", "3"] {
        let out = dir.path().join(format!("m{runs}.json"));
        let o = train(&data, &out, &["--runs", runs]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc = read_json(&out);
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}");
        assert_eq!(doc["runs"].as_array().unwrap().len(), runs.parse::<usize>().unwrap());
        assert_eq!(doc.get("aggregate").is_some(), runs != "1");
    }
}

#[test]
fn schema_rejects_broken_documents() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let out = dir.path().join("m.json");
    assert_eq!(code(&train(&data, &out, &["--runs", "2"])), 0);
    let validator = schema();
    let mut doc = read_json(&out);
    doc.as_object_mut().unwrap().remove("aggregate");
    assert!(!validator.is_valid(&doc));
    let mut doc = read_json(&out);
    doc["runs"][0]["best_val_accuracy"] = Value::from(1.5);
    assert!(!validator.is_valid(&doc));
}

#[test]
fn tucker_rank_is_echoed() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let out = dir.path().join("m.json");
    let o = train(&data, &out, &["--runs", "1", "--model", "tucker", "--R", "16", "--P", "5", "--Q", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&out);
    assert_eq!(doc["config"]["variant"], "tucker");
    assert_eq!(doc["config"]["ranks"]["r"], 16);
    assert_eq!(doc["config"]["ranks"]["p_dim"], 5);
    assert_eq!(doc["config"]["ranks"]["q"], 6);
}

#[test]
fn usage_errors_exit_2() {
    let o = specconv(&["train", "--out", "x.json"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--data") && err.contains("Usage"), "{err}");

    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let d = data.to_str().unwrap();
    assert_eq!(code(&specconv(&["train", "--data", d, "--no-such-flag"])), 2);
    assert_eq!(code(&specconv(&["train", "--data", d, "--basis", "hermite"])), 2);
    assert_eq!(code(&specconv(&["train", "--data", d, "--lr-group", "Z=0.1"])), 2);
    assert_eq!(code(&specconv(&["train", "--data", d, "--dropout-signals", "1.0"])), 2);
    assert_eq!(code(&specconv(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&specconv(&[])), 2);
}

#[test]
fn missing_dataset_file_exits_1() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.sgcd");
    let out = dir.path().join("m.json");
    assert_eq!(code(&train(&missing, &out, &[])), 1);
}

#[test]
fn repeated_training_is_identical() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    let flags = ["--runs", "2", "--lr-group", "C=0.05", "--dropout-signals", "0.5"];
    assert_eq!(code(&train(&data, &a, &flags)), 0);
    assert_eq!(code(&train(&data, &b, &flags)), 0);
    let mut flags_par = flags.to_vec();
    flags_par.push("--parallel");
    assert_eq!(code(&train(&data, &c, &flags_par)), 0);
    let strip = |p: &Path| {
        let mut v = read_json(p);
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a), strip(&c));

    let d = dir.path().join("d.json");
    let e = dir.path().join("e.json");
    assert_eq!(code(&train(&data, &d, &["--runs", "1", "--no-timing"])), 0);
    assert_eq!(code(&train(&data, &e, &["--runs", "1", "--no-timing"])), 0);
    assert_eq!(std::fs::read(&d).unwrap(), std::fs::read(&e).unwrap());
}

#[test]
fn eval_reproduces_recorded_accuracy() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let out = dir.path().join("m.json");
    let ck = dir.path().join("model.sgcp");
    let o =
        train(&data, &out, &["--runs", "2", "--seed", "4", "--model", "tucker", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&out);
    for (i, seed) in [4, 5].into_iter().enumerate() {
        let path = dir.path().join(format!("model-seed{seed}.sgcp"));
        let o = specconv(&["eval", "--data", data.to_str().unwrap(), "--checkpoint", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let acc: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
        assert_eq!(acc, doc["runs"][i]["test_accuracy_at_best_val"].as_f64().unwrap());
    }
}

#[test]
fn eval_masks_and_mismatches() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let out = dir.path().join("m.json");
    let ck = dir.path().join("model.sgcp");
    assert_eq!(code(&train(&data, &out, &["--runs", "1", "--checkpoint", ck.to_str().unwrap()])), 0);
    let d = data.to_str().unwrap();
    let c = ck.to_str().unwrap();

    let o = specconv(&["eval", "--data", d, "--checkpoint", c, "--mask", "train", "--K", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let acc: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let o = specconv(&["eval", "--data", d, "--checkpoint", c, "--K", "4"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("K = 3"));
    assert_eq!(code(&specconv(&["eval", "--data", d, "--checkpoint", c, "--model", "full"])), 1);

    let mut bytes = std::fs::read(&ck).unwrap();
    bytes.truncate(bytes.len() - 5);
    std::fs::write(&ck, bytes).unwrap();
    assert_eq!(code(&specconv(&["eval", "--data", d, "--checkpoint", c])), 1);
}

#[test]
fn verify_single_suite_and_seed() {
    let o = specconv(&["verify", "--suite", "gradients", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("gradients ") && r.ends_with("pass")), "{stdout}");
}

#[test]
fn verify_all_suites() {
    for seed in ["0", "3"] {
        let o = specconv(&["verify", "--seed", seed]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        let stdout = String::from_utf8(o.stdout).unwrap();
        for suite in ["oracle", "collapse", "basis", "gradients", "scalar"] {
            assert!(stdout.lines().any(|l| l.starts_with(suite)), "{suite} missing");
        }
    }
}

#[test]
fn bench_runs_on_a_small_graph() {
    let o = specconv(&["bench", "--nodes", "80", "--reps", "2", "--K", "4", "--R", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("forward+backward"));
}
