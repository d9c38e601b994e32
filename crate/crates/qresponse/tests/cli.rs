use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_qresponse");

fn run(command: &str, config: &Value, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.join(format!("{command}-config.json"));
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(BIN)
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

/// The single hash-named artifact directory under `out`.
fn artifact_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn error_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("stderr carries a record");
    serde_json::from_str(last).expect("record is JSON")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).expect("schema compiles")
}

fn assert_valid(name: &str, value: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

fn doubling() -> Value {
    json!({
        "base_process": { "kind": "iid", "weights": [1.0] },
        "map_family": { "builtin": "doubling" },
        "observable": { "uniform": [{ "freq": 1, "cos": 1.0 }] },
        "seed": 1,
        "grid_resolution": 256,
        "pullback_depth": 60
    })
}

fn nonlinear() -> Value {
    json!({
        "base_process": { "kind": "iid", "weights": [0.5, 0.5] },
        "map_family": { "builtin": "nonlinear_pair" },
        "observable": { "uniform": [{ "freq": 1, "cos": 1.0 }, { "freq": 2, "sin": 0.3 }] },
        "seed": 5,
        "grid_resolution": 128,
        "pullback_depth": 60,
        "n_max": 20,
        "omega_samples": 3,
        "options": { "n_terms": 60, "mc_orbits": 200, "mc_steps": 100 }
    })
}

#[test]
fn density_of_the_doubling_map_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("density", &doubling(), tmp.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = artifact_dir(tmp.path());
    let h = csv_column(&dir.join("density.csv"), 1);
    assert_eq!(h.len(), 256);
    assert!(h.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    let text = fs::read_to_string(dir.join("density.csv")).unwrap();
    assert!(text.starts_with("x,h\n") && !text.contains('\r'));
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0.0000000000000000e0,"));
    assert_valid("config", &read_json(&dir.join("config.json")));
}

#[test]
fn response_report_for_the_closed_form_family() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = doubling();
    cfg["map_family"] = json!({ "builtin": "doubling_sin4pi" });
    cfg["eps_ladder"] = json!([1e-2, 3e-3, 1e-3, 3e-4]);
    let out = run("response", &cfg, tmp.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = artifact_dir(tmp.path());
    let r = read_json(&dir.join("response_report.json"));
    assert_valid("response_report", &r);
    let a = r["fitted_a"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&a), "{a}");
    let hat = csv_column(&dir.join("hat_h.csv"), 1);
    let x = csv_column(&dir.join("hat_h.csv"), 0);
    for (x, v) in x.iter().zip(&hat) {
        assert!(
            (v + 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos()).abs() < 1e-6
        );
    }
}

#[test]
fn alphabet_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = doubling();
    cfg["base_process"] = json!({ "kind": "iid", "weights": [0.5, 0.5] });
    let out = run("density", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_valid("error", &rec);
    assert_eq!(rec["error"]["field"], "base_process.weights");
    assert_eq!(rec["error"]["exit_code"], 2);

    let mut cfg = nonlinear();
    cfg["observable"] = json!({ "per_symbol": [[{ "freq": 1, "cos": 1.0 }], [], []] });
    let out = run("variance", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        error_record(&out)["error"]["field"],
        "observable.per_symbol"
    );
}

#[test]
fn parse_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            json!({ "freq": 1, "cosine": 1.0 }),
            "observable.uniform[0].cosine",
        ),
        (
            json!({ "freq": -1, "cos": 1.0 }),
            "observable.uniform[0].freq",
        ),
    ];
    for (term, field) in cases {
        let mut cfg = doubling();
        cfg["observable"] = json!({ "uniform": [term] });
        let out = run("density", &cfg, tmp.path(), &[]);
        assert_eq!(out.status.code(), Some(2));
        let rec = error_record(&out);
        assert_eq!(rec["error"]["field"], field, "{rec}");
    }
    let mut cfg = doubling();
    cfg["grid_resolution"] = json!(100);
    let out = run("density", &cfg, tmp.path(), &[]);
    assert_eq!(error_record(&out)["error"]["field"], "grid_resolution");
    let mut cfg = doubling();
    cfg["map_family"] = json!({ "builtin": "tripling" });
    let out = run("density", &cfg, tmp.path(), &[]);
    assert_eq!(error_record(&out)["error"]["field"], "map_family.builtin");
    let mut cfg = doubling();
    cfg["map_family"] = json!({ "eps_max": 0.05, "symbols": [{ "degree": 2, "base": [{ "freq": 1, "sin": 0.2 }] }] });
    let out = run("density", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["error"]["field"]
        .as_str()
        .unwrap()
        .starts_with("map_family"));
    assert!(fs::read_dir(tmp.path())
        .unwrap()
        .all(|e| !e.unwrap().path().is_dir()));
}

#[test]
fn short_windows_overflow() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = doubling();
    cfg["options"] = json!({ "window_half_width": 10 });
    let out = run("density", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    let rec = error_record(&out);
    assert_valid("error", &rec);
    assert_eq!(rec["error"]["kind"], "window_overflow");
    let err = read_json(&artifact_dir(tmp.path()).join("error.json"));
    assert_eq!(err, rec);
}

#[test]
fn every_command_emits_schema_valid_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = nonlinear();
    for c in [
        "density",
        "response",
        "correlations",
        "variance",
        "annealed",
        "cone",
    ] {
        let out = run(c, &cfg, tmp.path(), &[]);
        assert!(
            out.status.success(),
            "{c}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let dir = artifact_dir(tmp.path());
    for (file, schema_name) in [
        ("response_report.json", "response_report"),
        ("variance_report.json", "variance_report"),
        ("annealed_report.json", "annealed_report"),
        ("cone_report.json", "cone_report"),
        ("config.json", "config"),
    ] {
        assert_valid(schema_name, &read_json(&dir.join(file)));
    }
    let decay = fs::read_to_string(dir.join("decay.csv")).unwrap();
    assert!(decay.starts_with("n,correlation,decay_norm,decay_envelope\n"));
    assert_eq!(decay.lines().count(), 21);
    let cone = fs::read_to_string(dir.join("cone_profile.csv")).unwrap();
    assert_eq!(cone.lines().count(), 42);
    let d = csv_column(&dir.join("cone_profile.csv"), 1);
    assert!(d.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let v = read_json(&dir.join("variance_report.json"));
    assert!(v["monte_carlo"]["within_3_se"].as_bool().unwrap(), "{v}");
}

#[test]
fn artifacts_do_not_depend_on_threads() {
    let cfg = nonlinear();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let tmp = tempfile::tempdir().unwrap();
        for c in ["variance", "annealed", "cone"] {
            let out = run(c, &cfg, tmp.path(), &["--threads", threads]);
            assert!(out.status.success());
        }
        let dir = artifact_dir(tmp.path());
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push((dir.file_name().unwrap().to_owned(), files));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn hash_ignores_formatting_but_not_content() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = doubling();
    let path = tmp.path().join("a.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let a = qresponse::ExperimentConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    let b = qresponse::ExperimentConfig::from_json(&serde_json::to_string_pretty(&cfg).unwrap())
        .unwrap();
    assert_eq!(a.hash(), b.hash());
    let mut other = cfg.clone();
    other["seed"] = json!(2);
    let c = qresponse::ExperimentConfig::from_json(&other.to_string()).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("density", &doubling(), tmp.path(), &["--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["field"], "--threads");
}
