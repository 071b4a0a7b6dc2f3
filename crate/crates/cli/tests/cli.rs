use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rpw_core::field::{IntensityLaw, LazyPointField};
use rpw_core::seeds::derive;
use rpw_core::ModelParams;

fn rpw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpw"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("RPW_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn sample_web_with_zero_trials_writes_manifest_only() {
    let d = tempfile::tempdir().unwrap();
    let o = rpw(d.path(), &["sample-web", "--trials", "0", "--n", "1000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<_> = fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["manifest.json"]);
    let m: serde_json::Value = serde_json::from_str(&read(d.path(), "manifest.json")).unwrap();
    assert_eq!(m["run"]["paths_written"], 0);
    assert!((m["derived"]["sigma2"].as_f64().unwrap() - 0.37612).abs() < 1e-4);
}

#[test]
fn sample_web_writes_one_path_per_start_point() {
    let d = tempfile::tempdir().unwrap();
    let o = rpw(d.path(), &["sample-web", "--n", "200", "--seed", "4", "--trials", "1000000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // count P ∩ Λ_n independently, straight from the field
    let p = ModelParams::with_n(200.0).unwrap();
    let mut f = LazyPointField::new(derive(4, "web", 0), IntensityLaw::Unit);
    let mut count = 0;
    f.visit_box([-200.0, 200.0, -200.0, 0.0], |q| count += p.in_lambda(q) as usize).unwrap();
    assert!(count > 0);
    for file in ["gamma.jsonl", "hat_gamma.jsonl", "transformed.jsonl", "rescaled.jsonl", "bridge.jsonl"] {
        let text = read(d.path(), file);
        assert_eq!(text.lines().count(), count, "{file}");
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(first["vertices"].as_array().unwrap().len() >= 2);
    }
    let m: serde_json::Value = serde_json::from_str(&read(d.path(), "manifest.json")).unwrap();
    assert_eq!(m["run"]["lambda_n_points"], count);
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sample-web", "--n", "1000", "--trials", "25", "--seed", "9"];
    assert_eq!(code(&rpw(a.path(), &args)), 0);
    assert_eq!(code(&rpw(b.path(), &args)), 0);
    for f in ["gamma.jsonl", "bridge.jsonl"] {
        assert_eq!(read(a.path(), f), read(b.path(), f));
    }
    // the manifest embeds the output directory, so compare the rest
    let strip = |d: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&read(d, "manifest.json")).unwrap();
        v["config"]["output_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn verify_lln_passes_on_defaults() {
    let d = tempfile::tempdir().unwrap();
    let o = rpw(d.path(), &["verify", "--suite", "lln"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(read(d.path(), "lln.csv").starts_with("r,dev\n"));
    let reports: serde_json::Value = serde_json::from_str(&read(d.path(), "lln.json")).unwrap();
    assert_eq!(reports[0]["pass"], true);
}

#[test]
fn verify_variance_with_wrong_rate_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = rpw(
        d.path(),
        &["verify", "--suite", "variance", "--suite-n", "10000", "--suite-trials", "2000", "--expected-sigma2", "0.188"],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL variance_rate"));
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpw(d.path(), &["sample-web", "--alpha", "1.5"])), 2);
    assert_eq!(code(&rpw(d.path(), &["verify", "--suite", "nonsense"])), 2);
    assert_eq!(code(&rpw(d.path(), &["export-plotdata", "nonsense"])), 2);
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"n": 1000, "colour": "red"}"#).unwrap();
    assert_eq!(code(&rpw(d.path(), &["sample-web", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn flags_override_file_and_env_is_a_fallback() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"n": 500, "trials": 0}"#).unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rpw"));
        c.args(["sample-web", "--config", cfg.to_str().unwrap(), "--output-dir"]).arg(d.path()).args(extra);
        match env {
            Some(s) => c.env("RPW_SEED", s),
            None => c.env_remove("RPW_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        let m: serde_json::Value = serde_json::from_str(&read(d.path(), "manifest.json")).unwrap();
        (m["config"]["n"].as_f64().unwrap(), m["config"]["seed"].as_u64().unwrap())
    };
    assert_eq!(run(&[], None), (500.0, 1));
    assert_eq!(run(&[], Some("77")), (500.0, 77));
    assert_eq!(run(&["--n", "800", "--seed", "5"], Some("77")), (800.0, 5));
}

#[test]
fn export_plotdata_headers() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpw(d.path(), &["export-plotdata", "lln", "--suite-trials", "20"])), 0);
    assert!(read(d.path(), "plot_lln.csv").starts_with("r,empirical,limit\n"));
    assert_eq!(code(&rpw(d.path(), &["export-plotdata", "bridge"])), 0);
    assert!(read(d.path(), "plot_bridge.csv").starts_with("path,x,t\n"));
    let o = rpw(d.path(), &["export-plotdata", "coaltail", "--suite-n", "1000", "--suite-trials", "1500"]);
    assert_eq!(code(&o), 0);
    let plot = read(d.path(), "plot_coaltail.csv");
    assert!(plot.starts_with("log_t,log_survival\n"));
    assert!(plot.lines().count() > 5);
}

#[test]
fn job_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["verify", "--suite", "increments", "--suite-trials", "300"];
    let mut one = args.to_vec();
    one.extend(["--jobs", "1"]);
    let mut three = args.to_vec();
    three.extend(["--jobs", "3"]);
    rpw(a.path(), &one);
    rpw(b.path(), &three);
    assert_eq!(read(a.path(), "increments.json"), read(b.path(), "increments.json"));
    assert_eq!(read(a.path(), "increments.csv"), read(b.path(), "increments.csv"));
}
