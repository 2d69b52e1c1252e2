use std::path::Path;
use std::process::{Command, Output};

use kbann::oracle::{load_samples, PLL_FOMS, PLL_TARGETS};
use kbann::PllOracle;
use serde_json::Value;

fn kbann(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbann")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kbann(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    kbann(dir, args).status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn space_file(dir: &Path) {
    let text = r#"{"format_version":"1.0","parameters":[
        {"name":"a","lower":0.0,"upper":1.0,"nominal":0.5},
        {"name":"b","lower":-2.0,"upper":2.0,"nominal":0.0}]}"#;
    std::fs::write(dir.join("space.json"), text).unwrap();
}

#[test]
fn sample_is_stratified_and_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    space_file(dir);
    ok(dir, &["sample", "--space", "space.json", "--n", "4", "--seed", "3", "--out", "a.csv"]);
    ok(dir, &["sample", "--space", "space.json", "--n", "4", "--seed", "3", "--out", "b.csv"]);
    assert_eq!(std::fs::read(dir.join("a.csv")).unwrap(), std::fs::read(dir.join("b.csv")).unwrap());
    let space = kbann::ParameterSpace::load(dir.join("space.json")).unwrap();
    let set = load_samples(dir.join("a.csv"), &space, None).unwrap();
    for k in 0..2 {
        let mut bins: Vec<usize> = set.inputs.iter().map(|u| (u[k] * 4.0).floor() as usize).collect();
        bins.sort_unstable();
        assert_eq!(bins, vec![0, 1, 2, 3]);
    }
    let manifest = json(&dir.join("a.csv.manifest.json"));
    assert_eq!(manifest["command"], "sample");
    assert_eq!(manifest["seeds"]["lhs"], 3);
    assert!(manifest["timings"].is_object());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(dir, &["sample", "--n", "0", "--out", "z.csv"]), 2);
    assert_eq!(code(dir, &["sample", "--no-such-flag"]), 2);
    assert_eq!(code(dir, &["sample", "--space", "missing.json", "--out", "z.csv"]), 3);
    assert_eq!(code(dir, &["sample", "--n", "5", "--out", "no/such/dir/z.csv"]), 3);
    ok(dir, &["sample", "--n", "12", "--out", "s.csv"]);
    assert_eq!(code(dir, &["simulate", "--samples", "s.csv", "--foms", "", "--out", "x.csv"]), 2);
    assert_eq!(code(dir, &["simulate", "--samples", "s.csv", "--foms", "gain", "--out", "x.csv"]), 2);
    assert_eq!(code(dir, &["fit", "--samples", "s.csv", "--out-bundle", "b"]), 2);
    ok(dir, &["simulate", "--samples", "s.csv", "--foms", "power", "--out", "p.csv"]);
    assert_eq!(code(dir, &["fit", "--samples", "p.csv", "--foms", "jitter", "--out-bundle", "b"]), 2);
    assert_eq!(code(dir, &["mc", "--bundle", "nowhere", "--out", "m.json"]), 3);
    assert_eq!(code(dir, &["optimize", "--sense", "sideways", "--out", "o.json"]), 2);
}

#[test]
fn simulate_nominal_gives_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let oracle = PllOracle::builtin();
    let space = oracle.space();
    let header = space.names().join(",");
    let row: Vec<String> = space.nominal().iter().map(|v| format!("{v:e}")).collect();
    std::fs::write(dir.join("nominal.csv"), format!("{header}\n{}\n", row.join(","))).unwrap();
    ok(dir, &["simulate", "--samples", "nominal.csv", "--out", "out.csv"]);
    let set = load_samples(dir.join("out.csv"), space, None).unwrap();
    for (name, target) in PLL_FOMS.iter().zip(PLL_TARGETS) {
        let v = set.response(name).unwrap()[0];
        assert!((v - target).abs() <= 1e-9 * target, "{name}: {v}");
    }
}

#[test]
fn external_responses_are_merged() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    space_file(dir);
    ok(dir, &["sample", "--space", "space.json", "--n", "3", "--out", "s.csv"]);
    std::fs::write(dir.join("r.csv"), "gain,noise\n1,2\n3,4\n5,6\n").unwrap();
    ok(dir, &["simulate", "--samples", "s.csv", "--space", "space.json", "--responses", "r.csv", "--foms", "noise", "--out", "o.csv"]);
    let space = kbann::ParameterSpace::load(dir.join("space.json")).unwrap();
    let set = load_samples(dir.join("o.csv"), &space, None).unwrap();
    assert_eq!(set.fom_names(), vec!["noise"]);
    assert_eq!(set.response("noise").unwrap(), &[2.0, 4.0, 6.0]);
    std::fs::write(dir.join("short.csv"), "gain\n1\n").unwrap();
    assert_eq!(code(dir, &["simulate", "--samples", "s.csv", "--space", "space.json", "--responses", "short.csv", "--out", "o.csv"]), 2);
}

#[test]
fn fit_mc_optimize_bench_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["sample", "--n", "30", "--seed", "2", "--out", "s.csv"]);
    ok(dir, &["simulate", "--samples", "s.csv", "--out", "sim.csv"]);
    let table = ok(dir, &["fit", "--samples", "sim.csv", "--bootstrap", "off", "--hidden", "4", "--max-epochs", "30", "--out-bundle", "b"]);
    for fom in PLL_FOMS {
        assert!(table.contains(fom), "{table}");
    }
    let bundle = json(&dir.join("b/bundle.json"));
    assert_eq!(bundle["provenance"]["bootstrap"], false);
    assert_eq!(bundle["foms"].as_array().unwrap().len(), 4);
    assert!(dir.join("b.manifest.json").exists());

    ok(dir, &["mc", "--bundle", "b", "--runs", "50", "--sigma-frac", "0", "--out", "mc0.json", "--dump-raw", "raw.csv"]);
    let report = json(&dir.join("mc0.json"));
    for fom in PLL_FOMS {
        assert_eq!(report["foms"][fom]["std"], 0.0);
    }
    let raw = std::fs::read_to_string(dir.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 51);
    assert_eq!(raw.lines().next().unwrap().split(',').count(), 25);

    let printed = ok(dir, &["optimize", "--bundle", "b", "--particles", "6", "--iters", "1", "--mc-runs", "20", "--final-runs", "50", "--out", "o1.json"]);
    assert!(printed.contains("initial mean") && printed.contains("constraint"), "{printed}");
    let one = json(&dir.join("o1.json"));
    assert_eq!(one["best_x"], one["initial_best_x"]);
    assert_eq!(one["trace"].as_array().unwrap().len(), 1);
    assert_eq!(one["objective"]["k_sigma"], 3.0);
    assert_eq!(one["objective"]["target"], "power");

    // the optimum feeds straight back into mc
    ok(dir, &["optimize", "--bundle", "b", "--particles", "6", "--iters", "5", "--mc-runs", "20", "--final-runs", "50", "--unconstrained", "--out", "o.json"]);
    let opt = json(&dir.join("o.json"));
    assert!(opt["objective"]["constraint"].is_null());
    ok(dir, &["mc", "--bundle", "b", "--nominal", "o.json", "--runs", "20", "--out", "mc.json"]);
    assert_eq!(json(&dir.join("mc.json"))["nominal"], opt["best_x"]);

    ok(dir, &["bench", "--bundle", "b", "--samples-n", "50", "--repeats", "1", "--out", "bench.json"]);
    let bench = json(&dir.join("bench.json"));
    assert_eq!(bench["queries"], 50);
    assert_eq!(bench["training_points"], 30);
    assert!(bench["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(json(&dir.join("bench.json.manifest.json"))["parameters"]["samples_n"], 50);
}

#[test]
fn threads_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["mc", "--runs", "200", "--seed", "9", "--out", "a.json"]);
    ok(dir, &["--threads", "2", "mc", "--runs", "200", "--seed", "9", "--out", "b.json"]);
    assert_eq!(std::fs::read(dir.join("a.json")).unwrap(), std::fs::read(dir.join("b.json")).unwrap());
    assert_eq!(code(dir, &["--threads", "0", "mc", "--out", "c.json"]), 2);
}
