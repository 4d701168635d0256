use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cdrum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdrum")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({}): {}", e, String::from_utf8_lossy(&out.stdout))
    })
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HABIT: &str = r#"{"model":"habit","alternatives":["o","a","b"],"outside":"o",
    "v":{"o":0,"a":0.5,"b":-0.3},"c":{"o":[0],"a":[1.0],"b":[0.4]}}"#;

#[test]
fn sizes_prints_the_pair() {
    let out = cdrum(&["sizes", "--n", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"E_rows\":3110400,\"F_rows\":48768}\n");
}

#[test]
fn check_example2_holds() {
    let out = cdrum(&["check", "--input", path(&data("example2.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["cdrum"], true);
    for axiom in ["complete_monotonicity", "marginality"] {
        let r = v["reports"].as_array().unwrap().iter().find(|r| r["axiom"] == axiom).unwrap();
        assert_eq!(r["holds"], true, "{}", axiom);
    }
}

#[test]
fn check_example1_fails() {
    let out = cdrum(&["check", "--input", path(&data("example1.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["cdrum"], false);
}

#[test]
fn example4_is_not_state_independent() {
    let input = data("example4.json");
    assert_eq!(cdrum(&["check", "--input", path(&input)]).status.code(), Some(0));
    let out = cdrum(&["check", "--state-independent", "--input", path(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["si_cdrum"], false);
}

#[test]
fn facet_test_rejects_example1() {
    for numeric in ["rational", "float"] {
        let out = cdrum(&["test", "--form", "facet", "--numeric", numeric, "--input", path(&data("example1.json"))]);
        assert_eq!(out.status.code(), Some(1), "{}", numeric);
        let v = json(&out);
        assert!(v["result"]["statistic"].as_f64().unwrap() > v["result"]["threshold"].as_f64().unwrap());
    }
}

#[test]
fn vertex_test_accepts_example2() {
    let out = cdrum(&["test", "--form", "vertex", "--input", path(&data("example2.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["feasible"], true);
}

#[test]
fn limited_domain_stays_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let domain = dir.path().join("domain.json");
    std::fs::write(&domain, r#"{"periods":2,"observed":[[["x","y"],["x","y"]],[["x"],["x","y"]]]}"#).unwrap();
    for form in ["vertex", "facet"] {
        let out = cdrum(&[
            "test",
            "--form",
            form,
            "--input",
            path(&data("example2.json")),
            "--limited",
            domain.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", form);
        assert_eq!(json(&out)["observed"], 2);
    }
}

#[test]
fn recovered_representation_reproduces_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("rep.json");
    let out = cdrum(&["recover", "--input", path(&data("example3.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verification_gap"], 0.0);
    std::fs::write(&rep, &out.stdout).unwrap();
    let out = cdrum(&["simulate", "--from", rep.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, std::fs::read(data("example3.json")).unwrap());
}

#[test]
fn recover_refuses_inconsistent_data() {
    let out = cdrum(&["recover", "--input", path(&data("example1.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["cdrum"], false);
}

#[test]
fn habit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("habit.json");
    let dataset = dir.path().join("data.json");
    std::fs::write(&params, HABIT).unwrap();
    let out = cdrum(&["simulate", "--from", params.to_str().unwrap(), "--output", dataset.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let out = cdrum(&["fit", "--model", "habit", "--outside", "o", "--input", dataset.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let fitted = json(&out);
    assert!((fitted["v"]["a"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((fitted["c"]["b"][0].as_f64().unwrap() - 0.4).abs() < 1e-12);

    let out = cdrum(&["classify", "--input", dataset.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let class = json(&out);
    assert_eq!(class["consumption_dependent"], true);
    assert_eq!(class["habit_formation"], true);
    assert_eq!(class["variety"], false);

    std::fs::write(&params, fitted.to_string()).unwrap();
    let out = cdrum(&["predict-longrun", "--input", params.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let shares = json(&out)["shares"].clone();
    let total: f64 = ["o", "a", "b"].iter().map(|l| shares[l].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(shares["a"].as_f64().unwrap() > shares["o"].as_f64().unwrap());
}

#[test]
fn rational_logit_simulation_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("habit.json");
    std::fs::write(&params, HABIT).unwrap();
    let out = cdrum(&["simulate", "--from", params.to_str().unwrap(), "--numeric", "rational"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn simulated_mixtures_are_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.json");
    let first = cdrum(&["simulate", "--seed", "11", "--k", "4"]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, cdrum(&["simulate", "--seed", "11", "--k", "4"]).stdout);
    std::fs::write(&file, &first.stdout).unwrap();
    assert_eq!(cdrum(&["check", "--input", file.to_str().unwrap()]).status.code(), Some(0));

    let perturbed = cdrum(&["simulate", "--seed", "11", "--k", "4", "--perturb", "0.2"]);
    std::fs::write(&file, &perturbed.stdout).unwrap();
    assert_eq!(cdrum(&["check", "--input", file.to_str().unwrap()]).status.code(), Some(1));

    let sampled = cdrum(&["simulate", "--seed", "11", "--k", "4", "--agents", "500", "--numeric", "float"]);
    std::fs::write(&file, &sampled.stdout).unwrap();
    let out = cdrum(&["validate", "--input", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["numeric_mode"], "float");
}

#[test]
fn every_subcommand_prints_deterministic_json() {
    let e2 = data("example2.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["validate", "--input", path(&e2)],
        vec!["mobius", "--input", path(&e2)],
        vec!["mobius", "--input", path(&e2), "--depth", "1"],
        vec!["check", "--input", path(&e2)],
        vec!["recover", "--input", path(&e2)],
        vec!["test", "--form", "vertex", "--input", path(&e2)],
        vec!["test", "--form", "facet", "--input", path(&e2), "--extension-everywhere"],
        vec!["classify", "--input", path(&e2)],
        vec!["oracle", "--trials", "2", "--seed", "5", "--n", "2"],
    ];
    for args in runs {
        let a = cdrum(&args);
        let b = cdrum(&args);
        assert!(a.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&a.stderr));
        json(&a);
        assert_eq!(a.stdout, b.stdout, "{:?}", args);
    }
}

#[test]
fn input_errors_exit_2() {
    let out = cdrum(&["check", "--input", "/nonexistent/data.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"alternatives\": [\"x\"],\n \"periods\": }").unwrap();
    let out = cdrum(&["validate", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = cdrum(&["test", "--form", "diagonal", "--input", path(&data("example2.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}
