use std::path::{Path, PathBuf};

use assert_cmd::Command;
use serde_json::Value;

fn qbench() -> Command {
    Command::cargo_bin("qbench").unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = qbench().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

/// Structural equality with numbers compared to 1e-12 relative.
fn assert_json_close(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())), "{path}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}: length");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                assert_json_close(u, v, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            assert_eq!(kx, ky, "{path}: keys");
            for (k, u) in x {
                assert_json_close(u, &y[k], &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

fn spec_arg(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn benchmark_examples() {
    let q = run_ok(&["benchmark", "--family", "qudit", "--d", "2", "--N", "1", "--M", "1", "--beta", "0"]);
    let v: Value = serde_json::from_str(&q).unwrap();
    assert!((v["fidelity_threshold"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);

    let c = run_ok(&["benchmark", "--family", "coherent", "--N", "1", "--M", "1", "--lambda", "0", "--gain", "1"]);
    let v: Value = serde_json::from_str(&c).unwrap();
    assert_eq!(v["fidelity_threshold"].as_f64().unwrap(), 0.5);
    assert!(v["success_probability"].is_null());

    let p = run_ok(&["benchmark", "--family", "perelomov", "--j", "1.5", "--k", "1.5", "--N", "1", "--M", "1", "--beta", "95.79"]);
    let v: Value = serde_json::from_str(&p).unwrap();
    // (3 + β)/(6 + β)
    let expect = (3.0 + 95.79) / (6.0 + 95.79);
    assert!((v["fidelity_threshold"].as_f64().unwrap() - expect).abs() < 1e-14);
}

#[test]
fn benchmark_golden_files() {
    for (args, file) in [
        (&["--family", "qudit", "--d", "2", "--N", "1", "--M", "1", "--beta", "0"][..], "benchmark_qubit.json"),
        (&["--family", "coherent", "--N", "1", "--M", "1", "--lambda", "0", "--gain", "1"][..], "benchmark_coherent.json"),
        (
            &["--family", "perelomov", "--j", "1.5", "--k", "1.5", "--N", "1", "--M", "1", "--beta", "95.79"][..],
            "benchmark_cat.json",
        ),
    ] {
        let mut full = vec!["benchmark"];
        full.extend_from_slice(args);
        assert_eq!(run_ok(&full), golden(file), "{file}");
    }
}

#[test]
fn benchmark_output_round_trips() {
    let out = run_ok(&["benchmark", "--family", "spin", "--j", "1", "--k", "0.5", "--N", "2", "--M", "3", "--beta", "1.5"]);
    let parsed: qbench::benchmarks::BenchmarkValue = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(serde_json::to_string(&parsed).unwrap(), out.trim());
}

#[test]
fn benchmark_kweights_average_the_m_copy_thresholds() {
    let out = run_ok(&[
        "benchmark", "--family", "qudit", "--d", "2", "--N", "1", "--M", "2", "--beta", "0", "--kweights", "0.5,0.5",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    // (N+1)/(N+k+1) averaged over k = 1, 2
    let expect = 0.5 * (2.0 / 3.0) + 0.5 * (2.0 / 4.0);
    assert!((v["fidelity_threshold"].as_f64().unwrap() - expect).abs() < 1e-15);
    assert_eq!(v["formula_id"], "kcopy:qudit");
}

#[test]
fn invalid_flag_combinations_name_the_nearest_family() {
    let (code, _, err) = run(&["benchmark", "--family", "spin", "--d", "3", "--N", "1", "--M", "1"]);
    assert_eq!(code, 64);
    assert!(err.contains("nearest valid family for these flags: qudit"), "{err}");

    let (code, _, err) = run(&["benchmark", "--family", "qudit", "--lambda", "1", "--gain", "2", "--N", "1", "--M", "1"]);
    assert_eq!(code, 64);
    assert!(err.contains("coherent"), "{err}");

    let (code, _, err) = run(&["benchmark", "--family", "perelomv", "--j", "1", "--N", "1", "--M", "1"]);
    assert_eq!(code, 64);
    assert!(err.contains("nearest valid family: perelomov"), "{err}");
}

#[test]
fn invalid_values_are_usage_errors() {
    assert_eq!(run(&["benchmark", "--family", "qudit", "--d", "2", "--N", "0", "--M", "1"]).0, 64);
    assert_eq!(run(&["benchmark", "--family", "qudit", "--N", "1", "--M", "1"]).0, 64);
    assert_eq!(run(&["benchmark", "--family", "spin", "--j", "0.7", "--N", "1", "--M", "1"]).0, 64);
    assert_eq!(run(&["benchmark", "--family", "qudit", "--d", "2", "--N", "1"]).0, 64);
    assert_eq!(run(&["frobnicate"]).0, 64);
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["--version"]).0, 0);
}

#[test]
fn verify_acceptance_grid_passes_and_matches_golden() {
    let out = run_ok(&["verify", "--spec-file", &spec_arg("grid.json"), "--json"]);
    let got: Value = serde_json::from_str(&out).unwrap();
    let want: Value = serde_json::from_str(&golden("verify_grid.json")).unwrap();
    assert_json_close(&got, &want, "$");
    assert_eq!(got["all_passed"], true);
    // each row was checked against something beyond its own closed form
    for row in got["rows"].as_array().unwrap() {
        assert_eq!(row["oracle_fidelity"]["passed"], true, "{row}");
    }
}

#[test]
fn verify_table_reports_success() {
    let out = run_ok(&["verify", "--spec-file", &spec_arg("grid.json")]);
    assert!(out.trim_end().ends_with("all checks passed"), "{out}");
}

#[test]
fn corrupted_formula_id_fails_verification() {
    let (code, out, err) = run(&["verify", "--spec-file", &spec_arg("corrupted.json"), "--json"]);
    assert_eq!(code, 2, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["all_passed"], false);
    assert_eq!(v["rows"][0]["passed"], true);
    assert_eq!(v["rows"][1]["passed"], false);
    assert!(err.contains("spec(s) 1"), "{err}");
}

#[test]
fn unknown_formula_id_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"family":"qudit","d":2,"N":1,"M":1,"formula_id":"bogus"}"#).unwrap();
    let (code, out, _) = run(&["verify", "--spec-file", path.to_str().unwrap(), "--json"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["rows"][0]["error"].as_str().unwrap().contains("bogus"));
}

#[test]
fn monte_carlo_verification_is_deterministic() {
    let args = ["verify", "--spec-file", &spec_arg("grid.json"), "--scheme", "monte_carlo", "--seed", "42", "--json"];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b);
    let c = run_ok(&["verify", "--spec-file", &spec_arg("grid.json"), "--scheme", "monte-carlo", "--seed", "43", "--json"]);
    assert_ne!(a, c);
}

#[test]
fn verify_rejects_bad_inputs() {
    assert_eq!(run(&["verify", "--spec-file", &spec_arg("malformed.json")]).0, 65);
    let (code, _, err) = run(&["verify", "--spec-file", &spec_arg("malformed.json")]);
    assert_eq!(code, 65);
    assert!(err.contains("line 2"), "{err}");
    assert_eq!(run(&["verify", "--spec-file", "/no/such/file.json"]).0, 74);
    assert_eq!(run(&["verify", "--spec-file", &spec_arg("grid.json"), "--nodes", "3"]).0, 64);
    assert_eq!(
        run(&["verify", "--spec-file", &spec_arg("grid.json"), "--scheme", "monte_carlo", "--mc-samples", "10"]).0,
        64
    );
}

#[test]
fn simulate_optimal_mp_reproduces_the_qubit_threshold() {
    let out = run_ok(&["simulate", "--spec-file", &spec_arg("qubit.json"), "--trials", "1000000", "--seed", "7"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let pass = v["test_pass_rate"].as_f64().unwrap();
    let se = v["test_stderr"].as_f64().unwrap();
    assert!((pass - 2.0 / 3.0).abs() < 3.0 * se, "{pass} ± {se}");
    let f = v["conditional_fidelity"].as_f64().unwrap();
    assert!((f - 2.0 / 3.0).abs() < 3.0 * v["stderr"].as_f64().unwrap());
    assert_eq!(v["trials"], 1_000_000);
}

#[test]
fn simulate_srm_at_its_optimum() {
    let out = run_ok(&[
        "simulate", "--spec-file", &spec_arg("qubit_beta1.json"), "--strategy", "srm", "--trials", "200000", "--seed", "3",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let f = v["conditional_fidelity"].as_f64().unwrap();
    let se = v["stderr"].as_f64().unwrap();
    let exact = qbench::srm::srm_optimize(1.0).unwrap().fidelity_opt;
    assert!((f - exact).abs() < 3.0 * se, "{f} vs {exact} ± {se}");
    assert!((exact - 0.7277).abs() < 5e-4);
}

#[test]
fn simulate_is_seeded() {
    let args = ["simulate", "--spec-file", &spec_arg("qubit.json"), "--trials", "5000", "--seed", "11"];
    assert_eq!(run_ok(&args), run_ok(&args));
}

#[test]
fn simulate_usage_errors() {
    assert_eq!(run(&["simulate", "--spec-file", &spec_arg("qubit.json"), "--trials", "0"]).0, 64);
    assert_eq!(run(&["simulate", "--spec-file", &spec_arg("qubit.json"), "--index", "4"]).0, 64);
    assert_eq!(run(&["simulate", "--spec-file", &spec_arg("qubit.json"), "--strategy", "greedy"]).0, 64);
}

#[test]
fn sweep_qubit_grid() {
    let out = run_ok(&["sweep", "--family", "qudit", "--d", "2", "--N-range", "1..4", "--M-range", "1..4", "--width-grid", "0"]);
    assert_eq!(out, golden("sweep_qubit.csv"));
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["family", "d_or_j", "k", "N", "M", "beta", "lambda", "F_c", "p_yes"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 16);
    // row-major: N outer, M inner
    for (i, r) in rows.iter().enumerate() {
        let n = (i / 4) as f64 + 1.0;
        let m_expected = (i % 4) as f64 + 1.0;
        assert_eq!(r[3].parse::<f64>().unwrap(), n);
        assert_eq!(r[4].parse::<f64>().unwrap(), m_expected);
        let f: f64 = r[7].parse().unwrap();
        assert!((f - (n + 1.0) / (n + m_expected + 1.0)).abs() < 1e-15);
    }
    assert!(!out.contains('\r'));
}

#[test]
fn sweep_gaussian_and_perelomov_cells() {
    let out = run_ok(&["sweep", "--family", "gaussian-1mode", "--N-range", "1..3", "--M-range", "1..3", "--width-grid", "0,1", "--lambda-grid", "0,2"]);
    assert_eq!(out, golden("sweep_gaussian.csv"));
    let first = out.lines().nth(1).unwrap();
    assert_eq!(first, "gaussian_1mode,,,1,1,0,0,0.25,");

    let out = run_ok(&["sweep", "--family", "perelomov", "--j", "1.5", "--k", "1.5", "--N-range", "1", "--M-range", "1", "--width-grid", "4"]);
    let cell: f64 = out.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
    assert!((cell - 0.7).abs() < 1e-15);
}

#[test]
fn sweep_writes_files_and_reports_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    run_ok(&["sweep", "--family", "squeezed_vacuum", "--N-range", "1,2", "--M-range", "3", "--width-grid", "1", "--out", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    let (code, _, _) = run(&["sweep", "--family", "qudit", "--d", "2", "--N-range", "1", "--M-range", "1", "--out", "/no/such/dir/x.csv"]);
    assert_eq!(code, 74);
    assert_eq!(run(&["sweep", "--family", "qudit", "--d", "2", "--N-range", "3..1", "--M-range", "1"]).0, 64);
    assert_eq!(run(&["sweep", "--family", "coherent", "--N-range", "1", "--M-range", "1", "--width-grid", "1"]).0, 64);
}

#[test]
fn certify_examples() {
    let out = run_ok(&["certify", "--experiment-file", &spec_arg("exp_quantum.json")]);
    assert_eq!(out, golden("certify_quantum.json"));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["certified_quantum"], true);

    let out = run_ok(&["certify", "--experiment-file", &spec_arg("exp_at_threshold.json")]);
    assert_eq!(out, golden("certify_at_threshold.json"));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["certified_quantum"], false);

    // z = 10 falls short of a stricter threshold
    let out = run_ok(&["certify", "--experiment-file", &spec_arg("exp_quantum.json"), "--z", "12"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["certified_quantum"], false);
    assert_eq!(v["z_threshold"], 12.0);
}

#[test]
fn certify_data_errors() {
    let (code, _, err) = run(&["certify", "--experiment-file", &spec_arg("exp_malformed.json")]);
    assert_eq!(code, 65);
    assert!(err.contains("line 2 column"), "{err}");
    assert_eq!(run(&["certify", "--experiment-file", &spec_arg("exp_bad_schema.json")]).0, 65);
    let (code, _, err) = run(&["certify", "--experiment-file", &spec_arg("exp_unknown_family.json")]);
    assert_eq!(code, 65);
    assert!(err.contains("cat"), "{err}");
}
