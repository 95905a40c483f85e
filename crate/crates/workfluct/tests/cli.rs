use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_workfluct"));
    c.env_remove("WORKFLUCT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn workfluct")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stdout));
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Diagonal H and H', U = 1.
fn write_commuting(dir: &Path) -> PathBuf {
    let path = dir.join("commuting.json");
    let v = serde_json::json!({
        "dim": 2,
        "beta": 1.0,
        "H": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
        "H_prime": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]],
        "U": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
    });
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn write_random(dir: &Path, dim: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("random_{dim}_{seed}.json"));
    let o = run(&[
        "random-process",
        "--dim",
        &dim.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        s(&path),
    ]);
    assert_eq!(code(&o), 0);
    path
}

fn build(kind: &str, process: &Path, out: &Path) {
    let o = run(&[
        "build-scheme",
        "--kind",
        kind,
        "--process",
        s(process),
        "--out",
        s(out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').filter_map(|x| x.parse().ok()).collect())
        .collect();
    (header, rows)
}

#[test]
fn verify_tpm_on_commuting_process() {
    let dir = TempDir::new().unwrap();
    let p = write_commuting(dir.path());
    let scheme = dir.path().join("tpm.json");
    build("tpm", &p, &scheme);
    let o = run(&["verify", "--scheme", s(&scheme), "--process", s(&p)]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    assert!(r["xi"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(r["passed"], true);
}

#[test]
fn verify_reports_condition_i_failure_of_tpm() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 3, 5);
    let scheme = dir.path().join("tpm.json");
    build("tpm", &p, &scheme);
    let o = run(&["verify", "--scheme", s(&scheme), "--process", s(&p)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["condition_i"], false);
}

#[test]
fn verify_modified_schemes_pass_with_positive_xi() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 3, 6);
    for kind in ["how", "circuit1", "circuit2", "epsv"] {
        let scheme = dir.path().join(format!("{kind}.json"));
        build(kind, &p, &scheme);
        let o = run(&["verify", "--scheme", s(&scheme), "--process", s(&p)]);
        assert_eq!(code(&o), 0, "{kind}");
        let r = stdout_json(&o);
        assert!(r["xi"].as_f64().unwrap() > 0.0);
        assert!(r["xi"].as_f64().unwrap() >= r["xi_gt"].as_f64().unwrap() - 1e-9);
    }
}

#[test]
fn malformed_input_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 2, 7);
    let scheme = dir.path().join("c2.json");
    build("circuit2", &p, &scheme);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&scheme).unwrap()).unwrap();
    // drop one column of the first element
    v["outcomes"][0]["matrix"][0].as_array_mut().unwrap().pop();
    fs::write(&scheme, v.to_string()).unwrap();
    let o = run(&["verify", "--scheme", s(&scheme), "--process", s(&p)]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("truncated.json");
    fs::write(&bad, "{\"dim\": 2,").unwrap();
    assert_eq!(
        code(&run(&["verify", "--scheme", s(&bad), "--process", s(&p)])),
        2
    );
    assert_eq!(code(&run(&["verify", "--scheme", s(&scheme)])), 2);

    let p3 = write_random(dir.path(), 3, 8);
    let good = dir.path().join("c2_good.json");
    build("circuit2", &p, &good);
    assert_eq!(
        code(&run(&["verify", "--scheme", s(&good), "--process", s(&p3)])),
        2
    );
}

#[test]
fn invalid_povm_exits_with_1() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 2, 9);
    let scheme = dir.path().join("how.json");
    build("how", &p, &scheme);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&scheme).unwrap()).unwrap();
    v["outcomes"].as_array_mut().unwrap().pop();
    fs::write(&scheme, v.to_string()).unwrap();
    let o = run(&["verify", "--scheme", s(&scheme), "--process", s(&p)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["valid"], false);
}

#[test]
fn fig2_defaults_and_grids() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig2.csv");
    let o = run(&["fig2", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "epsilon,xi,lambda_plus,neg_lambda_minus");
    assert_eq!(rows.len(), 25);
    let r = stdout_json(&o);
    assert!((r["slope_lambda_plus"].as_f64().unwrap() - 1.0).abs() < 0.05);

    let o = run(&["fig2", "--points", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o).get("slope_xi").is_none());

    let o = run(&[
        "fig2",
        "--delta",
        "1",
        "--delta-prime",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);

    assert_eq!(
        code(&run(&[
            "fig2",
            "--eps-min",
            "0.5",
            "--eps-max",
            "0.1",
            "--out",
            s(&out)
        ])),
        2
    );
    assert_eq!(code(&run(&["fig2", "--points", "0", "--out", s(&out)])), 2);
}

#[test]
fn histogram_defaults_ground_state_and_sweep() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("h.csv");
    assert_eq!(code(&run(&["histogram", "--out", s(&out)])), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("work,probability,branch\n"));
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 8);
    let total: f64 = rows.iter().map(|r| r[1]).sum();
    assert!((total - 1.0).abs() < 1e-12);

    // theta = 0: main rows of |E_1> carry no weight
    assert_eq!(
        code(&run(&["histogram", "--theta", "0", "--out", s(&out)])),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let zero_main = text
        .lines()
        .filter(|l| l.ends_with(",main"))
        .filter(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0)
        .count();
    assert_eq!(zero_main, 2);

    let sweep = dir.path().join("sweep");
    assert_eq!(code(&run(&["histogram", "--sweep", "--out", s(&sweep)])), 0);
    assert_eq!(fs::read_dir(&sweep).unwrap().count(), 10);
    assert!(sweep.join("histogram_eps_0.02.csv").exists());
    assert!(sweep.join("histogram_eps_0.20.csv").exists());

    assert_eq!(
        code(&run(&["histogram", "--eps", "1.5", "--out", s(&out)])),
        2
    );
    assert_eq!(
        code(&run(&["histogram", "--theta", "7", "--out", s(&out)])),
        2
    );
}

#[test]
fn dissipation_summary_and_determinism() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&["dissipation", "--out", s(&a)]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    assert!((r["xi_max"].as_f64().unwrap() - 0.022116).abs() < 1e-4);
    assert!((r["a_m"].as_f64().unwrap() - 0.851852).abs() < 1e-3);
    assert!((r["b_m"].as_f64().unwrap() - 0.22654).abs() < 1e-3);
    assert!(r["max_classical_je_error"].as_f64().unwrap() < 1e-9);
    assert_eq!(code(&run(&["dissipation", "--out", s(&b)])), 0);
    for f in ["xi_curve.csv", "pdf.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (header, _) = csv_rows(&a.join("pdf.csv"));
    assert_eq!(header, "x,pdf_c,pdf_q");
    let (header, curve) = csv_rows(&a.join("xi_curve.csv"));
    assert_eq!(header, "a,b,xi");
    assert!(curve.iter().all(|r| r[1] <= r[0] && r[2] > 0.0));
}

#[test]
fn tpm_sampling_matches_exact_mean_and_repeats() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 3, 10);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    // thermal state: diagonal in H, so the TPM mean is tr(Omega rho)
    let o = run(&[
        "sample",
        "--circuit",
        "tpm",
        "--process",
        s(&p),
        "--shots",
        "100000",
        "--out",
        s(&a),
    ]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    let z = (r["mean"].as_f64().unwrap() - r["exact_mean"].as_f64().unwrap()).abs()
        / r["mean_se"].as_f64().unwrap();
    assert!(z < 3.0, "z = {z}");
    assert_eq!(r["seed"], 42);
    let je = (r["exp_avg"].as_f64().unwrap() - r["jarzynski_value"].as_f64().unwrap()).abs()
        / r["exp_avg_se"].as_f64().unwrap();
    assert!(je < 3.0, "JE z = {je}");
    let o = run(&[
        "sample",
        "--circuit",
        "tpm",
        "--process",
        s(&p),
        "--shots",
        "100000",
        "--out",
        s(&b),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
    let (header, rows) = csv_rows(&a.join("samples.csv"));
    assert_eq!(header, "shot,work");
    assert_eq!(rows.len(), 100_000);
}

#[test]
fn epsv_sampling_estimates_the_shifted_jarzynski_value() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 2, 11);
    let scheme = dir.path().join("epsv.json");
    let params = dir.path().join("params.json");
    let o = run(&[
        "build-scheme",
        "--kind",
        "epsv",
        "--process",
        s(&p),
        "--eps",
        "0.2",
        "--out",
        s(&scheme),
        "--params-out",
        s(&params),
    ]);
    assert_eq!(code(&o), 0);
    let par: Value = serde_json::from_str(&fs::read_to_string(&params).unwrap()).unwrap();
    assert!(par["V"].as_f64().unwrap() >= 0.0 && par["v"].as_f64().unwrap() > 0.0);
    let exact = stdout_json(&run(&[
        "verify",
        "--scheme",
        s(&scheme),
        "--process",
        s(&p),
    ]))["xi"]
        .as_f64()
        .unwrap();
    let out = dir.path().join("s");
    let o = run(&[
        "sample",
        "--circuit",
        "epsv",
        "--eps",
        "0.2",
        "--process",
        s(&p),
        "--shots",
        "100000",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    let z =
        (r["xi_estimate"].as_f64().unwrap() - exact).abs() / r["ln_exp_avg_se"].as_f64().unwrap();
    assert!(z < 3.0, "z = {z}");
}

#[test]
fn sample_rejects_unknown_circuit_and_bad_state() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 2, 12);
    let out = dir.path().join("s");
    assert_eq!(
        code(&run(&[
            "sample",
            "--circuit",
            "3",
            "--process",
            s(&p),
            "--out",
            s(&out)
        ])),
        2
    );
    let state = dir.path().join("state.json");
    fs::write(
        &state,
        r#"{"dim": 2, "rho": [[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]}"#,
    )
    .unwrap();
    let o = run(&[
        "sample",
        "--circuit",
        "1",
        "--process",
        s(&p),
        "--state",
        s(&state),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(
        code(&run(&[
            "sample",
            "--circuit",
            "1",
            "--process",
            s(&p),
            "--shots",
            "0",
            "--out",
            s(&out)
        ])),
        2
    );
}

#[test]
fn minimize_on_commuting_process_gives_zero() {
    let dir = TempDir::new().unwrap();
    let p = write_commuting(dir.path());
    let out = dir.path().join("m");
    let o = run(&[
        "minimize-xi",
        "--process",
        s(&p),
        "--restarts",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let r: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r["xi"].as_f64().unwrap().abs() < 1e-9);
    assert!(r["xi_how"].as_f64().unwrap().abs() < 1e-9);
    let o = run(&[
        "verify",
        "--scheme",
        s(&out.join("scheme.json")),
        "--process",
        s(&p),
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn minimize_with_too_few_outcomes_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 3, 13);
    let out = dir.path().join("m");
    let o = run(&[
        "minimize-xi",
        "--process",
        s(&p),
        "--K",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 1);
    let r: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r["infeasible"].is_string());
    assert!(r["xi_how"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("h.csv");
    let o = bin()
        .env("WORKFLUCT_THREADS", "0")
        .args(["histogram", "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = bin()
        .env("WORKFLUCT_THREADS", "1")
        .args(["histogram", "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn distribution_csv_has_unit_mass() {
    let dir = TempDir::new().unwrap();
    let p = write_random(dir.path(), 3, 14);
    let scheme = dir.path().join("c1.json");
    build("circuit1", &p, &scheme);
    let out = dir.path().join("d.csv");
    assert_eq!(
        code(&run(&[
            "distribution",
            "--scheme",
            s(&scheme),
            "--process",
            s(&p),
            "--out",
            s(&out)
        ])),
        0
    );
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "work,probability");
    let total: f64 = rows.iter().map(|r| r[1]).sum();
    assert!((total - 1.0).abs() < 1e-10);
}
