//! Regression on the stored qubit process where the optimizer beats HOW.

use std::path::PathBuf;

use serde::Deserialize;

use workfluct::formats::{read_json, ProcessFile, SchemeFile};
use workfluct_core::optimize::{minimize_xi, OptimizeOptions};
use workfluct_core::scheme::xi_how_bound;

#[derive(Deserialize)]
struct Counterexample {
    #[allow(dead_code)]
    seed: u64,
    #[serde(rename = "K")]
    k: usize,
    xi_how: f64,
    xi_opt: f64,
    process: ProcessFile,
    scheme: SchemeFile,
}

fn fixture() -> Counterexample {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/how_counterexample.json");
    read_json(&path).unwrap()
}

#[test]
fn stored_scheme_is_feasible_and_beats_how() {
    let fx = fixture();
    let p = fx.process.to_process().unwrap();
    let s = fx.scheme.to_scheme().unwrap();
    assert_eq!(s.len(), fx.k);
    assert!(s.validate(1e-8).unwrap().passed);
    assert!(s.condition_i_residual(&p) <= 1e-8);
    let xi_how = xi_how_bound(&p).unwrap();
    assert!((xi_how - fx.xi_how).abs() < 1e-12);
    assert!((s.xi(&p) - fx.xi_opt).abs() < 1e-9);
    assert!(fx.xi_opt <= xi_how - 1e-3);
}

#[test]
fn optimizer_reproduces_the_stored_minimum() {
    let fx = fixture();
    let p = fx.process.to_process().unwrap();
    let opts = OptimizeOptions {
        k: Some(fx.k),
        ..OptimizeOptions::default()
    };
    let (_, rep) = minimize_xi(&p, &opts).unwrap();
    assert!(
        (rep.xi - fx.xi_opt).abs() < 1e-6,
        "{} vs {}",
        rep.xi,
        fx.xi_opt
    );
}
