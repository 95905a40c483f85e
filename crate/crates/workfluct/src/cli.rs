//! Subcommands. Every command is deterministic given its flags; errors in
//! input or flags exit with 2, failed invariants with 1.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use workfluct_core::circuits::{
    build_circuit1, build_circuit2, build_circuit_epsv, build_tpm_circuit, estimate_observables,
    sample_trajectories_parallel, CircuitRealization,
};
use workfluct_core::dissipation::{self, DissipationPair};
use workfluct_core::modified::{
    circuit1_scheme, circuit2_scheme, eps_v_parameters, tpm_eps_v_scheme_with, ShiftPolicy,
    DEFAULT_DELTA_MARGIN,
};
use workfluct_core::optimize::{minimize_xi, OptimizeOptions};
use workfluct_core::qubit::{coherent_histogram, fig2_sweep, log_grid, CoherentState};
use workfluct_core::random::random_process;
use workfluct_core::scheme::{how_scheme, tpm_scheme, xi_how_bound, SCHEME_TOL};
use workfluct_core::{DensityMatrix, Error as CoreError, MeasurementScheme, Process};

use crate::formats::{
    read_process, read_scheme, read_state, write_json, EpsVJson, MinimizeJson, ProcessFile,
    SchemeFile,
};
use crate::tables;

pub const DEFAULT_SEED: u64 = 42;
pub const THREADS_ENV: &str = "WORKFLUCT_THREADS";

/// How a command failed.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input. Exit code 2.
    Usage(anyhow::Error),
    /// A checked invariant does not hold. Exit code 1.
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Invariant(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "error: {e:#}"),
            Failure::Invariant(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Usage(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "workfluct",
    version,
    about = "Quantum work-measurement schemes and the corrected Jarzynski equality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scheme against a process: validity, condition (i), Xi and its lower bound.
    Verify(VerifyArgs),
    /// Circuit 2 correction and outlier works of the qubit example over an epsilon grid.
    Fig2(Fig2Args),
    /// Circuit 1 statistics of a coherent qubit state.
    Histogram(HistogramArgs),
    /// Classical/quantum dissipated-work pair: Xi(a) curve, densities and maximizer.
    Dissipation(DissipationArgs),
    /// Monte Carlo trajectories of a circuit realization.
    Sample(SampleArgs),
    /// Search for a condition-(i) scheme with a smaller correction than HOW.
    MinimizeXi(MinimizeArgs),
    /// Write a random process (diagonal H, GUE H', Haar U).
    RandomProcess(RandomProcessArgs),
    /// Write one of the built-in schemes for a process.
    BuildScheme(BuildSchemeArgs),
    /// Work distribution of a scheme on a state.
    Distribution(DistributionArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub process: PathBuf,
    #[arg(long, default_value_t = SCHEME_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub delta_prime: f64,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 3e-2)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long, default_value_t = 15.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub delta_prime: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// Emit one file per epsilon in 0.02, 0.04, ..., 0.20 into the `--out` directory.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DissipationArgs {
    /// Output directory for `xi_curve.csv`, `pdf.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum CircuitKind {
    #[value(name = "tpm")]
    #[serde(rename = "tpm")]
    Tpm,
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
    #[value(name = "epsv")]
    #[serde(rename = "epsv")]
    EpsV,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub circuit: CircuitKind,
    #[arg(long)]
    pub process: PathBuf,
    /// Initial state; the thermal state of `H` when omitted.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Circuit 2 shift `w~`; `lambda_max / 2` when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub w_tilde: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub shots: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory for `samples.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub process: PathBuf,
    /// Number of outcomes; `2 d` when omitted.
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory for `report.json` and `scheme.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RandomProcessArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Tpm,
    How,
    Circuit1,
    Circuit2,
    Epsv,
}

#[derive(Debug, Args)]
pub struct BuildSchemeArgs {
    #[arg(long, value_enum)]
    pub kind: SchemeKind,
    #[arg(long)]
    pub process: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Margin of the minimal-margin shift rule for `epsv`.
    #[arg(long, default_value_t = DEFAULT_DELTA_MARGIN)]
    pub delta_margin: f64,
    /// Fixed shift `V` for `epsv` instead of the minimal-margin rule.
    #[arg(long)]
    pub v_shift: Option<f64>,
    /// Where to write the `epsv` parameters.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub process: PathBuf,
    /// Initial state; the thermal state of `H` when omitted.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Fig2(a) => cmd_fig2(&a),
        Command::Histogram(a) => cmd_histogram(&a),
        Command::Dissipation(a) => cmd_dissipation(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::MinimizeXi(a) => cmd_minimize_xi(&a),
        Command::RandomProcess(a) => cmd_random_process(&a),
        Command::BuildScheme(a) => cmd_build_scheme(&a),
        Command::Distribution(a) => cmd_distribution(&a),
    }
}

/// Caps the rayon pool at `WORKFLUCT_THREADS` when set.
pub fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!(e))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub outcomes: usize,
    pub tol: f64,
    pub positivity_violation: f64,
    pub completeness_error: f64,
    pub valid: bool,
    pub condition_i_residual: f64,
    pub condition_i: bool,
    pub xi: Option<f64>,
    pub xi_gt: Option<f64>,
    pub xi_how: f64,
    /// `Xi >= xi_GT >= 0` up to 1e-9.
    pub chain_holds: Option<bool>,
    pub passed: bool,
}

pub fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(Failure::Usage(anyhow!("--tol must be positive")));
    }
    let p = read_process(&a.process)?;
    let s = read_scheme(&a.scheme)?;
    if s.dim() != p.dim() {
        return Err(Failure::Usage(anyhow!(
            "scheme has dimension {} but the process has {}",
            s.dim(),
            p.dim()
        )));
    }
    let v = s.validate(a.tol)?;
    let cond = s.satisfies_condition_i(&p, a.tol);
    // Xi and its lower bound are only meaningful for a valid POVM
    let (xi, xi_gt, chain) = if v.passed {
        let xi = s.xi(&p);
        let gt = s.golden_thompson_correction(&p).ok();
        let chain = gt.map(|g| g >= -1e-9 && xi >= g - 1e-9);
        (Some(xi), gt, chain)
    } else {
        (None, None, None)
    };
    let report = VerifyReport {
        dim: s.dim(),
        outcomes: s.len(),
        tol: a.tol,
        positivity_violation: v.positivity_violation,
        completeness_error: v.completeness_error,
        valid: v.passed,
        condition_i_residual: s.condition_i_residual(&p),
        condition_i: cond,
        xi,
        xi_gt,
        xi_how: xi_how_bound(&p)?,
        chain_holds: chain,
        passed: v.passed && cond && chain == Some(true),
    };
    print_json(&report)?;
    if report.passed {
        Ok(())
    } else {
        let mut why = Vec::new();
        if !report.valid {
            why.push("not a valid POVM");
        }
        if !report.condition_i {
            why.push("condition (i) violated");
        }
        if report.valid && chain != Some(true) {
            why.push("Xi >= xi_GT >= 0 does not hold");
        }
        Err(Failure::Invariant(why.join(", ")))
    }
}

pub fn cmd_fig2(a: &Fig2Args) -> CmdResult {
    if !(a.eps_max < 1.0) {
        return Err(Failure::Usage(anyhow!("--eps-max must be below 1")));
    }
    let grid = log_grid(a.eps_min, a.eps_max, a.points)?;
    let table = fig2_sweep(a.delta, a.delta_prime, a.beta, &grid)?;
    tables::write_fig2(&a.out, &table.rows)?;
    match table.slopes {
        Some(s) => print_json(&serde_json::json!({
            "fit_points": s.points,
            "slope_xi": s.xi,
            "slope_lambda_plus": s.lambda_plus,
            "slope_neg_lambda_minus": s.neg_lambda_minus,
        }))?,
        None => print_json(&serde_json::json!({ "fit_points": table.rows.len() }))?,
    }
    Ok(())
}

/// Epsilon values of the multi-file histogram emit.
pub fn histogram_sweep_grid() -> Vec<f64> {
    (1..=10).map(|k| 0.02 * k as f64).collect()
}

pub fn cmd_histogram(a: &HistogramArgs) -> CmdResult {
    let state = CoherentState::new(a.theta, a.phi)?;
    if a.sweep {
        ensure_dir(&a.out)?;
        for eps in histogram_sweep_grid() {
            let rows = coherent_histogram(a.delta, a.delta_prime, eps, state)?;
            tables::write_histogram(&a.out.join(format!("histogram_eps_{eps:.2}.csv")), &rows)?;
        }
    } else {
        let rows = coherent_histogram(a.delta, a.delta_prime, a.eps, state)?;
        tables::write_histogram(&a.out, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct DissipationSummary {
    pub a_m: f64,
    pub b_m: f64,
    pub xi_max: f64,
    /// Largest `|int p_c - 1|`, `|int p_q - 1|` and `|<e^{-x}>_c - 1|` over the curve.
    pub max_normalization_error: f64,
    pub max_classical_je_error: f64,
    /// Largest `|<x>_c - (a - b)|` over the curve.
    pub max_mean_error: f64,
}

pub fn cmd_dissipation(a: &DissipationArgs) -> CmdResult {
    if a.points < 2 {
        return Err(Failure::Usage(anyhow!("--points must be at least 2")));
    }
    ensure_dir(&a.out)?;
    let (a_m, b_m, xi_max) = dissipation::maximize_xi()?;
    let (lo, hi) = dissipation::XI_BRACKET;
    let grid: Vec<f64> = (0..a.points)
        .map(|k| lo + (hi - lo) * k as f64 / (a.points - 1) as f64)
        .collect();
    let curve = dissipation::xi_curve(&grid)?;
    let (mut norm_err, mut je_err, mut mean_err) = (0.0f64, 0.0f64, 0.0f64);
    for &(av, bv, xi) in &curve {
        let pair = DissipationPair { a: av, b: bv, xi };
        let (c, q) = (pair.classical(), pair.quantum());
        norm_err = norm_err
            .max((c.normalization()? - 1.0).abs())
            .max((q.normalization()? - 1.0).abs());
        je_err = je_err.max((c.exp_average()? - 1.0).abs());
        mean_err = mean_err.max((c.mean()? - (av - bv)).abs());
    }
    tables::write_xi_curve(&a.out.join("xi_curve.csv"), &curve)?;
    let pair = DissipationPair::new(a_m)?;
    let xs: Vec<f64> = (0..=1200).map(|k| -6.0 + 0.01 * k as f64).collect();
    tables::write_pdfs(&a.out.join("pdf.csv"), &pair, &xs)?;
    let summary = DissipationSummary {
        a_m,
        b_m,
        xi_max,
        max_normalization_error: norm_err,
        max_classical_je_error: je_err,
        max_mean_error: mean_err,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    print_json(&summary)?;
    if norm_err > 1e-9 || je_err > 1e-9 || mean_err > 1e-8 {
        return Err(Failure::Invariant("dissipation pair identities".into()));
    }
    Ok(())
}

pub fn build_circuit(
    kind: CircuitKind,
    p: &Process,
    eps: f64,
    w_tilde: Option<f64>,
) -> anyhow::Result<CircuitRealization> {
    Ok(match kind {
        CircuitKind::Tpm => build_tpm_circuit(p)?,
        CircuitKind::One => build_circuit1(p, eps)?,
        CircuitKind::Two => build_circuit2(p, eps, w_tilde)?,
        CircuitKind::EpsV => {
            let params = eps_v_parameters(p, eps, ShiftPolicy::default())?;
            build_circuit_epsv(p, &params)?
        }
    })
}

#[derive(Debug, Serialize)]
pub struct SampleSummary {
    pub circuit: CircuitKind,
    pub shots: usize,
    pub seed: u64,
    pub mean: f64,
    pub mean_se: f64,
    /// `tr(Omega rho)`.
    pub exact_mean: f64,
    pub exp_avg: f64,
    pub exp_avg_se: f64,
    pub ln_exp_avg: f64,
    pub ln_exp_avg_se: f64,
    /// `e^{-beta dF}`.
    pub jarzynski_value: f64,
    pub xi_estimate: f64,
    pub effective_sample_size: f64,
    pub heavy_tail: bool,
}

fn state_or_thermal(path: &Option<PathBuf>, p: &Process) -> anyhow::Result<DensityMatrix> {
    match path {
        Some(path) => {
            let rho = read_state(path)?;
            if rho.dim() != p.dim() {
                bail!(
                    "state has dimension {} but the process has {}",
                    rho.dim(),
                    p.dim()
                );
            }
            Ok(rho)
        }
        None => Ok(p.thermal_state()),
    }
}

pub fn cmd_sample(a: &SampleArgs) -> CmdResult {
    let p = read_process(&a.process)?;
    let rho = state_or_thermal(&a.state, &p)?;
    let c = build_circuit(a.circuit, &p, a.eps, a.w_tilde)?;
    let samples = sample_trajectories_parallel(&c, &rho, a.shots, a.seed)?;
    let est = estimate_observables(&samples, &p)?;
    ensure_dir(&a.out)?;
    tables::write_samples(&a.out.join("samples.csv"), &samples)?;
    let summary = SampleSummary {
        circuit: a.circuit,
        shots: a.shots,
        seed: a.seed,
        mean: est.mean,
        mean_se: est.mean_se,
        exact_mean: rho.expectation(p.how_operator()),
        exp_avg: est.exp_avg,
        exp_avg_se: est.exp_avg_se,
        ln_exp_avg: est.ln_exp_avg,
        ln_exp_avg_se: est.ln_exp_avg_se,
        jarzynski_value: (-p.beta() * p.thermal_quantities().delta_f).exp(),
        xi_estimate: est.xi,
        effective_sample_size: est.effective_sample_size,
        heavy_tail: est.heavy_tail,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    if est.heavy_tail {
        eprintln!(
            "warning: <e^(-beta W)> is dominated by a few outcomes (effective sample size {:.1} of {})",
            est.effective_sample_size, a.shots
        );
    }
    print_json(&summary)?;
    Ok(())
}

pub fn cmd_minimize_xi(a: &MinimizeArgs) -> CmdResult {
    let p = read_process(&a.process)?;
    let opts = OptimizeOptions {
        k: a.k,
        iters: a.iters,
        restarts: a.restarts,
        seed: a.seed,
        ..OptimizeOptions::default()
    };
    ensure_dir(&a.out)?;
    let xi_how = xi_how_bound(&p)?;
    match minimize_xi(&p, &opts) {
        Ok((scheme, report)) => {
            let json = MinimizeJson::from(&report);
            write_json(&a.out.join("report.json"), &json)?;
            write_json(
                &a.out.join("scheme.json"),
                &SchemeFile::from_scheme(&scheme),
            )?;
            print_json(&json)?;
            Ok(())
        }
        Err(CoreError::Infeasible(msg)) => {
            let json = serde_json::json!({ "infeasible": msg, "xi_how": xi_how, "seed": a.seed });
            write_json(&a.out.join("report.json"), &json)?;
            print_json(&json)?;
            Err(Failure::Invariant(format!("infeasible: {msg}")))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_random_process(a: &RandomProcessArgs) -> CmdResult {
    if a.dim == 0 {
        return Err(Failure::Usage(anyhow!("--dim must be at least 1")));
    }
    if !(a.beta > 0.0 && a.beta.is_finite()) {
        return Err(Failure::Usage(anyhow!("--beta must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let p = random_process(&mut rng, a.dim, a.beta);
    write_json(&a.out, &ProcessFile::from_process(&p))?;
    Ok(())
}

pub fn build_scheme(
    a: &BuildSchemeArgs,
    p: &Process,
) -> anyhow::Result<(MeasurementScheme, Option<EpsVJson>)> {
    Ok(match a.kind {
        SchemeKind::Tpm => (tpm_scheme(p), None),
        SchemeKind::How => (how_scheme(p)?, None),
        SchemeKind::Circuit1 => (circuit1_scheme(p, a.eps)?, None),
        SchemeKind::Circuit2 => (circuit2_scheme(p, a.eps)?, None),
        SchemeKind::Epsv => {
            let policy = match a.v_shift {
                Some(v_shift) => ShiftPolicy::Fixed { v_shift },
                None => ShiftPolicy::MinimalMargin {
                    delta: a.delta_margin,
                },
            };
            let params = eps_v_parameters(p, a.eps, policy)?;
            (
                tpm_eps_v_scheme_with(p, &params)?,
                Some(EpsVJson::from(&params)),
            )
        }
    })
}

pub fn cmd_build_scheme(a: &BuildSchemeArgs) -> CmdResult {
    let p = read_process(&a.process)?;
    let (scheme, params) = build_scheme(a, &p)?;
    write_json(&a.out, &SchemeFile::from_scheme(&scheme))?;
    match (&a.params_out, params) {
        (Some(path), Some(params)) => write_json(path, &params)?,
        (Some(_), None) => {
            return Err(Failure::Usage(anyhow!(
                "--params-out only applies to --kind epsv"
            )))
        }
        _ => {}
    }
    Ok(())
}

pub fn cmd_distribution(a: &DistributionArgs) -> CmdResult {
    let p = read_process(&a.process)?;
    let s = read_scheme(&a.scheme)?;
    if s.dim() != p.dim() {
        return Err(Failure::Usage(anyhow!(
            "scheme has dimension {} but the process has {}",
            s.dim(),
            p.dim()
        )));
    }
    let v = s.validate(SCHEME_TOL)?;
    if !v.passed {
        return Err(Failure::Invariant("scheme is not a valid POVM".into()));
    }
    let rho = state_or_thermal(&a.state, &p)?;
    let dist = s.work_distribution(&rho, p.char_energy_scale()?);
    tables::write_distribution(&a.out, &dist)?;
    Ok(())
}
