//! The driven qubit `H = Delta |1><1|`, `H' = Delta' |1><1|`, evolved by the
//! Hadamard map `U = |0><+| + |1><->`, with closed forms for its TPM_eps
//! outliers, the figure sweep over `eps`, and Circuit 1 acting on a
//! coherent state.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{Complex64, ComplexMatrix, DensityMatrix, HermitianOperator, UnitaryOperator};
use crate::modified::{circuit1_scheme, circuit2_scheme, lambda_system, outlier_label};
use crate::process::Process;
use crate::scheme::tpm_label;
use crate::stats::fit_slope;

/// Parameters of the worked qubit example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitExample {
    pub delta: f64,
    pub delta_prime: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl QubitExample {
    pub fn new(delta: f64, delta_prime: f64, beta: f64, epsilon: f64) -> Result<Self> {
        if delta == 0.0 && delta_prime == 0.0 {
            return Err(Error::InvalidParameter(
                "Delta and Delta' cannot both vanish".into(),
            ));
        }
        check_eps(epsilon)?;
        Ok(Self {
            delta,
            delta_prime,
            beta,
            epsilon,
        })
    }

    pub fn process(&self) -> Result<Process> {
        example_process(self.delta, self.delta_prime, self.beta)
    }

    pub fn lambda(&self) -> Result<LambdaClosedForm> {
        lambda_closed_form(self.delta, self.delta_prime, self.epsilon)
    }
}

fn check_eps(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn hadamard() -> ComplexMatrix {
    let s = c(FRAC_1_SQRT_2);
    ComplexMatrix::from_fn(2, |r, k| if r == 1 && k == 1 { -s } else { s })
}

fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |r, k| if r != k { c(1.0) } else { c(0.0) })
}

fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

pub fn example_process(delta: f64, delta_prime: f64, beta: f64) -> Result<Process> {
    if !(delta.is_finite() && delta_prime.is_finite()) {
        return Err(Error::InvalidParameter(
            "level spacings must be finite".into(),
        ));
    }
    Process::new(
        HermitianOperator::from_real_diagonal(&[0.0, delta]),
        HermitianOperator::from_real_diagonal(&[0.0, delta_prime]),
        UnitaryOperator::new(hadamard())?,
        beta,
    )
}

/// `Omega = Delta' |-><-| - Delta |1><1|`.
pub fn omega_closed_form(delta: f64, delta_prime: f64) -> HermitianOperator {
    let minus = [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)];
    let mut omega = HermitianOperator::projector(&minus).scale(delta_prime);
    omega.add_scaled(&HermitianOperator::from_real_diagonal(&[0.0, 1.0]), -delta);
    omega
}

/// `Omega_D = (Delta'/2) 1 - Delta |1><1|`.
pub fn dephased_omega_closed_form(delta: f64, delta_prime: f64) -> HermitianOperator {
    HermitianOperator::from_real_diagonal(&[0.5 * delta_prime, 0.5 * delta_prime - delta])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaClosedForm {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub proj_plus: HermitianOperator,
    pub proj_minus: HermitianOperator,
}

impl LambdaClosedForm {
    /// Bloch vector `(x, y, z)` of `|lambda_->`.
    pub fn bloch_minus(&self) -> [f64; 3] {
        bloch_vector(&self.proj_minus)
    }
}

/// Bloch vector of a rank-one projector `(1 + r.sigma)/2`.
pub fn bloch_vector(p: &HermitianOperator) -> [f64; 3] {
    let m = p.matrix();
    [
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    ]
}

/// `lambda_pm = (Delta' - Delta)/2 pm sqrt((Delta'/(2 eps))^2 + Delta^2/4)`
/// and `|l_pm><l_pm| = 1/2 pm (eps Delta sz - Delta' sx) / (2 s)` with
/// `s = sqrt((eps Delta)^2 + Delta'^2)`.
pub fn lambda_closed_form(delta: f64, delta_prime: f64, epsilon: f64) -> Result<LambdaClosedForm> {
    check_eps(epsilon)?;
    let root = libm::sqrt((delta_prime / (2.0 * epsilon)).powi(2) + 0.25 * delta * delta);
    let mid = 0.5 * (delta_prime - delta);
    let s = libm::hypot(epsilon * delta, delta_prime);
    if s == 0.0 {
        return Err(Error::DegenerateProcess);
    }
    let mut n = pauli_z().scale(epsilon * delta);
    n.add_scaled(&pauli_x(), -delta_prime);
    let n = n.scale(0.5 / s);
    let half = ComplexMatrix::identity(2).scale(0.5);
    Ok(LambdaClosedForm {
        lambda_plus: mid + root,
        lambda_minus: mid - root,
        proj_plus: HermitianOperator::symmetrized(&(&half + &n)),
        proj_minus: HermitianOperator::symmetrized(&(&half - &n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Row {
    pub epsilon: f64,
    pub xi: f64,
    pub lambda_plus: f64,
    pub neg_lambda_minus: f64,
}

/// Slopes of `ln xi`, `ln lambda_+`, `ln(-lambda_-)` against `ln(1/eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Slopes {
    pub xi: f64,
    pub lambda_plus: f64,
    pub neg_lambda_minus: f64,
    /// Number of rows the fit used.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Table {
    pub rows: Vec<Fig2Row>,
    /// `None` when fewer than two rows fall in the fit window.
    pub slopes: Option<Fig2Slopes>,
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n > 0) {
        return Err(Error::InvalidParameter(format!(
            "bad grid lo={lo} hi={hi} n={n}"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    Ok((0..n)
        .map(|k| libm::exp(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect())
}

fn fig2_row(p: &Process, epsilon: f64) -> Result<Fig2Row> {
    let ls = lambda_system(p, epsilon)?;
    Ok(Fig2Row {
        epsilon,
        xi: circuit2_scheme(p, epsilon)?.xi(p),
        lambda_plus: ls.spectrum.max(),
        neg_lambda_minus: -ls.spectrum.min(),
    })
}

/// Circuit 2 quantum correction and outlier works over `eps_grid`. Slopes
/// are fitted on the half of the grid with the smallest `eps`.
pub fn fig2_sweep(delta: f64, delta_prime: f64, beta: f64, eps_grid: &[f64]) -> Result<Fig2Table> {
    let p = example_process(delta, delta_prime, beta)?;
    let rows = eps_grid
        .iter()
        .map(|&e| fig2_row(&p, e))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<Fig2Row> = rows.clone();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let half = &sorted[..sorted.len().div_ceil(2)];
    Ok(Fig2Table {
        slopes: slopes_of(half),
        rows,
    })
}

/// Fits the three slopes over every row given.
pub fn slopes_of(rows: &[Fig2Row]) -> Option<Fig2Slopes> {
    if rows.len() < 2 {
        return None;
    }
    let x: Vec<f64> = rows.iter().map(|r| -libm::log(r.epsilon)).collect();
    let fit = |f: fn(&Fig2Row) -> f64| {
        let y: Vec<f64> = rows.iter().map(|r| libm::log(f(r))).collect();
        fit_slope(&x, &y)
    };
    Some(Fig2Slopes {
        xi: fit(|r| r.xi),
        lambda_plus: fit(|r| r.lambda_plus),
        neg_lambda_minus: fit(|r| r.neg_lambda_minus),
        points: rows.len(),
    })
}

/// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentState {
    pub theta: f64,
    pub phi: f64,
}

impl CoherentState {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=core::f64::consts::PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, pi], got {theta}"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        let (s, co) = libm::sincos(0.5 * self.theta);
        [c(co), Complex64::from_polar(s, self.phi)]
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::pure(&self.amplitudes()).expect("unit vector")
    }
}

/// Which part of Circuit 1 produced a histogram row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Main,
    Outlier,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Main => "main",
            Branch::Outlier => "outlier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub work: f64,
    pub probability: f64,
    pub branch: Branch,
    /// Label of the matching outcome of `circuit1_scheme`.
    pub label: String,
}

/// Circuit 1 statistics on a coherent qubit state, from closed forms.
///
/// The outlier basis is `|l_0> = c0|0> + c1|1>`, `|l_1> = c1|0> - c0|1>`
/// with `c0^2 = 1/2 - eps Delta/(2 s)`; `|l_0>` belongs to `lambda_-`.
/// Main rows carry `(1 - eps)/2` times the population of `|E_i>`, outlier
/// rows `(eps/2) |<psi|l_i>|^2`, both for each final level `j`.
/// Requires `Delta > 0` so that `|0>, |1>` are the ascending levels of `H`.
pub fn coherent_histogram(
    delta: f64,
    delta_prime: f64,
    epsilon: f64,
    state: CoherentState,
) -> Result<Vec<HistogramRow>> {
    check_eps(epsilon)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Delta must be positive, got {delta}"
        )));
    }
    let s = libm::hypot(epsilon * delta, delta_prime);
    if s == 0.0 {
        return Err(Error::DegenerateProcess);
    }
    let c0_sq = 0.5 - epsilon * delta / (2.0 * s);
    let c1_sq = 0.5 + epsilon * delta / (2.0 * s);
    // c0 c1 carries the sign of Delta'
    let c0c1 = 0.5 * delta_prime / s;
    let (sin_t, cos_t) = libm::sincos(state.theta);
    let cos2 = 0.5 * (1.0 + cos_t);
    let sin2 = 0.5 * (1.0 - cos_t);
    let cross = c0c1 * libm::cos(state.phi) * sin_t;
    let overlap = [
        c0_sq * cos2 + c1_sq * sin2 + cross,
        c1_sq * cos2 + c0_sq * sin2 - cross,
    ];
    let lam = lambda_closed_form(delta, delta_prime, epsilon)?;
    let energies = [0.0, delta];
    // levels of H' in ascending order, as the generic scheme labels them
    let energies_prime = if delta_prime >= 0.0 {
        [0.0, delta_prime]
    } else {
        [delta_prime, 0.0]
    };
    // W~_i = <E_i|Omega|E_i> - lambda_i
    let shift = [
        0.5 * delta_prime - lam.lambda_minus,
        0.5 * delta_prime - delta - lam.lambda_plus,
    ];
    let population = [cos2, sin2];
    let mut rows = Vec::with_capacity(8);
    for i in 0..2 {
        for j in 0..2 {
            rows.push(HistogramRow {
                work: energies_prime[j] - energies[i],
                probability: 0.5 * (1.0 - epsilon) * population[i],
                branch: Branch::Main,
                label: tpm_label(i, j),
            });
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            rows.push(HistogramRow {
                work: energies_prime[j] - energies[i] - shift[i],
                probability: 0.5 * epsilon * overlap[i],
                branch: Branch::Outlier,
                label: format!("{}|E'{j}", outlier_label(i)),
            });
        }
    }
    Ok(rows)
}

/// Largest deviation between [`coherent_histogram`] and the generic
/// Circuit 1 scheme evaluated on the same state, matched by label, in
/// probability and in work.
pub fn histogram_cross_check(
    delta: f64,
    delta_prime: f64,
    epsilon: f64,
    state: CoherentState,
) -> Result<(f64, f64)> {
    let p = example_process(delta, delta_prime, 1.0)?;
    let scheme = circuit1_scheme(&p, epsilon)?;
    let rho = state.density();
    let mut dp: f64 = 0.0;
    let mut dw: f64 = 0.0;
    for row in coherent_histogram(delta, delta_prime, epsilon, state)? {
        let o = scheme
            .get(&row.label)
            .ok_or_else(|| Error::InvalidScheme(format!("missing outcome {}", row.label)))?;
        dp = dp.max((rho.expectation(&o.element) - row.probability).abs());
        dw = dw.max((o.work - row.work).abs());
    }
    Ok((dp, dw))
}
