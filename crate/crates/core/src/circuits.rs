//! Two-stage Kraus realizations of work-measurement schemes.
//!
//! The joint space is `system (x) control`, with the system as the major
//! index. A run measures the first instrument, evolves the system by `U`,
//! measures the second instrument, and records `value(second) -
//! value(first)` as work.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    schatten_inf_norm, ComplexMatrix, DensityMatrix, HermitianOperator, UnitaryOperator,
};
use crate::modified::{
    check_epsilon, lambda_system, outlier_label, EpsVParameters, FLIP_LABEL, IDLE_LABEL, M_LABEL,
    ONE_MINUS_M_LABEL,
};
use crate::process::Process;
use crate::scheme::{MeasurementScheme, Outcome};

/// Completeness tolerance of an instrument.
pub const KRAUS_TOL: f64 = 1e-10;
/// Probabilities below this are rounding noise; below its negative, an error.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausOperator {
    pub op: ComplexMatrix,
    pub value: f64,
    pub label: String,
}

impl KrausOperator {
    pub fn new(op: ComplexMatrix, value: f64, label: impl Into<String>) -> Self {
        Self {
            op,
            value,
            label: label.into(),
        }
    }
}

/// Kraus operators on the joint space with `sum K'K = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausInstrument {
    stage: u8,
    operators: Vec<KrausOperator>,
}

impl KrausInstrument {
    pub fn new(stage: u8, operators: Vec<KrausOperator>) -> Result<Self> {
        let instrument = Self { stage, operators };
        let err = instrument.completeness_error()?;
        if err > KRAUS_TOL {
            return Err(Error::InvalidScheme(format!(
                "stage-{stage} Kraus operators are incomplete: |sum K'K - 1| = {err:e}"
            )));
        }
        Ok(instrument)
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn operators(&self) -> &[KrausOperator] {
        &self.operators
    }

    pub fn joint_dim(&self) -> usize {
        self.operators[0].op.dim()
    }

    pub fn completeness_error(&self) -> Result<f64> {
        let first = self
            .operators
            .first()
            .ok_or_else(|| Error::InvalidScheme("instrument has no operators".into()))?;
        let n = first.op.dim();
        let mut sum = ComplexMatrix::zeros(n);
        for k in &self.operators {
            if k.op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: k.op.dim(),
                });
            }
            sum = &sum + &k.op.adjoint().matmul(&k.op);
        }
        Ok(schatten_inf_norm(&(&sum - &ComplexMatrix::identity(n))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRealization {
    system_dim: usize,
    control: DensityMatrix,
    first: KrausInstrument,
    second: KrausInstrument,
    evolution: UnitaryOperator,
}

impl CircuitRealization {
    pub fn new(
        control: DensityMatrix,
        first: KrausInstrument,
        second: KrausInstrument,
        evolution: UnitaryOperator,
    ) -> Result<Self> {
        let system_dim = evolution.dim();
        let joint = system_dim * control.dim();
        for found in [first.joint_dim(), second.joint_dim()] {
            if found != joint {
                return Err(Error::DimensionMismatch {
                    expected: joint,
                    found,
                });
            }
        }
        Ok(Self {
            system_dim,
            control,
            first,
            second,
            evolution,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn control(&self) -> &DensityMatrix {
        &self.control
    }

    pub fn first(&self) -> &KrausInstrument {
        &self.first
    }

    pub fn second(&self) -> &KrausInstrument {
        &self.second
    }

    pub fn evolution(&self) -> &UnitaryOperator {
        &self.evolution
    }

    fn joint_evolution(&self) -> ComplexMatrix {
        self.evolution
            .matrix()
            .kron(&ComplexMatrix::identity(self.control.dim()))
    }

    /// System-level POVM: for every pair of Kraus outcomes `(k, l)`,
    /// `M = Tr_C[(1 (x) rho_C) K_k' (U' (x) 1) K_l' K_l (U (x) 1) K_k]` with
    /// work `value(l) - value(k)` and label `"label(k)|label(l)"`. Pairs whose
    /// element vanishes identically are dropped.
    pub fn induced_povm(&self) -> Result<MeasurementScheme> {
        let u = self.joint_evolution();
        let ud = u.adjoint();
        let rho_c = self.control.matrix();
        let effects: Vec<ComplexMatrix> = self
            .second
            .operators
            .iter()
            .map(|k| ud.matmul(&k.op.adjoint().matmul(&k.op)).matmul(&u))
            .collect();
        let mut outcomes = Vec::new();
        for k1 in &self.first.operators {
            let k1d = k1.op.adjoint();
            for (k2, effect) in self.second.operators.iter().zip(&effects) {
                let joint = k1d.matmul(effect).matmul(&k1.op);
                let m = joint.partial_trace_weighted(rho_c);
                if m.is_exactly_zero() {
                    continue;
                }
                outcomes.push(Outcome::new(
                    HermitianOperator::symmetrized(&m),
                    k2.value - k1.value,
                    format!("{}|{}", k1.label, k2.label),
                ));
            }
        }
        MeasurementScheme::new(self.system_dim, outcomes)
    }
}

fn embed(system: &ComplexMatrix, control: &ComplexMatrix) -> ComplexMatrix {
    system.kron(control)
}

fn basis_op(dim: usize, r: usize, c: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    m[(r, c)] = Complex64::new(1.0, 0.0);
    m
}

fn two_level_control(epsilon: f64) -> DensityMatrix {
    DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[1.0 - epsilon, epsilon]))
        .expect("diagonal probabilities form a state")
}

fn energy_label(i: usize) -> String {
    format!("E{i}")
}

fn energy_prime_label(j: usize) -> String {
    format!("E'{j}")
}

/// Projective `H'` measurement on the system, `P'_J (x) control_op`.
fn second_energy_measurement(p: &Process, control_op: &ComplexMatrix) -> Vec<KrausOperator> {
    p.levels_prime()
        .iter()
        .enumerate()
        .map(|(j, l)| {
            KrausOperator::new(
                embed(l.projector.matrix(), control_op),
                l.energy,
                energy_prime_label(j),
            )
        })
        .collect()
}

/// Plain two-point measurement with a trivial one-dimensional control.
pub fn build_tpm_circuit(p: &Process) -> Result<CircuitRealization> {
    let one = ComplexMatrix::identity(1);
    let first = p
        .levels()
        .iter()
        .enumerate()
        .map(|(i, l)| KrausOperator::new(l.projector.matrix().clone(), l.energy, energy_label(i)))
        .collect();
    CircuitRealization::new(
        DensityMatrix::maximally_mixed(1),
        KrausInstrument::new(1, first)?,
        KrausInstrument::new(2, second_energy_measurement(p, &one))?,
        p.u().clone(),
    )
}

/// Circuit 1: control `(1 - eps)|0><0| + eps|1><1|`; first stage
/// `P_I (x) |0><0|` (value `E_I`) and `|E_i><l_i| (x) |0><1|` (value
/// `E_i + W~_i`); second stage a projective `H'` measurement.
pub fn build_circuit1(p: &Process, epsilon: f64) -> Result<CircuitRealization> {
    check_epsilon(epsilon)?;
    let ls = lambda_system(p, epsilon)?;
    let shifts = ls.shifts(p, p.how_operator());
    let p00 = basis_op(2, 0, 0);
    let p01 = basis_op(2, 0, 1);
    let mut first: Vec<KrausOperator> = p
        .levels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            KrausOperator::new(embed(l.projector.matrix(), &p00), l.energy, energy_label(i))
        })
        .collect();
    for i in 0..p.dim() {
        let flip = ComplexMatrix::outer2(&p.h_spectrum().vector(i), &ls.spectrum.vector(i));
        first.push(KrausOperator::new(
            embed(&flip, &p01),
            p.h_spectrum().eigenvalues()[i] + shifts[i],
            outlier_label(i),
        ));
    }
    CircuitRealization::new(
        two_level_control(epsilon),
        KrausInstrument::new(1, first)?,
        KrausInstrument::new(2, second_energy_measurement(p, &ComplexMatrix::identity(2)))?,
        p.u().clone(),
    )
}

/// Circuit 2: energy measurements on the `a = 0` branch; on `a = 1` the
/// first stage measures `Lambda` (value `-lambda_i + w~`) and the second
/// stage only reports `w~`. `w_tilde` defaults to `lambda_max / 2`.
pub fn build_circuit2(
    p: &Process,
    epsilon: f64,
    w_tilde: Option<f64>,
) -> Result<CircuitRealization> {
    check_epsilon(epsilon)?;
    let ls = lambda_system(p, epsilon)?;
    let w_tilde = w_tilde.unwrap_or(0.5 * ls.spectrum.max());
    if !w_tilde.is_finite() {
        return Err(Error::InvalidParameter("w_tilde must be finite".into()));
    }
    let p00 = basis_op(2, 0, 0);
    let p11 = basis_op(2, 1, 1);
    let mut first: Vec<KrausOperator> = p
        .levels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            KrausOperator::new(embed(l.projector.matrix(), &p00), l.energy, energy_label(i))
        })
        .collect();
    for i in 0..p.dim() {
        first.push(KrausOperator::new(
            embed(&ls.spectrum.projector(i), &p11),
            -ls.eigenvalue(i) + w_tilde,
            outlier_label(i),
        ));
    }
    let mut second = second_energy_measurement(p, &p00);
    second.push(KrausOperator::new(
        embed(&ComplexMatrix::identity(p.dim()), &p11),
        w_tilde,
        IDLE_LABEL,
    ));
    CircuitRealization::new(
        two_level_control(epsilon),
        KrausInstrument::new(1, first)?,
        KrausInstrument::new(2, second)?,
        p.u().clone(),
    )
}

/// Two-control realization of `TPM_{eps,V}`. Control `(1 - eps)|00><00| +
/// eps|11><11|`. First stage: `P_I (x) |0><0| (x) 1` (value `E_I + w V`) and
/// `1 (x) |1><1| (x) 1` (value 0). Second stage: `P'_J (x) 1 (x) |0><0|`
/// (value `E'_J`), `sqrt(m) U' (x) 1 (x) |1><1|` (value `v w / eps`) and
/// `sqrt(1 - m) U' (x) 1 (x) |1><1|` (value 0).
pub fn build_circuit_epsv(p: &Process, params: &EpsVParameters) -> Result<CircuitRealization> {
    check_epsilon(params.epsilon)?;
    let (lo, hi) = params.m.eigen_range()?;
    if lo < -PROB_TOL || hi > 1.0 + PROB_TOL {
        return Err(Error::InvalidParameter(format!(
            "m must satisfy 0 <= m <= 1, spectrum is [{lo:e}, {hi}]"
        )));
    }
    if params.m.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: params.m.dim(),
        });
    }
    let eps = params.epsilon;
    let id2 = ComplexMatrix::identity(2);
    let p0 = basis_op(2, 0, 0);
    let p1 = basis_op(2, 1, 1);
    let c1_0 = p0.kron(&id2);
    let c1_1 = p1.kron(&id2);
    let c2_0 = id2.kron(&p0);
    let c2_1 = id2.kron(&p1);
    let shift = params.w * params.v_shift;

    let mut first: Vec<KrausOperator> = p
        .levels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            KrausOperator::new(
                embed(l.projector.matrix(), &c1_0),
                l.energy + shift,
                energy_label(i),
            )
        })
        .collect();
    first.push(KrausOperator::new(
        embed(&ComplexMatrix::identity(p.dim()), &c1_1),
        0.0,
        FLIP_LABEL,
    ));

    let sqrt_m = params.m.map_spectrum(|x| libm::sqrt(x.clamp(0.0, 1.0)))?;
    let sqrt_rest = params
        .m
        .map_spectrum(|x| libm::sqrt((1.0 - x).clamp(0.0, 1.0)))?;
    let ud = p.u().matrix().adjoint();
    let mut second = second_energy_measurement(p, &c2_0);
    second.push(KrausOperator::new(
        embed(&sqrt_m.matrix().matmul(&ud), &c2_1),
        params.outlier_work(),
        M_LABEL,
    ));
    second.push(KrausOperator::new(
        embed(&sqrt_rest.matrix().matmul(&ud), &c2_1),
        0.0,
        ONE_MINUS_M_LABEL,
    ));

    let control = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[
        1.0 - eps,
        0.0,
        0.0,
        eps,
    ]))?;
    CircuitRealization::new(
        control,
        KrausInstrument::new(1, first)?,
        KrausInstrument::new(2, second)?,
        p.u().clone(),
    )
}

/// Recorded work per shot, with the Kraus outcome indices that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkSamples {
    pub samples: Vec<f64>,
    pub outcomes: Vec<(u32, u32)>,
    pub shots: usize,
    pub seed: u64,
}

/// Born probabilities of both stages, precomputed once per circuit and state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    /// Cumulative stage-1 probabilities.
    first_cdf: Vec<f64>,
    /// Cumulative stage-2 probabilities conditioned on each stage-1 outcome.
    second_cdf: Vec<Vec<f64>>,
    first_values: Vec<f64>,
    second_values: Vec<f64>,
    /// Joint probabilities `p(k, l)`.
    pub joint: Vec<Vec<f64>>,
}

fn clean_probability(x: f64) -> Result<f64> {
    if x < -PROB_TOL {
        return Err(Error::Numeric(format!("negative probability {x:e}")));
    }
    Ok(x.max(0.0))
}

fn cumulative(ps: &[f64]) -> Vec<f64> {
    let total: f64 = ps.iter().sum();
    let mut acc = 0.0;
    ps.iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
        // u landed in the rounding gap above the last partial sum
        cdf.iter().rposition(|&c| c > 0.0).unwrap_or(0)
    })
}

impl TrajectoryTable {
    pub fn new(c: &CircuitRealization, rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != c.system_dim {
            return Err(Error::DimensionMismatch {
                expected: c.system_dim,
                found: rho.dim(),
            });
        }
        let joint_state = rho.matrix().kron(c.control.matrix());
        let u = c.joint_evolution();
        let ud = u.adjoint();
        let effects: Vec<ComplexMatrix> = c
            .second
            .operators
            .iter()
            .map(|k| k.op.adjoint().matmul(&k.op))
            .collect();
        let mut first_p = Vec::with_capacity(c.first.operators.len());
        let mut joint = Vec::with_capacity(c.first.operators.len());
        for k1 in &c.first.operators {
            let post = k1.op.matmul(&joint_state).matmul(&k1.op.adjoint());
            let pk = clean_probability(post.trace().re)?;
            let evolved = u.matmul(&post).matmul(&ud);
            let row = effects
                .iter()
                .map(|e| clean_probability(e.trace_product(&evolved).re))
                .collect::<Result<Vec<f64>>>()?;
            first_p.push(pk);
            joint.push(row);
        }
        let second_cdf = joint
            .iter()
            .map(|row| {
                if row.iter().sum::<f64>() > 0.0 {
                    cumulative(row)
                } else {
                    vec![1.0; row.len()]
                }
            })
            .collect();
        Ok(Self {
            first_cdf: cumulative(&first_p),
            second_cdf,
            first_values: c.first.operators.iter().map(|k| k.value).collect(),
            second_values: c.second.operators.iter().map(|k| k.value).collect(),
            joint,
        })
    }

    /// One trajectory from an independent stream `(seed, shot)`.
    pub fn shot(&self, seed: u64, shot: u64) -> (u32, u32, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let k = draw(&self.first_cdf, rng.random::<f64>());
        let l = draw(&self.second_cdf[k], rng.random::<f64>());
        (
            k as u32,
            l as u32,
            self.second_values[l] - self.first_values[k],
        )
    }
}

fn collect_samples(shots: usize, seed: u64, raw: Vec<(u32, u32, f64)>) -> WorkSamples {
    let mut samples = Vec::with_capacity(shots);
    let mut outcomes = Vec::with_capacity(shots);
    for (k, l, w) in raw {
        samples.push(w);
        outcomes.push((k, l));
    }
    WorkSamples {
        samples,
        outcomes,
        shots,
        seed,
    }
}

fn check_shots(shots: usize) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    Ok(())
}

/// Samples `shots` trajectories on `rho (x) rho_C`. Shot `n` uses the
/// ChaCha8 stream `n` of `seed`, so results do not depend on evaluation
/// order.
pub fn sample_trajectories(
    c: &CircuitRealization,
    rho: &DensityMatrix,
    shots: usize,
    seed: u64,
) -> Result<WorkSamples> {
    check_shots(shots)?;
    let table = TrajectoryTable::new(c, rho)?;
    let raw = (0..shots as u64).map(|n| table.shot(seed, n)).collect();
    Ok(collect_samples(shots, seed, raw))
}

/// Same samples as [`sample_trajectories`], computed on the rayon pool.
#[cfg(feature = "parallel")]
pub fn sample_trajectories_parallel(
    c: &CircuitRealization,
    rho: &DensityMatrix,
    shots: usize,
    seed: u64,
) -> Result<WorkSamples> {
    use rayon::prelude::*;
    check_shots(shots)?;
    let table = TrajectoryTable::new(c, rho)?;
    let raw = (0..shots as u64)
        .into_par_iter()
        .map(|n| table.shot(seed, n))
        .collect();
    Ok(collect_samples(shots, seed, raw))
}

/// Fraction of the effective sample size below which `<e^{-beta W}>` is
/// flagged as dominated by a few outcomes.
pub const HEAVY_TAIL_ESS_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub mean: f64,
    pub mean_se: f64,
    /// `ln` of the sample mean of `e^{-beta W}`.
    pub ln_exp_avg: f64,
    /// Sample mean of `e^{-beta W}`; infinite when it overflows.
    pub exp_avg: f64,
    pub exp_avg_se: f64,
    /// Jackknife standard error of `ln_exp_avg`.
    pub ln_exp_avg_se: f64,
    /// `ln_exp_avg + beta dF`, the sample estimate of `Xi`.
    pub xi: f64,
    /// `(sum y)^2 / sum y^2` for `y = e^{-beta W}`.
    pub effective_sample_size: f64,
    pub heavy_tail: bool,
}

/// Sample mean of `W` and of `e^{-beta W}` with standard errors. The
/// exponential average is accumulated relative to its largest term, and its
/// log gets a leave-one-out jackknife error.
pub fn estimate_observables(samples: &WorkSamples, p: &Process) -> Result<Estimates> {
    let w = &samples.samples;
    if w.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let n = w.len() as f64;
    let beta = p.beta();
    let mean = w.iter().sum::<f64>() / n;
    let var = if w.len() > 1 {
        w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let peak = w
        .iter()
        .map(|x| -beta * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let y: Vec<f64> = w.iter().map(|x| libm::exp(-beta * x - peak)).collect();
    let sum_y: f64 = y.iter().sum();
    let sum_y2: f64 = y.iter().map(|v| v * v).sum();
    let mean_y = sum_y / n;
    let var_y = if w.len() > 1 {
        y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let ln_exp_avg = peak + libm::log(mean_y);
    let scale = libm::exp(peak);
    let ln_exp_avg_se = if w.len() > 1 {
        let loo: Vec<f64> = y
            .iter()
            .map(|v| libm::log((sum_y - v).max(0.0) / (n - 1.0)))
            .collect();
        if loo.iter().any(|x| !x.is_finite()) {
            f64::INFINITY
        } else {
            let m = loo.iter().sum::<f64>() / n;
            libm::sqrt((n - 1.0) / n * loo.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        }
    } else {
        0.0
    };
    let ess = sum_y * sum_y / sum_y2;
    Ok(Estimates {
        mean,
        mean_se: libm::sqrt(var / n),
        ln_exp_avg,
        exp_avg: scale * mean_y,
        exp_avg_se: scale * libm::sqrt(var_y / n),
        ln_exp_avg_se,
        xi: ln_exp_avg + beta * p.thermal_quantities().delta_f,
        effective_sample_size: ess,
        heavy_tail: ess < HEAVY_TAIL_ESS_FRACTION * n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modified::{circuit1_scheme, circuit2_scheme, tpm_eps_v_scheme, ShiftPolicy};
    use crate::random::{random_density, random_process};
    use crate::scheme::{tpm_scheme, SCHEME_TOL};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn induced_povms_match_schemes() {
        let mut r = rng(41);
        for d in [2, 3] {
            let p = random_process(&mut r, d, 1.0);
            let eps = 0.1;
            let pairs = [
                (build_tpm_circuit(&p).unwrap(), tpm_scheme(&p)),
                (
                    build_circuit1(&p, eps).unwrap(),
                    circuit1_scheme(&p, eps).unwrap(),
                ),
                (
                    build_circuit2(&p, eps, None).unwrap(),
                    circuit2_scheme(&p, eps).unwrap(),
                ),
            ];
            for (c, s) in pairs.iter() {
                let induced = c.induced_povm().unwrap();
                assert!(induced.validate(SCHEME_TOL).unwrap().passed);
                let dist = induced.distance(s);
                assert!(dist.max_element_diff < 1e-10, "{dist:?}");
                assert!(dist.max_work_diff < 1e-12 * p.char_energy_scale().unwrap());
            }
            let (s, par) = tpm_eps_v_scheme(&p, eps, ShiftPolicy::default()).unwrap();
            let c = build_circuit_epsv(&p, &par).unwrap();
            let dist = c.induced_povm().unwrap().distance(&s);
            assert!(dist.max_element_diff < 1e-10, "{dist:?}");
        }
    }

    #[test]
    fn circuit2_outcomes_do_not_depend_on_w_tilde() {
        let p = random_process(&mut rng(42), 3, 1.0);
        let a = build_circuit2(&p, 0.2, None)
            .unwrap()
            .induced_povm()
            .unwrap();
        let b = build_circuit2(&p, 0.2, Some(-17.5))
            .unwrap()
            .induced_povm()
            .unwrap();
        let dist = a.distance(&b);
        assert!(dist.max_element_diff < 1e-12 && dist.max_work_diff < 1e-12);
    }

    #[test]
    fn stage_completeness() {
        let p = random_process(&mut rng(43), 3, 1.0);
        for c in [
            build_circuit1(&p, 0.3).unwrap(),
            build_circuit2(&p, 0.3, None).unwrap(),
        ] {
            assert!(c.first().completeness_error().unwrap() < 1e-12);
            assert!(c.second().completeness_error().unwrap() < 1e-12);
        }
    }

    #[test]
    fn incomplete_instrument_is_rejected() {
        let ops = vec![KrausOperator::new(
            ComplexMatrix::identity(2).scale(0.5),
            0.0,
            "half",
        )];
        assert!(KrausInstrument::new(1, ops).is_err());
    }

    #[test]
    fn bad_m_is_rejected() {
        let p = random_process(&mut rng(44), 2, 1.0);
        let (_, mut par) = tpm_eps_v_scheme(&p, 0.1, ShiftPolicy::default()).unwrap();
        par.m = par.m.scale(1.5);
        assert!(matches!(
            build_circuit_epsv(&p, &par),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_order_free() {
        let p = random_process(&mut rng(45), 3, 1.0);
        let c = build_circuit2(&p, 0.2, None).unwrap();
        let rho = random_density(&mut rng(46), 3);
        let a = sample_trajectories(&c, &rho, 500, 7).unwrap();
        let b = sample_trajectories(&c, &rho, 500, 7).unwrap();
        assert_eq!(a, b);
        let t = TrajectoryTable::new(&c, &rho).unwrap();
        assert_eq!(t.shot(7, 321).2, a.samples[321]);
        assert_ne!(a, sample_trajectories(&c, &rho, 500, 8).unwrap());
        assert!(sample_trajectories(&c, &rho, 0, 7).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_sampling_matches_serial() {
        let p = random_process(&mut rng(47), 2, 1.0);
        let c = build_circuit1(&p, 0.2).unwrap();
        let rho = random_density(&mut rng(48), 2);
        assert_eq!(
            sample_trajectories(&c, &rho, 2000, 3).unwrap(),
            sample_trajectories_parallel(&c, &rho, 2000, 3).unwrap()
        );
    }

    #[test]
    fn joint_table_matches_induced_povm() {
        let p = random_process(&mut rng(49), 3, 1.0);
        let c = build_circuit1(&p, 0.25).unwrap();
        let rho = random_density(&mut rng(50), 3);
        let t = TrajectoryTable::new(&c, &rho).unwrap();
        let povm = c.induced_povm().unwrap();
        for (k, k1) in c.first().operators().iter().enumerate() {
            for (l, k2) in c.second().operators().iter().enumerate() {
                let label = format!("{}|{}", k1.label, k2.label);
                let expected = povm
                    .get(&label)
                    .map(|o| rho.expectation(&o.element))
                    .unwrap_or(0.0);
                assert!((t.joint[k][l] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let p = random_process(&mut rng(51), 2, 1.0);
        let s = WorkSamples {
            samples: vec![1.5; 10],
            outcomes: vec![(0, 0); 10],
            shots: 10,
            seed: 0,
        };
        let e = estimate_observables(&s, &p).unwrap();
        assert_eq!(e.mean_se, 0.0);
        assert_eq!(e.exp_avg_se, 0.0);
        assert!(e.ln_exp_avg_se.abs() < 1e-15);
        assert!((e.ln_exp_avg + 1.5).abs() < 1e-14);
        assert!(!e.heavy_tail);
    }

    #[test]
    fn heavy_tail_is_flagged() {
        let p = random_process(&mut rng(52), 2, 1.0);
        let mut samples = vec![0.0; 1000];
        samples[3] = -50.0;
        let s = WorkSamples {
            samples,
            outcomes: vec![(0, 0); 1000],
            shots: 1000,
            seed: 0,
        };
        let e = estimate_observables(&s, &p).unwrap();
        assert!(e.heavy_tail);
        assert!(e.exp_avg.is_finite());
    }
}
