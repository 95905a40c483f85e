//! Work-measurement schemes: a POVM with a work value attached to every
//! element, and the statistics they produce.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{schatten_inf_norm, DensityMatrix, HermitianOperator, ABS_FLOOR};
use crate::process::{Process, LEVEL_GROUPING_TOL};
use crate::stats::{log_sum_exp_weighted, pairwise_sum};

/// Default tolerance for [`MeasurementScheme::validate`].
pub const SCHEME_TOL: f64 = 1e-10;
/// Outcomes closer than this multiple of the energy scale are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Above this value of `beta * max|W|` the exponential average is flagged as
/// evaluated in the log domain.
pub const LOG_DOMAIN_THRESHOLD: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub element: HermitianOperator,
    pub work: f64,
    pub label: String,
}

impl Outcome {
    pub fn new(element: HermitianOperator, work: f64, label: impl Into<String>) -> Self {
        Self {
            element,
            work,
            label: label.into(),
        }
    }
}

/// A list of `(M_a, W_a, label)`.
///
/// Construction only checks shapes and finiteness; positivity and
/// completeness are checked by [`MeasurementScheme::validate`], so that
/// invalid schemes read from files can still be reported on.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScheme {
    dim: usize,
    outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `max(0, -min_a lambda_min(M_a))`.
    pub positivity_violation: f64,
    /// `|sum_a M_a - 1|_inf`.
    pub completeness_error: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `ln <e^{-beta W}>`; `log_domain` marks values whose exponent is too
/// large to represent reliably as a plain float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAverage {
    pub ln_value: f64,
    pub log_domain: bool,
}

impl ExpAverage {
    pub fn value(&self) -> f64 {
        libm::exp(self.ln_value)
    }
}

/// Element-wise distance between two schemes matched by label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeDistance {
    pub max_element_diff: f64,
    pub max_work_diff: f64,
}

impl MeasurementScheme {
    pub fn new(dim: usize, outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidScheme("scheme has no outcomes".into()));
        }
        for o in &outcomes {
            if o.element.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: o.element.dim(),
                });
            }
            if !o.work.is_finite() {
                return Err(Error::InvalidScheme(format!(
                    "outcome {} has non-finite work",
                    o.label
                )));
            }
        }
        Ok(Self { dim, outcomes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn into_outcomes(self) -> Vec<Outcome> {
        self.outcomes
    }

    pub fn works(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.work).collect()
    }

    pub fn get(&self, label: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn max_abs_work(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.work.abs())
            .fold(0.0, f64::max)
    }

    /// Same POVM with every work value shifted by `c`.
    pub fn shift_works(&self, c: f64) -> Self {
        let mut out = self.clone();
        for o in &mut out.outcomes {
            o.work += c;
        }
        out
    }

    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        let mut positivity_violation: f64 = 0.0;
        let mut sum = HermitianOperator::zeros(self.dim);
        for o in &self.outcomes {
            if !o.element.matrix().is_exactly_zero() {
                let lo = o.element.eig()?.min();
                positivity_violation = positivity_violation.max(-lo);
            }
            sum.add_scaled(&o.element, 1.0);
        }
        let completeness_error = (&sum - &HermitianOperator::identity(self.dim)).norm();
        Ok(ValidationReport {
            positivity_violation,
            completeness_error,
            tol,
            passed: positivity_violation <= tol && completeness_error <= tol,
        })
    }

    /// `sum_a W_a M_a`.
    pub fn first_moment_operator(&self) -> HermitianOperator {
        let mut out = HermitianOperator::zeros(self.dim);
        for o in &self.outcomes {
            out.add_scaled(&o.element, o.work);
        }
        out
    }

    /// Distance `|sum_a W_a M_a - Omega|_inf`.
    pub fn condition_i_residual(&self, p: &Process) -> f64 {
        (&self.first_moment_operator() - p.how_operator()).norm()
    }

    /// Whether the first moment reproduces `Omega` to `tol * |Omega|`.
    pub fn satisfies_condition_i(&self, p: &Process, tol: f64) -> bool {
        let scale = (tol * p.how_operator().norm()).max(ABS_FLOOR);
        self.condition_i_residual(p) <= scale
    }

    /// Outcome statistics on `rho`; outcomes with works closer than
    /// `1e-12 * energy_scale` are merged.
    pub fn work_distribution(&self, rho: &DensityMatrix, energy_scale: f64) -> WorkDistribution {
        let mut raw: Vec<(f64, f64)> = self
            .outcomes
            .iter()
            .map(|o| (o.work, rho.expectation(&o.element)))
            .collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = MERGE_TOL * energy_scale.abs();
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (w, p) in raw {
            match points.last_mut() {
                Some(last) if w - last.0 <= tol => last.1 += p,
                _ => points.push((w, p)),
            }
        }
        WorkDistribution {
            points,
            origin: String::new(),
        }
    }

    /// `<e^{-beta W}>` on the Gibbs state of `H`.
    pub fn exp_jarzynski(&self, p: &Process) -> ExpAverage {
        let beta = p.beta();
        let ops: Vec<&HermitianOperator> = self.outcomes.iter().map(|o| &o.element).collect();
        let diag = p.ln_thermal_expectations(&ops);
        let mut terms = Vec::with_capacity(self.len() * p.dim());
        for (o, row) in self.outcomes.iter().zip(&diag) {
            terms.extend(row.iter().map(|&(x, l)| (x, l - beta * o.work)));
        }
        ExpAverage {
            ln_value: log_sum_exp_weighted(&terms),
            log_domain: beta * self.max_abs_work() > LOG_DOMAIN_THRESHOLD,
        }
    }

    /// `Xi_S = ln <e^{-beta W}> + beta dF`.
    pub fn xi(&self, p: &Process) -> f64 {
        self.exp_jarzynski(p).ln_value + p.beta() * p.thermal_quantities().delta_f
    }

    /// Whether every element is a projector to `SCHEME_TOL`.
    pub fn is_projective(&self) -> bool {
        self.outcomes.iter().all(|o| {
            let m = o.element.matrix();
            let mut sq = m.matmul(m);
            sq.add_scaled(m, -1.0);
            sq.max_abs_entry() <= SCHEME_TOL
        })
    }

    /// `L_S = ln sum_a M_a e^{-beta W_a}`, evaluated with the largest
    /// exponent factored out.
    ///
    /// For a complete POVM the sum is bounded below by `e^{-beta W_max}`, and
    /// eigenvalues that rounding against the largest term cannot resolve
    /// (outlier works spread the sum over hundreds of e-folds) are clamped
    /// to that bound. Incomplete element sets get no such floor and must be
    /// positive definite as computed. Projective schemes skip the
    /// exponentials altogether.
    pub fn log_moment_operator(&self, p: &Process) -> Result<HermitianOperator> {
        let beta = p.beta();
        let exps: Vec<f64> = self.outcomes.iter().map(|o| -beta * o.work).collect();
        let peak = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lowest = exps.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut m = HermitianOperator::zeros(self.dim);
        let mut sum = HermitianOperator::identity(self.dim).scale(-1.0);
        for (o, &e) in self.outcomes.iter().zip(&exps) {
            m.add_scaled(&o.element, libm::exp(e - peak));
            sum.add_scaled(&o.element, 1.0);
        }
        let incomplete = sum.norm();
        if incomplete <= SCHEME_TOL && self.is_projective() {
            // orthogonal projectors: L = sum_a (-beta W_a) P_a with no rounding floor
            let mut l = HermitianOperator::zeros(self.dim);
            for (o, &e) in self.outcomes.iter().zip(&exps) {
                l.add_scaled(&o.element, e);
            }
            return Ok(l);
        }
        let s = m.eig()?;
        let floor = if incomplete <= SCHEME_TOL {
            Some(lowest - peak + libm::log1p(-incomplete))
        } else {
            None
        };
        let mut logs = Vec::with_capacity(self.dim);
        for &x in s.eigenvalues() {
            let lx = if x > 0.0 {
                libm::log(x)
            } else {
                f64::NEG_INFINITY
            };
            match floor {
                Some(f) => logs.push(lx.max(f) + peak),
                None if x > 0.0 => logs.push(lx + peak),
                None => {
                    return Err(Error::InvalidScheme(format!(
                        "moment operator is not positive definite: smallest eigenvalue {x:e}"
                    )))
                }
            }
        }
        Ok(HermitianOperator::symmetrized(&s.reconstruct_with(&logs)))
    }

    /// `ln tr(e^{-beta H} e^L) - ln tr e^{L - beta H}` with `L` the log-moment
    /// operator. Nonnegative by the Golden-Thompson inequality.
    pub fn golden_thompson_correction(&self, p: &Process) -> Result<f64> {
        let l = self.log_moment_operator(p)?;
        let beta = p.beta();
        // tr(e^{-beta H} e^L) = Z <e^{-beta W}>, free of any clamping in L
        let lhs = self.exp_jarzynski(p).ln_value + p.thermal_quantities().ln_z;
        let mut sum = l.clone();
        sum.add_scaled(p.h(), -beta);
        let ss = sum.eig()?;
        let rhs_terms: Vec<(f64, f64)> = ss.eigenvalues().iter().map(|&x| (1.0, x)).collect();
        Ok(lhs - log_sum_exp_weighted(&rhs_terms))
    }

    /// Largest element and work deviations from `other`, matching outcomes
    /// by label. A label missing on one side counts as a zero element, and
    /// works are compared only where both elements are nonzero.
    pub fn distance(&self, other: &Self) -> SchemeDistance {
        let index = |s: &Self| -> BTreeMap<String, (HermitianOperator, f64)> {
            let mut map: BTreeMap<String, (HermitianOperator, f64)> = BTreeMap::new();
            for o in &s.outcomes {
                map.entry(o.label.clone())
                    .and_modify(|e| e.0.add_scaled(&o.element, 1.0))
                    .or_insert((o.element.clone(), o.work));
            }
            map
        };
        let (a, b) = (index(self), index(other));
        let mut out = SchemeDistance {
            max_element_diff: 0.0,
            max_work_diff: 0.0,
        };
        for (label, (ma, wa)) in &a {
            match b.get(label) {
                Some((mb, wb)) => {
                    out.max_element_diff = out.max_element_diff.max((ma - mb).norm());
                    if !ma.matrix().is_exactly_zero() && !mb.matrix().is_exactly_zero() {
                        out.max_work_diff = out.max_work_diff.max((wa - wb).abs());
                    }
                }
                None => out.max_element_diff = out.max_element_diff.max(ma.norm()),
            }
        }
        for (label, (mb, _)) in &b {
            if !a.contains_key(label) {
                out.max_element_diff = out.max_element_diff.max(mb.norm());
            }
        }
        out
    }
}

/// Label of the TPM outcome for levels `i` of `H` and `j` of `H'`.
pub fn tpm_label(i: usize, j: usize) -> String {
    format!("E{i}|E'{j}")
}

/// Two projective energy measurements. Degenerate levels are measured by
/// their spectral projectors: `M_ij = P_i U' P'_j U P_i` with work
/// `E'_j - E_i`.
pub fn tpm_scheme(p: &Process) -> MeasurementScheme {
    let u = p.u().matrix();
    let levels = p.levels();
    let levels_prime = p.levels_prime();
    let mut outcomes = Vec::with_capacity(levels.len() * levels_prime.len());
    for (i, li) in levels.iter().enumerate() {
        for (j, lj) in levels_prime.iter().enumerate() {
            let back = lj.projector.conjugate_by(u);
            let m = back.conjugate_by(li.projector.matrix());
            outcomes.push(Outcome::new(m, lj.energy - li.energy, tpm_label(i, j)));
        }
    }
    MeasurementScheme {
        dim: p.dim(),
        outcomes,
    }
}

/// Projective measurement of `Omega` with its eigenvalues as outcomes.
pub fn how_scheme(p: &Process) -> Result<MeasurementScheme> {
    let s = p.how_operator().eig()?;
    let outcomes = s
        .clusters(LEVEL_GROUPING_TOL)
        .into_iter()
        .enumerate()
        .map(|(k, idx)| {
            let value = idx.iter().map(|&i| s.eigenvalues()[i]).sum::<f64>() / idx.len() as f64;
            Outcome::new(
                HermitianOperator::symmetrized(&s.group_projector(&idx)),
                value,
                format!("omega{k}"),
            )
        })
        .collect();
    Ok(MeasurementScheme {
        dim: p.dim(),
        outcomes,
    })
}

/// `beta dF + ln tr(tau e^{-beta Omega})`.
pub fn xi_how_bound(p: &Process) -> Result<f64> {
    let s = p.how_operator().eig()?;
    let t = p.thermal_quantities();
    let projectors: Vec<HermitianOperator> = (0..s.dim())
        .map(|k| HermitianOperator::projector(&s.vector(k)))
        .collect();
    let ops: Vec<&HermitianOperator> = projectors.iter().collect();
    let diag = p.ln_thermal_expectations(&ops);
    let mut terms = Vec::with_capacity(s.dim() * s.dim());
    for (k, row) in diag.iter().enumerate() {
        let e = -p.beta() * s.eigenvalues()[k];
        terms.extend(row.iter().map(|&(x, l)| (x, l + e)));
    }
    Ok(p.beta() * t.delta_f + log_sum_exp_weighted(&terms))
}

/// Lower bound on `sum_x |W_x|` over the extra outcomes of any condition-(i)
/// scheme whose first `d^2` elements are `epsilon`-close to the TPM ones:
/// `|Omega - Omega_D|/(eps d^2) - (eps'/eps) w - sum_ij |E'_j - E_i| / d^2`.
///
/// `eps_ratio` is `eps'/eps`, the work-proximity parameter in units of
/// `epsilon`; schemes built here keep TPM works exactly, for which any
/// ratio `>= 0` is admissible, and `1` is the default.
pub fn outlier_lower_bound(p: &Process, epsilon: f64, eps_ratio: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let d2 = (p.dim() * p.dim()) as f64;
    let gap = schatten_inf_norm((p.how_operator() - &p.dephased_how()).matrix());
    let w = p.char_energy_scale()?;
    let mut sum_tpm = Vec::with_capacity(p.dim() * p.dim());
    for &e in p.h_spectrum().eigenvalues() {
        for &ep in p.h_prime_spectrum().eigenvalues() {
            sum_tpm.push((ep - e).abs());
        }
    }
    Ok(gap / (epsilon * d2) - eps_ratio * w - pairwise_sum(&sum_tpm) / d2)
}

/// A finite work distribution, sorted by work value.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    points: Vec<(f64, f64)>,
    origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfBoundReport {
    /// `max_zeta [Phi(zeta) - e^{beta zeta + xi}]`, negative when the bound
    /// holds with room to spare.
    pub max_excess: f64,
    /// Where `max_excess` is attained.
    pub worst_zeta: f64,
    pub holds: bool,
}

impl WorkDistribution {
    /// Validates `p >= -1e-12` and `sum p = 1 +- 1e-10` and sorts the points.
    pub fn new(mut points: Vec<(f64, f64)>, origin: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if points
            .iter()
            .any(|(w, p)| !w.is_finite() || !p.is_finite() || *p < -1e-12)
        {
            return Err(Error::InvalidParameter(
                "distribution has non-finite or negative entries".into(),
            ));
        }
        let total: f64 = points.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            points,
            origin: origin.into(),
        })
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn total_probability(&self) -> f64 {
        let ps: Vec<f64> = self.points.iter().map(|(_, p)| *p).collect();
        pairwise_sum(&ps)
    }

    pub fn mean(&self) -> f64 {
        let terms: Vec<f64> = self.points.iter().map(|(w, p)| w * p).collect();
        pairwise_sum(&terms)
    }

    /// `P(W <= zeta)`.
    pub fn cdf(&self, zeta: f64) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .take_while(|(w, _)| *w <= zeta)
            .map(|(_, p)| p)
            .sum();
        s.clamp(0.0, 1.0)
    }

    /// `ln <e^{-beta W}>`.
    pub fn ln_exp_average(&self, beta: f64) -> f64 {
        let terms: Vec<(f64, f64)> = self.points.iter().map(|(w, p)| (*p, -beta * w)).collect();
        log_sum_exp_weighted(&terms)
    }

    /// Distribution of `W - delta_f`.
    pub fn dissipated(&self, delta_f: f64) -> Self {
        Self {
            points: self.points.iter().map(|(w, p)| (w - delta_f, *p)).collect(),
            origin: self.origin.clone(),
        }
    }

    /// Checks `Phi(zeta) <= e^{beta zeta + xi}` for a dissipated-work
    /// distribution. The CDF is a right-continuous step function and the
    /// bound is increasing, so the support points are the only candidates
    /// for the largest excess.
    pub fn second_law_cdf_bound(&self, beta: f64, xi: f64) -> CdfBoundReport {
        let mut report = CdfBoundReport {
            max_excess: f64::NEG_INFINITY,
            worst_zeta: f64::NAN,
            holds: true,
        };
        let mut acc = 0.0;
        for (w, p) in &self.points {
            acc += p;
            let bound = libm::exp(beta * w + xi);
            let excess = acc.min(1.0) - bound;
            if excess > report.max_excess {
                report.max_excess = excess;
                report.worst_zeta = *w;
            }
        }
        report.holds = report.max_excess <= 1e-12;
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, UnitaryOperator};
    use crate::random::{random_density, random_povm, random_process};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit() -> Process {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let u = UnitaryOperator::new(ComplexMatrix::from_fn(2, |r, c| {
            num_complex::Complex64::new(if r == 1 && c == 1 { -s } else { s }, 0.0)
        }))
        .unwrap();
        Process::new(
            HermitianOperator::from_real_diagonal(&[0.0, 2.0]),
            HermitianOperator::from_real_diagonal(&[0.0, 3.0]),
            u,
            0.2,
        )
        .unwrap()
    }

    #[test]
    fn tpm_is_valid_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [2, 3, 4] {
            for beta in [0.1, 1.0, 5.0] {
                let p = random_process(&mut rng, d, beta);
                let s = tpm_scheme(&p);
                assert!(s.validate(SCHEME_TOL).unwrap().passed);
                assert!(s.xi(&p).abs() < 1e-10, "d={d} beta={beta} xi={}", s.xi(&p));
                let fm = s.first_moment_operator();
                assert!((&fm - &p.dephased_how()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tpm_trivial_process_has_zero_work() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let p = Process::new(h.clone(), h, UnitaryOperator::identity(3), 1.0).unwrap();
        let s = tpm_scheme(&p);
        for o in s.outcomes() {
            if !o.element.matrix().is_exactly_zero() {
                assert_eq!(o.work, 0.0);
            }
        }
    }

    #[test]
    fn tpm_qubit_weights_are_half() {
        let p = qubit();
        let s = tpm_scheme(&p);
        assert_eq!(s.len(), 4);
        for o in s.outcomes() {
            assert!((o.element.trace() - 0.5).abs() < 1e-15);
        }
        assert!(!s.satisfies_condition_i(&p, 1e-10));
    }

    #[test]
    fn tpm_projective_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = random_process(&mut rng, 3, 1.0);
        let s = tpm_scheme(&p);
        let ei = p.h_spectrum().vector(1);
        let rho = DensityMatrix::pure(&ei).unwrap();
        let d = s.work_distribution(&rho, 1.0);
        for j in 0..3 {
            let w = p.h_prime_spectrum().eigenvalues()[j] - p.h_spectrum().eigenvalues()[1];
            let amp: num_complex::Complex64 = p
                .h_prime_spectrum()
                .vector(j)
                .iter()
                .zip(p.u().matrix().apply(&ei))
                .map(|(a, b)| a.conj() * b)
                .sum();
            let prob: f64 = d
                .points()
                .iter()
                .filter(|(x, _)| (x - w).abs() < 1e-12)
                .map(|(_, q)| q)
                .sum();
            assert!((prob - amp.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn how_scheme_properties() {
        let p = qubit();
        let s = how_scheme(&p).unwrap();
        assert!(s.satisfies_condition_i(&p, 1e-10));
        assert!((s.xi(&p) - xi_how_bound(&p).unwrap()).abs() < 1e-10);
        assert!(xi_how_bound(&p).unwrap() > 0.0);
        // 2x2 diagonalization of Omega = [[1.5, -1.5], [-1.5, -0.5]]
        let disc = libm::sqrt(1.0 + 1.5 * 1.5);
        let mut w = s.works();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - (0.5 - disc)).abs() < 1e-12);
        assert!((w[1] - (0.5 + disc)).abs() < 1e-12);

        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let trivial = Process::new(h.clone(), h, UnitaryOperator::identity(2), 1.0).unwrap();
        let s = how_scheme(&trivial).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.outcomes()[0].work, 0.0);
        assert!(xi_how_bound(&trivial).unwrap().abs() < 1e-14);
    }

    #[test]
    fn validation_detects_failures() {
        let p = qubit();
        let s = tpm_scheme(&p);
        let mut outs = s.clone().into_outcomes();
        outs[0].element = outs[0].element.scale(1.1);
        let bad = MeasurementScheme::new(2, outs).unwrap();
        let r = bad.validate(SCHEME_TOL).unwrap();
        assert!(!r.passed && r.completeness_error > 1e-3);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let povm = random_povm(&mut rng, 3, 5);
        let outs: Vec<Outcome> = povm
            .into_iter()
            .enumerate()
            .map(|(k, m)| Outcome::new(m, k as f64, format!("k{k}")))
            .collect();
        assert!(
            MeasurementScheme::new(3, outs)
                .unwrap()
                .validate(SCHEME_TOL)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn mean_matches_first_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let p = random_process(&mut rng, 3, 1.0);
        let rho = random_density(&mut rng, 3);
        for s in [tpm_scheme(&p), how_scheme(&p).unwrap()] {
            let d = s.work_distribution(&rho, p.char_energy_scale().unwrap());
            assert!((d.mean() - rho.expectation(&s.first_moment_operator())).abs() < 1e-10);
        }
    }

    #[test]
    fn shifting_works_scales_exp_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let p = random_process(&mut rng, 3, 0.8);
        let s = how_scheme(&p).unwrap();
        let a = s.exp_jarzynski(&p).ln_value;
        let b = s.shift_works(1.7).exp_jarzynski(&p).ln_value;
        assert!((b - (a - 0.8 * 1.7)).abs() < 1e-12);
        assert!(!s.exp_jarzynski(&p).log_domain);
        assert!(s.shift_works(1e4).exp_jarzynski(&p).log_domain);
    }

    #[test]
    fn log_moment_operator_cases() {
        let p = qubit();
        let single = MeasurementScheme::new(
            2,
            vec![Outcome::new(HermitianOperator::identity(2), 1.5, "all")],
        )
        .unwrap();
        let l = single.log_moment_operator(&p).unwrap();
        assert!((&l - &HermitianOperator::identity(2).scale(-0.2 * 1.5)).norm() < 1e-14);
        // Jensen operator inequality for a condition-(i) scheme
        let how = how_scheme(&p).unwrap();
        let mut x = how.log_moment_operator(&p).unwrap();
        x.add_scaled(p.how_operator(), p.beta());
        assert!(x.eig().unwrap().min() >= -1e-9);
        // TPM log-moment commutes with H
        let lt = tpm_scheme(&p).log_moment_operator(&p).unwrap();
        assert!(schatten_inf_norm(&lt.matrix().commutator(p.h().matrix())) < 1e-12);

        let rank_deficient = MeasurementScheme::new(
            2,
            vec![Outcome::new(
                HermitianOperator::from_real_diagonal(&[1.0, 0.0]),
                0.0,
                "a",
            )],
        )
        .unwrap();
        assert!(matches!(
            rank_deficient.log_moment_operator(&p),
            Err(Error::InvalidScheme(_))
        ));
    }

    #[test]
    fn golden_thompson_chain() {
        let p = qubit();
        let how = how_scheme(&p).unwrap();
        let gt = how.golden_thompson_correction(&p).unwrap();
        let xi = how.xi(&p);
        assert!(gt > 0.0);
        assert!(xi >= gt - 1e-9);
        assert!(tpm_scheme(&p).golden_thompson_correction(&p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn how_saturates_golden_thompson_at_low_temperature() {
        // L = -beta Omega exactly, so xi_GT = Xi even when beta times the
        // spread of Omega is far beyond double precision
        let mut rng = ChaCha8Rng::seed_from_u64(1035);
        let p = random_process(&mut rng, 8, 5.0);
        let how = how_scheme(&p).unwrap();
        assert!(how.is_projective());
        let xi = how.xi(&p);
        let gt = how.golden_thompson_correction(&p).unwrap();
        assert!((xi - gt).abs() <= 1e-10 * xi, "xi {xi} gt {gt}");
        assert!(!circuit_like(&p).is_projective());
    }

    fn circuit_like(p: &Process) -> MeasurementScheme {
        let t = tpm_scheme(p);
        let outcomes = t
            .outcomes()
            .iter()
            .map(|o| Outcome::new(o.element.scale(0.5), o.work, o.label.clone()))
            .chain(core::iter::once(Outcome::new(
                HermitianOperator::identity(p.dim()).scale(0.5),
                0.0,
                "half",
            )))
            .collect();
        MeasurementScheme::new(p.dim(), outcomes).unwrap()
    }

    #[test]
    fn cdf_steps() {
        let d = WorkDistribution::new(vec![(1.0, 0.25), (-1.0, 0.5), (3.0, 0.25)], "t").unwrap();
        assert_eq!(d.cdf(-2.0), 0.0);
        assert_eq!(d.cdf(-1.0), 0.5);
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf(3.0), 1.0);
        assert!(WorkDistribution::new(vec![(0.0, 0.5)], "t").is_err());
    }

    #[test]
    fn cdf_bound_for_tpm_and_falsification() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let p = random_process(&mut rng, 4, 1.3);
        let t = p.thermal_quantities();
        let d = tpm_scheme(&p)
            .work_distribution(&t.tau, p.char_energy_scale().unwrap())
            .dissipated(t.delta_f);
        assert!(d.second_law_cdf_bound(p.beta(), 0.0).holds);
        assert!(!d.second_law_cdf_bound(p.beta(), -5.0).holds);
    }

    #[test]
    fn outlier_bound_is_vacuous_without_coherence() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let hp = HermitianOperator::from_real_diagonal(&[0.5, 2.0]);
        let p = Process::new(h, hp, UnitaryOperator::identity(2), 1.0).unwrap();
        assert!(outlier_lower_bound(&p, 0.01, 1.0).unwrap() <= 0.0);
        assert!(outlier_lower_bound(&qubit(), 0.01, 1.0).unwrap() > 10.0);
        assert!(outlier_lower_bound(&p, 1.5, 1.0).is_err());
    }

    #[test]
    fn distance_by_label() {
        let p = qubit();
        let s = tpm_scheme(&p);
        let d = s.distance(&s);
        assert_eq!(d.max_element_diff, 0.0);
        let shifted = s.shift_works(0.5);
        assert!((s.distance(&shifted).max_work_diff - 0.5).abs() < 1e-15);
    }
}
