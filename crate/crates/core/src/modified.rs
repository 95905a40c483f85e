//! POVM-level epsilon-modifications of the TPM scheme that satisfy
//! condition (i): the two single-control circuits and the variant with
//! shifted main outcomes (`TPM_{eps,V}`).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{HermitianOperator, Spectrum};
use crate::process::Process;
use crate::scheme::{tpm_scheme, MeasurementScheme, Outcome};

/// Default lower margin of `omega_hat`, in units of `w`.
pub const DEFAULT_DELTA_MARGIN: f64 = 0.05;

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// `Lambda = (Omega - (1 - eps) Omega_D) / eps` with its eigensystem.
/// Eigenvector `k` of `Lambda` is paired with eigenvector `k` of `H`, both
/// in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSystem {
    pub epsilon: f64,
    pub lambda: HermitianOperator,
    pub spectrum: Spectrum,
}

impl LambdaSystem {
    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.spectrum.eigenvalues()[i]
    }

    /// `W~_i = <E_i|Omega|E_i> - lambda_i`.
    pub fn shifts(&self, p: &Process, omega: &HermitianOperator) -> Vec<f64> {
        (0..p.dim())
            .map(|i| omega.expectation(&p.h_spectrum().vector(i)) - self.eigenvalue(i))
            .collect()
    }
}

pub fn lambda_system(p: &Process, epsilon: f64) -> Result<LambdaSystem> {
    lambda_system_for(p, p.how_operator(), epsilon)
}

/// `Lambda` for an arbitrary target `omega` in place of the process's own
/// work operator, with the TPM part unchanged.
pub fn lambda_system_for(
    p: &Process,
    omega: &HermitianOperator,
    epsilon: f64,
) -> Result<LambdaSystem> {
    check_epsilon(epsilon)?;
    let mut lambda = omega.clone();
    lambda.add_scaled(&p.dephased_how(), -(1.0 - epsilon));
    let lambda = lambda.scale(1.0 / epsilon);
    let spectrum = lambda.eig()?;
    Ok(LambdaSystem {
        epsilon,
        lambda,
        spectrum,
    })
}

fn scaled_tpm(p: &Process, factor: f64, shift: f64) -> Vec<Outcome> {
    tpm_scheme(p)
        .into_outcomes()
        .into_iter()
        .map(|o| Outcome::new(o.element.scale(factor), o.work + shift, o.label))
        .collect()
}

/// Label of the outlier outcome fed by eigenvector `i` of `Lambda`.
pub fn outlier_label(i: usize) -> alloc::string::String {
    format!("L{i}")
}

/// Circuit 1: main elements `(1 - eps) M^TPM_IJ` with TPM works, and for
/// every eigenvector `|E_i>` of `H` and level `J` of `H'` an outlier
/// `eps <E_i|U' P'_J U|E_i> |l_i><l_i|` with work `E'_J - E_i - W~_i`.
pub fn circuit1_scheme(p: &Process, epsilon: f64) -> Result<MeasurementScheme> {
    let ls = lambda_system(p, epsilon)?;
    let shifts = ls.shifts(p, p.how_operator());
    let mut outcomes = scaled_tpm(p, 1.0 - epsilon, 0.0);
    let u = p.u().matrix();
    let levels_prime = p.levels_prime();
    for i in 0..p.dim() {
        let e_i = p.h_spectrum().vector(i);
        let energy = p.h_spectrum().eigenvalues()[i];
        let proj = HermitianOperator::projector(&ls.spectrum.vector(i));
        for (j, lj) in levels_prime.iter().enumerate() {
            let weight = lj.projector.conjugate_by(u).expectation(&e_i);
            outcomes.push(Outcome::new(
                proj.scale(epsilon * weight),
                lj.energy - energy - shifts[i],
                format!("{}|E'{j}", outlier_label(i)),
            ));
        }
    }
    MeasurementScheme::new(p.dim(), outcomes)
}

/// Label of the second-stage outcome on the control-flipped branch.
pub const IDLE_LABEL: &str = "idle";

/// Circuit 2: main elements as in Circuit 1 and `d` outliers
/// `eps |l_i><l_i|` with work `lambda_i`.
pub fn circuit2_scheme(p: &Process, epsilon: f64) -> Result<MeasurementScheme> {
    circuit2_scheme_for(p, p.how_operator(), epsilon)
}

/// Circuit 2 built to reproduce `omega` instead of the process's own work
/// operator, e.g. a perturbed one.
pub fn circuit2_scheme_for(
    p: &Process,
    omega: &HermitianOperator,
    epsilon: f64,
) -> Result<MeasurementScheme> {
    let ls = lambda_system_for(p, omega, epsilon)?;
    let mut outcomes = scaled_tpm(p, 1.0 - epsilon, 0.0);
    for i in 0..p.dim() {
        outcomes.push(Outcome::new(
            HermitianOperator::projector(&ls.spectrum.vector(i)).scale(epsilon),
            ls.eigenvalue(i),
            format!("{}|{IDLE_LABEL}", outlier_label(i)),
        ));
    }
    MeasurementScheme::new(p.dim(), outcomes)
}

/// How the shift `V` of `TPM_{eps,V}` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftPolicy {
    /// Smallest `V >= 0` with `lambda_min(omega_hat) >= delta * w`.
    MinimalMargin { delta: f64 },
    /// A given `V`; rejected unless `omega_hat` is positive definite.
    Fixed { v_shift: f64 },
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        ShiftPolicy::MinimalMargin {
            delta: DEFAULT_DELTA_MARGIN,
        }
    }
}

/// Parameters of `TPM_{eps,V}`: `omega_hat = Omega - Omega_D + eps Omega_D +
/// w V (1 - eps)`, `v = lambda_max(omega_hat) / w` and `m = omega_hat / (v w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsVParameters {
    pub epsilon: f64,
    /// `V`, dimensionless (the main outcomes are shifted by `-w V`).
    pub v_shift: f64,
    pub v: f64,
    pub w: f64,
    /// Margin used by the minimal-margin policy, `None` for a fixed `V`.
    pub delta_margin: Option<f64>,
    pub m: HermitianOperator,
    pub omega_hat: HermitianOperator,
}

impl EpsVParameters {
    /// Work of the `m` outlier, `v w / eps`.
    pub fn outlier_work(&self) -> f64 {
        self.v * self.w / self.epsilon
    }
}

/// Labels of the two extra outcomes of `TPM_{eps,V}`.
pub const FLIP_LABEL: &str = "flip";
pub const M_LABEL: &str = "m";
pub const ONE_MINUS_M_LABEL: &str = "1-m";

pub fn eps_v_parameters(p: &Process, epsilon: f64, policy: ShiftPolicy) -> Result<EpsVParameters> {
    check_epsilon(epsilon)?;
    let w = p.char_energy_scale()?;
    let od = p.dephased_how();
    let mut a = p.how_operator().clone();
    a.add_scaled(&od, epsilon - 1.0);
    let a_min = a.eig()?.min();
    let (v_shift, delta_margin) = match policy {
        ShiftPolicy::MinimalMargin { delta } => {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "delta margin must be positive, got {delta}"
                )));
            }
            (
                ((delta - a_min / w) / (1.0 - epsilon)).max(0.0),
                Some(delta),
            )
        }
        ShiftPolicy::Fixed { v_shift } => {
            if !(v_shift >= 0.0 && v_shift.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "V must be >= 0, got {v_shift}"
                )));
            }
            (v_shift, None)
        }
    };
    let omega_hat = a.shift(w * v_shift * (1.0 - epsilon));
    let spec = omega_hat.eig()?;
    if spec.min() <= 0.0 {
        return Err(Error::Infeasible(format!(
            "omega_hat is not positive definite for V = {v_shift} (smallest eigenvalue {:e})",
            spec.min()
        )));
    }
    let v = spec.max() / w;
    let m = omega_hat.scale(1.0 / (v * w));
    Ok(EpsVParameters {
        epsilon,
        v_shift,
        v,
        w,
        delta_margin,
        m,
        omega_hat,
    })
}

/// `TPM_{eps,V}`: main elements `(1 - eps) M^TPM_ij` with works
/// `W^TPM_ij - w V`, plus `eps m` with work `v w / eps` and `eps (1 - m)`
/// with work `0`.
pub fn tpm_eps_v_scheme(
    p: &Process,
    epsilon: f64,
    policy: ShiftPolicy,
) -> Result<(MeasurementScheme, EpsVParameters)> {
    let params = eps_v_parameters(p, epsilon, policy)?;
    let scheme = tpm_eps_v_scheme_with(p, &params)?;
    Ok((scheme, params))
}

/// `TPM_{eps,V}` from precomputed parameters.
pub fn tpm_eps_v_scheme_with(p: &Process, params: &EpsVParameters) -> Result<MeasurementScheme> {
    let eps = params.epsilon;
    let mut outcomes = scaled_tpm(p, 1.0 - eps, -params.w * params.v_shift);
    let one = HermitianOperator::identity(p.dim());
    outcomes.push(Outcome::new(
        params.m.scale(eps),
        params.outlier_work(),
        format!("{FLIP_LABEL}|{M_LABEL}"),
    ));
    outcomes.push(Outcome::new(
        (&one - &params.m).scale(eps),
        0.0,
        format!("{FLIP_LABEL}|{ONE_MINUS_M_LABEL}"),
    ));
    MeasurementScheme::new(p.dim(), outcomes)
}
