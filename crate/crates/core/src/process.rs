//! The driven process `(H, H', U, beta)` and quantities derived from it.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    schatten_inf_norm, ComplexMatrix, DensityMatrix, HermitianOperator, Spectrum, UnitaryOperator,
};

/// Relative gap below which eigenvalues of `H` or `H'` count as degenerate.
pub const LEVEL_GROUPING_TOL: f64 = 1e-12;

/// A (possibly degenerate) energy level: its value, the eigenvector indices
/// spanning it and the spectral projector.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    pub indices: Vec<usize>,
    pub projector: HermitianOperator,
}

/// Partition functions and free energies of `H` and `H'` at the process
/// temperature. The logarithms are stored so that extreme `beta` does not
/// overflow `Z` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalQuantities {
    pub tau: DensityMatrix,
    pub ln_z: f64,
    pub ln_z_prime: f64,
    pub free_energy: f64,
    pub free_energy_prime: f64,
    pub delta_f: f64,
}

impl ThermalQuantities {
    pub fn z(&self) -> f64 {
        libm::exp(self.ln_z)
    }

    pub fn z_prime(&self) -> f64 {
        libm::exp(self.ln_z_prime)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    h: HermitianOperator,
    h_prime: HermitianOperator,
    u: UnitaryOperator,
    beta: f64,
    h_spectrum: Spectrum,
    h_prime_spectrum: Spectrum,
    omega: HermitianOperator,
    energy_scale: Option<f64>,
}

impl Process {
    pub fn new(
        h: HermitianOperator,
        h_prime: HermitianOperator,
        u: UnitaryOperator,
        beta: f64,
    ) -> Result<Self> {
        let d = h.dim();
        for found in [h_prime.dim(), u.dim()] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and positive, got {beta}"
            )));
        }
        let h_spectrum = h.eig()?;
        let h_prime_spectrum = h_prime.eig()?;
        let omega = &h_prime.conjugate_by(u.matrix()) - &h;
        Ok(Self {
            h,
            h_prime,
            u,
            beta,
            h_spectrum,
            h_prime_spectrum,
            omega,
            energy_scale: None,
        })
    }

    /// Same process at another inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and positive, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            ..self.clone()
        })
    }

    /// Replaces the default energy scale `sqrt(tr H^2 + tr H'^2)`.
    pub fn with_energy_scale(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "energy scale must be positive, got {w}"
            )));
        }
        self.energy_scale = Some(w);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn h(&self) -> &HermitianOperator {
        &self.h
    }

    pub fn h_prime(&self) -> &HermitianOperator {
        &self.h_prime
    }

    pub fn u(&self) -> &UnitaryOperator {
        &self.u
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h_spectrum(&self) -> &Spectrum {
        &self.h_spectrum
    }

    pub fn h_prime_spectrum(&self) -> &Spectrum {
        &self.h_prime_spectrum
    }

    /// Distinct levels of `H`, ascending.
    pub fn levels(&self) -> Vec<EnergyLevel> {
        levels_of(&self.h_spectrum)
    }

    /// Distinct levels of `H'`, ascending.
    pub fn levels_prime(&self) -> Vec<EnergyLevel> {
        levels_of(&self.h_prime_spectrum)
    }

    /// `Omega = U' H' U - H`.
    pub fn how_operator(&self) -> &HermitianOperator {
        &self.omega
    }

    /// Pinching of `Omega` by the eigenprojectors of `H`.
    pub fn dephased_how(&self) -> HermitianOperator {
        pinch(&self.omega, &self.levels())
    }

    pub fn thermal_quantities(&self) -> ThermalQuantities {
        let (tau, ln_z) = gibbs(&self.h_spectrum, self.beta);
        let (_, ln_z_prime) = gibbs(&self.h_prime_spectrum, self.beta);
        let free_energy = -ln_z / self.beta;
        let free_energy_prime = -ln_z_prime / self.beta;
        ThermalQuantities {
            tau,
            ln_z,
            ln_z_prime,
            free_energy,
            free_energy_prime,
            delta_f: free_energy_prime - free_energy,
        }
    }

    /// `ln` of the Gibbs populations in the eigenbasis of `H`, in the order
    /// of [`Process::h_spectrum`].
    pub fn gibbs_log_weights(&self) -> Vec<f64> {
        let (_, ln_z) = gibbs(&self.h_spectrum, self.beta);
        self.h_spectrum
            .eigenvalues()
            .iter()
            .map(|&e| -self.beta * e - ln_z)
            .collect()
    }

    /// For each operator `X`, the pairs `(<E_k|X|E_k>, ln tau_k)`, so that
    /// `tr(tau X) = sum_k <E_k|X|E_k> e^{ln tau_k}` can be combined with
    /// further exponential weights without forming a dense `tau`.
    pub fn ln_thermal_expectations(&self, ops: &[&HermitianOperator]) -> Vec<Vec<(f64, f64)>> {
        let lw = self.gibbs_log_weights();
        let vecs: Vec<_> = (0..self.dim()).map(|k| self.h_spectrum.vector(k)).collect();
        ops.iter()
            .map(|x| {
                vecs.iter()
                    .zip(&lw)
                    .map(|(v, &l)| (x.expectation(v), l))
                    .collect()
            })
            .collect()
    }

    /// Gibbs state of `H`.
    pub fn thermal_state(&self) -> DensityMatrix {
        gibbs(&self.h_spectrum, self.beta).0
    }

    /// Characteristic energy `w = sqrt(tr H^2 + tr H'^2)`, or the override.
    pub fn char_energy_scale(&self) -> Result<f64> {
        if let Some(w) = self.energy_scale {
            return Ok(w);
        }
        let sq: f64 = self
            .h_spectrum
            .eigenvalues()
            .iter()
            .chain(self.h_prime_spectrum.eigenvalues())
            .map(|e| e * e)
            .sum();
        if sq == 0.0 {
            return Err(Error::DegenerateProcess);
        }
        Ok(libm::sqrt(sq))
    }

    /// `Omega + eta * what`.
    pub fn perturb_how(&self, eta: f64, what: &HermitianOperator) -> Result<HermitianOperator> {
        if what.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: what.dim(),
            });
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be >= 0, got {eta}"
            )));
        }
        let mut out = self.omega.clone();
        out.add_scaled(what, eta);
        Ok(out)
    }

    /// `|[Omega, H]| / (|Omega| |H|)`, zero when either norm vanishes.
    pub fn coherence(&self) -> f64 {
        let denom = self.omega.norm() * self.h_spectrum.spectral_radius();
        if denom == 0.0 {
            return 0.0;
        }
        schatten_inf_norm(&self.omega.matrix().commutator(self.h.matrix())) / denom
    }
}

fn levels_of(s: &Spectrum) -> Vec<EnergyLevel> {
    s.clusters(LEVEL_GROUPING_TOL)
        .into_iter()
        .map(|indices| {
            let energy =
                indices.iter().map(|&k| s.eigenvalues()[k]).sum::<f64>() / indices.len() as f64;
            let projector = HermitianOperator::symmetrized(&s.group_projector(&indices));
            EnergyLevel {
                energy,
                indices,
                projector,
            }
        })
        .collect()
}

/// `sum_I P_I A P_I`.
pub(crate) fn pinch(a: &HermitianOperator, levels: &[EnergyLevel]) -> HermitianOperator {
    let mut out = ComplexMatrix::zeros(a.dim());
    for level in levels {
        let p = level.projector.matrix();
        out = &out + &p.matmul(a.matrix()).matmul(p);
    }
    HermitianOperator::symmetrized(&out)
}

/// Gibbs state and `ln Z`, shifting by the ground energy before exponentiating.
fn gibbs(s: &Spectrum, beta: f64) -> (DensityMatrix, f64) {
    let e0 = s.min();
    let weights: Vec<f64> = s
        .eigenvalues()
        .iter()
        .map(|&e| libm::exp(-beta * (e - e0)))
        .collect();
    let sum: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    let tau = HermitianOperator::symmetrized(&s.reconstruct_with(&probs));
    (
        DensityMatrix::from_operator_unchecked(tau),
        -beta * e0 + libm::log(sum),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_entropy, Complex64};
    use crate::random::random_process;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(d)
    }

    fn trivial(h: &[f64], hp: &[f64]) -> Process {
        Process::new(diag(h), diag(hp), UnitaryOperator::identity(h.len()), 1.0).unwrap()
    }

    #[test]
    fn omega_vanishes_for_trivial_process() {
        let p = trivial(&[0.0, 1.0, 3.0], &[0.0, 1.0, 3.0]);
        assert!(p.how_operator().matrix().is_exactly_zero());
    }

    #[test]
    fn trace_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3, 4] {
            let p = random_process(&mut rng, d, 0.7);
            let tr = p.h_prime().trace() - p.h().trace();
            assert!((p.how_operator().trace() - tr).abs() < 1e-10);
            assert!((p.dephased_how().trace() - tr).abs() < 1e-10);
        }
    }

    #[test]
    fn pinching_commutes_with_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_process(&mut rng, 3, 1.0);
        let od = p.dephased_how();
        let comm = od.matrix().commutator(p.h().matrix());
        assert!(schatten_inf_norm(&comm) <= 1e-10 * p.how_operator().norm());
    }

    #[test]
    fn pinching_of_commuting_omega_is_identity_map() {
        let p = trivial(&[0.0, 1.0, 1.0], &[2.0, -1.0, 0.5]);
        assert_eq!(p.dephased_how(), p.how_operator().clone());
        // degenerate level is kept as one block
        assert_eq!(p.levels().len(), 2);
    }

    #[test]
    fn thermal_quantities_scalar_cases() {
        let p = trivial(&[0.0, 0.0], &[0.0, 0.0]);
        let t = p.thermal_quantities();
        assert!((t.free_energy + libm::log(2.0)).abs() < 1e-15);
        assert!((t.tau.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert_eq!(t.delta_f, 0.0);

        let q = Process::new(
            diag(&[0.0, 2.0]),
            diag(&[0.0, 3.0]),
            UnitaryOperator::identity(2),
            0.2,
        )
        .unwrap();
        let t = q.thermal_quantities();
        assert!((t.z() - (1.0 + libm::exp(-0.4))).abs() < 1e-15);
    }

    #[test]
    fn thermal_quantities_do_not_overflow() {
        let p = Process::new(
            diag(&[-1e4, 0.0]),
            diag(&[0.0, 1.0]),
            UnitaryOperator::identity(2),
            10.0,
        )
        .unwrap();
        let t = p.thermal_quantities();
        assert!((t.ln_z - 1e5).abs() < 1e-9);
        assert!((t.free_energy + 1e4).abs() < 1e-9);
    }

    #[test]
    fn energy_scale() {
        let sz = [1.0, -1.0];
        assert_eq!(trivial(&sz, &sz).char_energy_scale().unwrap(), 2.0);
        assert_eq!(
            trivial(&[0.0, 0.0], &[0.0, 0.0]).char_energy_scale(),
            Err(Error::DegenerateProcess)
        );
        let q = trivial(&[0.0, 2.0], &[0.0, 3.0]);
        assert!((q.char_energy_scale().unwrap() - libm::sqrt(13.0)).abs() < 1e-15);
        let q = q.with_energy_scale(7.0).unwrap();
        assert_eq!(q.char_energy_scale().unwrap(), 7.0);
    }

    #[test]
    fn perturbation_norm_identity() {
        let p = trivial(&[0.0, 2.0], &[0.0, 3.0]);
        let sx = HermitianOperator::new(
            ComplexMatrix::new(
                2,
                alloc::vec![
                    Complex64::new(0.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 0.0)
                ],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(&p.perturb_how(0.0, &sx).unwrap(), p.how_operator());
        let pert = p.perturb_how(1e-3, &sx).unwrap();
        assert!(((&pert - p.how_operator()).norm() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn average_second_law_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in [2, 3, 5] {
            let p = random_process(&mut rng, d, 0.9);
            let t = p.thermal_quantities();
            let mean_w = t.tau.expectation(p.how_operator());
            let evolved = t.tau.evolve(p.u());
            let tau_prime = gibbs(p.h_prime_spectrum(), p.beta()).0;
            let s = relative_entropy(&evolved, &tau_prime).unwrap();
            assert!((mean_w - t.delta_f - s / p.beta()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = diag(&[0.0, 1.0]);
        assert!(Process::new(
            h.clone(),
            diag(&[0.0, 1.0, 2.0]),
            UnitaryOperator::identity(2),
            1.0
        )
        .is_err());
        assert!(Process::new(h.clone(), h.clone(), UnitaryOperator::identity(2), 0.0).is_err());
        assert!(Process::new(h.clone(), h, UnitaryOperator::identity(2), f64::NAN).is_err());
    }
}
