use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use num_complex::Complex64;

use super::eigen::{eig_hermitian, Spectrum};
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Relative Hermiticity tolerance for validated construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// `|U'U - 1|` tolerance for unitaries.
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalue and trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-12;
/// Absolute floor applied to every relative tolerance.
pub const ABS_FLOOR: f64 = 1e-14;

/// Largest singular value of a square matrix.
pub fn schatten_inf_norm(a: &ComplexMatrix) -> f64 {
    if a.is_exactly_zero() {
        return 0.0;
    }
    let gram = a.adjoint().matmul(a);
    match eig_hermitian(&gram) {
        Ok(s) => libm::sqrt(s.max().max(0.0)),
        // Frobenius norm is an upper bound; only reached if Jacobi stalls.
        Err(_) => a.frobenius_norm(),
    }
}

/// Operator norm of a matrix known to be Hermitian up to rounding.
fn hermitian_norm(a: &ComplexMatrix) -> f64 {
    eig_hermitian(a)
        .map(|s| s.spectral_radius())
        .unwrap_or_else(|_| a.frobenius_norm())
}

/// Checks `|A - A^dagger|_inf <= tol * |A|_inf` (absolute floor applied).
/// Returns the skew norm on failure.
fn check_hermitian(a: &ComplexMatrix, tol: f64) -> core::result::Result<(), f64> {
    let skew = a.skew_part();
    let skew_fro = skew.frobenius_norm();
    if skew_fro == 0.0 {
        return Ok(());
    }
    let d = a.dim() as f64;
    // |skew|_inf <= |skew|_F and |A|_F / sqrt(d) <= |A|_inf
    if skew_fro <= (tol * a.frobenius_norm() / libm::sqrt(d)).max(ABS_FLOOR) {
        return Ok(());
    }
    let skew_norm = hermitian_norm(&skew.scale_complex(Complex64::new(0.0, 1.0)));
    let limit = (tol * schatten_inf_norm(a)).max(ABS_FLOOR);
    // |A - A^dagger| = 2 |skew|
    if 2.0 * skew_norm <= limit {
        Ok(())
    } else {
        Err(2.0 * skew_norm)
    }
}

/// Hermitian operator; the stored matrix is exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity to [`HERMITIAN_TOL`] and symmetrizes.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_hermitian(&matrix, HERMITIAN_TOL).map_err(Error::NotHermitian)?;
        Ok(Self::symmetrized(&matrix))
    }

    /// Takes the Hermitian part `(A + A^dagger)/2` without validation.
    pub fn symmetrized(matrix: &ComplexMatrix) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self {
            matrix: ComplexMatrix::from_real_diagonal(diag),
        }
    }

    /// Rank-one projector onto the (assumed normalized) vector `v`.
    pub fn projector(v: &[Complex64]) -> Self {
        Self::symmetrized(&ComplexMatrix::outer(v))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eig(&self) -> Result<Spectrum> {
        eig_hermitian(&self.matrix)
    }

    /// Operator norm (largest eigenvalue modulus).
    pub fn norm(&self) -> f64 {
        hermitian_norm(&self.matrix)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `tr(self * other)`, real for Hermitian factors.
    pub fn trace_product(&self, other: &Self) -> f64 {
        self.matrix.trace_product(&other.matrix).re
    }

    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        self.matrix.expectation(v).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
        }
    }

    /// `self + s * 1`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.dim() {
            m[(i, i)] += s;
        }
        Self { matrix: m }
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        self.matrix.add_scaled(&other.matrix, s);
    }

    /// `X^dagger self X`.
    pub fn conjugate_by(&self, x: &ComplexMatrix) -> Self {
        Self::symmetrized(&x.adjoint().matmul(&self.matrix).matmul(x))
    }

    /// Applies `f` to the spectrum: `V f(Lambda) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        func_hermitian(self, f)
    }

    pub fn exp(&self) -> Result<Self> {
        func_hermitian(self, libm::exp)
    }

    /// Matrix logarithm; requires a positive-definite operator.
    pub fn ln(&self) -> Result<Self> {
        let s = self.eig()?;
        if s.min() <= 0.0 {
            return Err(Error::Domain(format!(
                "logarithm needs a positive-definite operator, smallest eigenvalue is {:e}",
                s.min()
            )));
        }
        let values: Vec<f64> = s.eigenvalues().iter().map(|&x| libm::log(x)).collect();
        Ok(Self::symmetrized(&s.reconstruct_with(&values)))
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        let s = self.eig()?;
        Ok((s.min(), s.max()))
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;

    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;

    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// `V f(Lambda) V^dagger` for a Hermitian `a`. Fails with a domain error if
/// `f` yields a non-finite value on any eigenvalue.
pub fn func_hermitian(a: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    let s = a.eig()?;
    let mut values = Vec::with_capacity(s.dim());
    for &lam in s.eigenvalues() {
        let y = f(lam);
        if !y.is_finite() {
            return Err(Error::Domain(format!("f({lam:e}) = {y}")));
        }
        values.push(y);
    }
    Ok(HermitianOperator::symmetrized(&s.reconstruct_with(&values)))
}

/// Unitary operator validated to `|U'U - 1|_inf <= 1e-10`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.dim();
        let defect = &matrix.adjoint().matmul(&matrix) - &ComplexMatrix::identity(n);
        let err = if defect.frobenius_norm() <= UNITARY_TOL {
            defect.frobenius_norm()
        } else {
            schatten_inf_norm(&defect)
        };
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }
}

/// Quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let op = HermitianOperator::new(matrix).map_err(|e| Error::NotDensity(format!("{e}")))?;
        let tr = op.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensity(format!("trace is {tr}")));
        }
        let s = op.eig()?;
        if s.min() < -DENSITY_TOL {
            return Err(Error::NotDensity(format!(
                "negative eigenvalue {:e}",
                s.min()
            )));
        }
        Ok(Self { op })
    }

    /// Maximally mixed state `1/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Pure state from an (unnormalized) vector.
    pub fn pure(v: &[Complex64]) -> Result<Self> {
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotDensity("zero or non-finite state vector".into()));
        }
        let u: Vec<Complex64> = v.iter().map(|z| z / norm).collect();
        Ok(Self {
            op: HermitianOperator::projector(&u),
        })
    }

    pub(crate) fn from_operator_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, u: &UnitaryOperator) -> Self {
        Self {
            op: self.op.conjugate_by(&u.matrix().adjoint()),
        }
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, a: &HermitianOperator) -> f64 {
        self.op.trace_product(a)
    }
}

/// Quantum relative entropy `S(rho || sigma) = tr rho ln rho - tr rho ln sigma`.
///
/// The support of `rho` must lie within that of `sigma`: eigen-directions of
/// `sigma` with eigenvalue at most `1e-12` must carry at most `1e-12` weight in
/// `rho`, otherwise the divergence is infinite and an error is returned.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let rs = rho.operator().eig()?;
    let ss = sigma.operator().eig()?;
    let entropy_term: f64 = rs
        .eigenvalues()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum();
    let mut cross = 0.0;
    for k in 0..ss.dim() {
        let s = ss.eigenvalues()[k];
        let weight = rho.operator().expectation(&ss.vector(k));
        if s <= DENSITY_TOL {
            if weight > DENSITY_TOL {
                return Err(Error::SupportViolation);
            }
            continue;
        }
        cross += weight * libm::log(s);
    }
    Ok(entropy_term - cross)
}
