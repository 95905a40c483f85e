//! Dense complex matrix algebra for small systems: Hermitian
//! eigendecomposition, spectral operator functions, norms and entropies.

mod eigen;
mod matrix;
mod operators;

pub use eigen::{eig_hermitian, Spectrum};
pub use matrix::ComplexMatrix;
pub use operators::{
    func_hermitian, relative_entropy, schatten_inf_norm, DensityMatrix, HermitianOperator,
    UnitaryOperator, ABS_FLOOR, DENSITY_TOL, HERMITIAN_TOL, UNITARY_TOL,
};

pub use num_complex::Complex64;
