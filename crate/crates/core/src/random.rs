//! Random ensembles of operators and processes used by tests, sweeps and
//! the optimizer's restarts.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{ComplexMatrix, DensityMatrix, HermitianOperator, UnitaryOperator};
use crate::process::Process;

/// Standard normal deviate (Box-Muller).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(standard_normal(rng), standard_normal(rng))
}

/// GUE-like Hermitian matrix `scale * (G + G^dagger) / 2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| complex_normal(rng));
    (&g + &g.adjoint()).scale(0.5 * scale)
}

/// Haar-distributed unitary via Gram-Schmidt on a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| (0..dim).map(|_| complex_normal(rng)).collect())
        .collect();
    for k in 0..dim {
        for j in 0..k {
            let overlap: Complex64 = cols[j]
                .iter()
                .zip(&cols[k])
                .map(|(a, b)| a.conj() * b)
                .sum();
            let prev = cols[j].clone();
            for (x, p) in cols[k].iter_mut().zip(&prev) {
                *x -= overlap * p;
            }
        }
        let norm = libm::sqrt(cols[k].iter().map(|z| z.norm_sqr()).sum());
        for x in cols[k].iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(dim, |r, c| cols[c][r])
}

/// Random mixed state: normalized Wishart matrix `G G^dagger / tr`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| complex_normal(rng));
    let w = g.matmul(&g.adjoint());
    let tr = w.trace().re;
    DensityMatrix::new(w.scale(1.0 / tr)).expect("Wishart matrix is a valid state")
}

/// Random pure state `|psi><psi|`.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let mut v: Vec<Complex64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
    for x in v.iter_mut() {
        *x /= norm;
    }
    DensityMatrix::new(ComplexMatrix::outer(&v)).expect("pure state is valid")
}

/// Random driven process: GUE spectra for `H` and `H'`, a GUE eigenbasis
/// for `H'` and a Haar unitary. `H` is returned in its own eigenbasis; the
/// choice of basis is free, and this one lets thermal weights and TPM
/// elements be read off without rounding, which matters when `e^{-beta W}`
/// spans many orders of magnitude.
pub fn random_process<R: Rng + ?Sized>(rng: &mut R, dim: usize, beta: f64) -> Process {
    let gue = random_hermitian(rng, dim, 1.0);
    let energies = crate::linalg::eig_hermitian(&gue)
        .expect("eigensolver")
        .eigenvalues()
        .to_vec();
    let h = HermitianOperator::from_real_diagonal(&energies);
    let hp = HermitianOperator::new(random_hermitian(rng, dim, 1.0)).expect("hermitian");
    let u = UnitaryOperator::new(haar_unitary(rng, dim)).expect("unitary");
    Process::new(h, hp, u, beta).expect("random process is valid")
}

/// Random POVM with `outcomes` elements: Wishart blocks `G_k` normalized as
/// `S^{-1/2} G_k S^{-1/2}` with `S = sum_k G_k`.
pub fn random_povm<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    outcomes: usize,
) -> Vec<HermitianOperator> {
    let blocks: Vec<HermitianOperator> = (0..outcomes)
        .map(|_| {
            let g = ComplexMatrix::from_fn(dim, |_, _| complex_normal(rng));
            HermitianOperator::symmetrized(&g.matmul(&g.adjoint()))
        })
        .collect();
    let mut sum = HermitianOperator::zeros(dim);
    for b in &blocks {
        sum.add_scaled(b, 1.0);
    }
    let inv_sqrt = sum
        .map_spectrum(|x| 1.0 / libm::sqrt(x))
        .expect("Wishart sum is positive definite");
    blocks
        .iter()
        .map(|b| b.conjugate_by(inv_sqrt.matrix()))
        .collect()
}
