//! Cyclic complex Jacobi eigensolver for small dense Hermitian matrices.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as the columns of a unitary matrix.
    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigenvectors
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k)
    }

    pub fn projector(&self, k: usize) -> ComplexMatrix {
        ComplexMatrix::outer(&self.vector(k))
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Largest eigenvalue modulus, i.e. the operator norm.
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// Groups eigenvalue indices into clusters whose consecutive gaps are
    /// at most `rel_tol * spectral_radius` (absolute floor `1e-14`).
    pub fn clusters(&self, rel_tol: f64) -> Vec<Vec<usize>> {
        let tol = (rel_tol * self.spectral_radius()).max(1e-14);
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some(group) if lam - self.eigenvalues[*group.last().unwrap()] <= tol => {
                    group.push(k)
                }
                _ => out.push(alloc::vec![k]),
            }
        }
        out
    }

    /// Sum of rank-one projectors over `indices`.
    pub fn group_projector(&self, indices: &[usize]) -> ComplexMatrix {
        let n = self.dim();
        let mut p = ComplexMatrix::zeros(n);
        for &k in indices {
            let v = self.vector(k);
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        p
    }

    /// `V diag(f(lambda)) V^dagger` as a raw matrix.
    pub(crate) fn reconstruct_with(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        ComplexMatrix::from_fn(n, |r, c| {
            let mut acc = ZERO;
            for k in 0..n {
                if values[k] != 0.0 {
                    acc += v[(r, k)] * v[(c, k)].conj() * values[k];
                }
            }
            acc
        })
    }
}

/// Diagonalizes a Hermitian matrix. Only the Hermitian part of `a` is used.
///
/// Eigenvalues come out ascending. Within clusters of (numerically)
/// degenerate eigenvalues the vectors are re-orthonormalized by Gram-Schmidt
/// in index order, and every vector is rotated so that its first component
/// of modulus above `1e-8` is real and positive.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<Spectrum> {
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let fro = m.frobenius_norm();

    if fro > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&m) <= 1e-15 * fro {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&m) > 1e-15 * fro {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut columns: Vec<Vec<Complex64>> = order.iter().map(|&i| v.column(i)).collect();

    let radius = eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let gap_tol = (1e-10 * radius).max(1e-14);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] < gap_tol {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut columns[start..end]);
        }
        start = end;
    }
    for col in columns.iter_mut() {
        fix_phase(col);
    }

    let eigenvectors = ComplexMatrix::from_fn(n, |r, c| columns[c][r]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += m[(r, c)].norm_sqr();
            }
        }
    }
    libm::sqrt(acc)
}

/// One two-sided Jacobi rotation annihilating `m[(p, q)]`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let n = m.dim();
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    // phase e^{-i phi} with apq = g e^{i phi}
    let phase = apq.conj() / g;
    let theta = (aqq - app) / (2.0 * g);
    let t = {
        let r = 1.0 / (theta.abs() + libm::sqrt(1.0 + theta * theta));
        if theta < 0.0 {
            -r
        } else {
            r
        }
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    let s = t * c;

    // A <- A J with J_pp = c, J_pq = s, J_qp = -s e^{-i phi}, J_qq = c e^{-i phi}
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * phase * s;
        m[(k, q)] = akp * s + akq * phase * c;
    }
    // A <- J^dagger A
    let phase_c = phase.conj();
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * phase_c * s;
        m[(q, k)] = apk * s + aqk * phase_c * c;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = Complex64::new(app - t * g, 0.0);
    m[(q, q)] = Complex64::new(aqq + t * g, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * phase * s;
        v[(k, q)] = vkp * s + vkq * phase * c;
    }
}

fn gram_schmidt(cols: &mut [Vec<Complex64>]) {
    for k in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(k);
        let col = &mut rest[0];
        for prev in done.iter() {
            let overlap: Complex64 = prev.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, p) in col.iter_mut().zip(prev) {
                *x -= overlap * p;
            }
        }
        let norm = libm::sqrt(col.iter().map(|z| z.norm_sqr()).sum());
        for x in col.iter_mut() {
            *x /= norm;
        }
    }
}

fn fix_phase(col: &mut [Complex64]) {
    if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8).copied() {
        let rot = lead.conj() / lead.norm();
        for x in col.iter_mut() {
            *x *= rot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_hermitian;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let a = ComplexMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let s = eig_hermitian(&a).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.vector(0), vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(s.vector(2), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn pauli_x() {
        let x = ComplexMatrix::new(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let s = eig_hermitian(&x).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((s.eigenvalues()[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues()[1] - 1.0).abs() < 1e-15);
        // phase convention: leading component real positive
        let v0 = s.vector(0);
        assert!((v0[0] - c(h, 0.0)).norm() < 1e-15 && (v0[1] - c(-h, 0.0)).norm() < 1e-15);
        let v1 = s.vector(1);
        assert!((v1[0] - c(h, 0.0)).norm() < 1e-15 && (v1[1] - c(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &d in &[2usize, 5, 8, 16] {
            let a = random_hermitian(&mut rng, d, 1.0);
            let s = eig_hermitian(&a).unwrap();
            let norm = s.spectral_radius();
            let rebuilt = s.reconstruct_with(s.eigenvalues());
            assert!((&rebuilt - &a).max_abs_entry() <= 1e-10 * norm);
            let v = s.eigenvectors();
            let gram = v.adjoint().matmul(v);
            assert!((&gram - &ComplexMatrix::identity(d)).max_abs_entry() <= 1e-10);
            for k in 0..d {
                let av = a.apply(&s.vector(k));
                let resid: f64 = av
                    .iter()
                    .zip(s.vector(k))
                    .map(|(x, y)| (x - y * s.eigenvalues()[k]).norm_sqr())
                    .sum();
                assert!(libm::sqrt(resid) <= 1e-10 * norm);
            }
            assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_cluster_is_orthonormal() {
        // 1 (+) 1 (+) 2 rotated by a fixed unitary
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = crate::random::haar_unitary(&mut rng, 3);
        let d = ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 2.0]);
        let a = u.matmul(&d).matmul(&u.adjoint());
        let s = eig_hermitian(&a).unwrap();
        assert_eq!(s.clusters(1e-10).len(), 2);
        let v = s.eigenvectors();
        let gram = v.adjoint().matmul(v);
        assert!((&gram - &ComplexMatrix::identity(3)).max_abs_entry() < 1e-12);
        let p = s.group_projector(&[0, 1]);
        let expected = u
            .matmul(&ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 0.0]))
            .matmul(&u.adjoint());
        assert!((&p - &expected).max_abs_entry() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let s = eig_hermitian(&ComplexMatrix::zeros(3)).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.eigenvectors(), &ComplexMatrix::identity(3));
    }
}
