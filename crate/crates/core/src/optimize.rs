//! Search for condition-(i) schemes with a smaller quantum correction than
//! the projective measurement of `Omega`.
//!
//! The feasible set `{M_a >= 0, sum M_a = 1, sum W_a M_a = Omega}` is convex
//! for fixed works, so the elements are moved by projected gradient steps
//! with a Dykstra projection, and the works by gradient steps that are kept
//! only when the re-projected point lowers the objective. Nothing here
//! certifies a global minimum.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Complex64, HermitianOperator};
use crate::process::Process;
use crate::random::random_povm;
use crate::scheme::{how_scheme, xi_how_bound, MeasurementScheme, Outcome};
use crate::stats::log_sum_exp_weighted;

/// Residual target for a feasible scheme.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Gains over `Xi_HOW` smaller than this (relative to `1 + Xi_HOW`) are
/// within what the feasibility tolerance alone can produce, and the exact
/// HOW scheme is returned instead.
pub const RESOLUTION: f64 = 1e-8;
/// Works are confined to `|W| <= WORK_BOUND_FACTOR * w`.
pub const WORK_BOUND_FACTOR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Number of outcomes; `None` means `2 d`.
    pub k: Option<usize>,
    pub iters: usize,
    /// Stop once the objective improves by less than this over a window.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Cycle cap of each projection.
    pub max_cycles: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            k: None,
            iters: 300,
            tol: 1e-8,
            restarts: 6,
            seed: 42,
            max_cycles: 2000,
        }
    }
}

/// Residuals of a candidate scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeasibilityReport {
    /// `|sum M_a - 1|_F`.
    pub completeness: f64,
    /// `|sum W_a M_a - Omega|_F`.
    pub condition_i: f64,
    /// Largest negative eigenvalue magnitude over the elements.
    pub positivity: f64,
    pub cycles: usize,
    pub converged: bool,
}

impl FeasibilityReport {
    pub fn max_residual(&self) -> f64 {
        self.completeness.max(self.condition_i).max(self.positivity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport {
    pub xi: f64,
    pub xi_how: f64,
    pub residuals: FeasibilityReport,
    /// Accepted steps of the winning restart.
    pub iters: usize,
    pub seed: u64,
    pub k: usize,
    /// Index of the winning restart; `None` when the HOW scheme was returned.
    pub restart: Option<usize>,
}

/// The constraint data shared by every projection.
struct Affine<'a> {
    works: &'a [f64],
    omega: &'a HermitianOperator,
    /// `(A A^T)^{-1}` for `A = [1 ... 1; W_1 ... W_K]`, or `None` when all
    /// works coincide and only completeness can be imposed independently.
    gram_inv: Option<[[f64; 2]; 2]>,
}

impl<'a> Affine<'a> {
    fn new(works: &'a [f64], omega: &'a HermitianOperator) -> Self {
        let k = works.len() as f64;
        let s1: f64 = works.iter().sum();
        let s2: f64 = works.iter().map(|w| w * w).sum();
        let det = k * s2 - s1 * s1;
        let gram_inv = if det > 1e-12 * (k * s2).max(1.0) {
            Some([[s2 / det, -s1 / det], [-s1 / det, k / det]])
        } else {
            None
        };
        Self {
            works,
            omega,
            gram_inv,
        }
    }

    fn residuals(&self, m: &[HermitianOperator]) -> (HermitianOperator, HermitianOperator) {
        let d = self.omega.dim();
        let mut r1 = HermitianOperator::identity(d).scale(-1.0);
        let mut r2 = self.omega.scale(-1.0);
        for (x, &w) in m.iter().zip(self.works) {
            r1.add_scaled(x, 1.0);
            r2.add_scaled(x, w);
        }
        (r1, r2)
    }

    /// Entrywise least-norm correction onto the affine constraints.
    fn project(&self, m: &mut [HermitianOperator]) {
        let (r1, r2) = self.residuals(m);
        match self.gram_inv {
            Some(g) => {
                let mut l1 = r1.scale(g[0][0]);
                l1.add_scaled(&r2, g[0][1]);
                let mut l2 = r1.scale(g[1][0]);
                l2.add_scaled(&r2, g[1][1]);
                for (x, &w) in m.iter_mut().zip(self.works) {
                    x.add_scaled(&l1, -1.0);
                    x.add_scaled(&l2, -w);
                }
            }
            None => {
                let k = m.len() as f64;
                for x in m.iter_mut() {
                    x.add_scaled(&r1, -1.0 / k);
                }
            }
        }
    }

    /// Removes from a direction the part that would change `sum D_a` or
    /// `sum W_a D_a`.
    fn project_direction(&self, dir: &mut [HermitianOperator]) {
        let d = self.omega.dim();
        let zero = HermitianOperator::zeros(d);
        let shifted = Affine {
            works: self.works,
            omega: &zero,
            gram_inv: self.gram_inv,
        };
        // the null space of the constraints is the affine set with zero
        // right-hand sides; completeness there reads sum D_a = 0
        let (mut r1, r2) = shifted.residuals(dir);
        r1.add_scaled(&HermitianOperator::identity(d), 1.0);
        match self.gram_inv {
            Some(g) => {
                let mut l1 = r1.scale(g[0][0]);
                l1.add_scaled(&r2, g[0][1]);
                let mut l2 = r1.scale(g[1][0]);
                l2.add_scaled(&r2, g[1][1]);
                for (x, &w) in dir.iter_mut().zip(self.works) {
                    x.add_scaled(&l1, -1.0);
                    x.add_scaled(&l2, -w);
                }
            }
            None => {
                let k = dir.len() as f64;
                for x in dir.iter_mut() {
                    x.add_scaled(&r1, -1.0 / k);
                }
            }
        }
    }

    fn report(&self, m: &[HermitianOperator]) -> Result<FeasibilityReport> {
        let (r1, r2) = self.residuals(m);
        let mut positivity: f64 = 0.0;
        for x in m {
            if !x.matrix().is_exactly_zero() {
                positivity = positivity.max(-x.eig()?.min());
            }
        }
        Ok(FeasibilityReport {
            completeness: r1.matrix().frobenius_norm(),
            condition_i: r2.matrix().frobenius_norm(),
            positivity,
            cycles: 0,
            converged: false,
        })
    }
}

fn psd_part(x: &HermitianOperator) -> Result<HermitianOperator> {
    if x.matrix().is_exactly_zero() {
        return Ok(x.clone());
    }
    x.map_spectrum(|v| v.max(0.0))
}

#[cfg(test)]
fn diff_norm(a: &[HermitianOperator], b: &[HermitianOperator]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).matrix().frobenius_norm())
        .fold(0.0, f64::max)
}

fn project_with(
    elements: &[HermitianOperator],
    affine: &Affine<'_>,
    max_cycles: usize,
    tol: f64,
) -> Result<(Vec<HermitianOperator>, FeasibilityReport)> {
    let k = elements.len();
    let d = affine.omega.dim();
    // Dykstra: the affine set needs no correction term, the cone does.
    let mut x: Vec<HermitianOperator> = elements.to_vec();
    let mut q = vec![HermitianOperator::zeros(d); k];
    let mut cycles = 0;
    let mut y = x.clone();
    while cycles < max_cycles {
        cycles += 1;
        y.clone_from(&x);
        affine.project(&mut y);
        let mut next = Vec::with_capacity(k);
        for (ya, qa) in y.iter().zip(&q) {
            next.push(psd_part(&(ya + qa))?);
        }
        for a in 0..k {
            q[a] = &(&y[a] + &q[a]) - &next[a];
        }
        x = next;
        // x is in the cone; once it nearly satisfies the equalities the
        // closing affine step moves it by at most that much
        let (r1, r2) = affine.residuals(&x);
        if r1
            .matrix()
            .frobenius_norm()
            .max(r2.matrix().frobenius_norm())
            <= 0.5 * tol
        {
            break;
        }
    }
    // end on the affine step so the equality constraints hold to rounding
    affine.project(&mut x);
    let mut report = affine.report(&x)?;
    report.cycles = cycles;
    report.converged = report.max_residual() <= tol;
    Ok((x, report))
}

/// Real coordinates of a Hermitian matrix, isometric for `tr(A B)`.
fn herm_to_vec(a: &HermitianOperator, out: &mut Vec<f64>) {
    let m = a.matrix();
    let d = m.dim();
    for r in 0..d {
        out.push(m[(r, r)].re);
        for c in r + 1..d {
            out.push(core::f64::consts::SQRT_2 * m[(r, c)].re);
            out.push(core::f64::consts::SQRT_2 * m[(r, c)].im);
        }
    }
}

fn vec_to_herm(v: &[f64], d: usize) -> HermitianOperator {
    let mut m = crate::linalg::ComplexMatrix::zeros(d);
    let mut i = 0;
    for r in 0..d {
        m[(r, r)] = Complex64::new(v[i], 0.0);
        i += 1;
        for c in r + 1..d {
            let z = Complex64::new(v[i], v[i + 1]) * core::f64::consts::FRAC_1_SQRT_2;
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
            i += 2;
        }
    }
    HermitianOperator::symmetrized(&m)
}

/// Dual of the projection: `g(Y1, Y2) = 1/2 sum_a |(Z_a + Y1 + W_a Y2)_+|^2
/// - tr Y1 - tr(Y2 Omega)`, whose gradient is the pair of affine residuals
/// at `X_a = (Z_a + Y1 + W_a Y2)_+`.
struct Dual<'a, 'b> {
    z: &'a [HermitianOperator],
    affine: &'a Affine<'b>,
    d: usize,
}

impl Dual<'_, '_> {
    fn primal(&self, y: &[f64]) -> Result<Vec<HermitianOperator>> {
        let n = self.d * self.d;
        let y1 = vec_to_herm(&y[..n], self.d);
        let y2 = vec_to_herm(&y[n..], self.d);
        self.z
            .iter()
            .zip(self.affine.works)
            .map(|(za, &w)| {
                let mut t = za + &y1;
                t.add_scaled(&y2, w);
                psd_part(&t)
            })
            .collect()
    }

    fn eval(&self, y: &[f64]) -> Result<(f64, Vec<f64>, Vec<HermitianOperator>)> {
        let n = self.d * self.d;
        let x = self.primal(y)?;
        let y1 = vec_to_herm(&y[..n], self.d);
        let y2 = vec_to_herm(&y[n..], self.d);
        let value = 0.5 * x.iter().map(|a| a.trace_product(a)).sum::<f64>()
            - y1.trace()
            - y2.trace_product(self.affine.omega);
        let (r1, r2) = self.affine.residuals(&x);
        let mut grad = Vec::with_capacity(2 * n);
        herm_to_vec(&r1, &mut grad);
        herm_to_vec(&r2, &mut grad);
        Ok((value, grad, x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection by BFGS on the dual; far fewer sweeps than Dykstra near the
/// boundary of the cone. Returns `None` if it stalls.
fn project_dual(
    elements: &[HermitianOperator],
    affine: &Affine<'_>,
    max_iter: usize,
    tol: f64,
) -> Result<Option<(Vec<HermitianOperator>, FeasibilityReport)>> {
    let d = affine.omega.dim();
    let n = 2 * d * d;
    let dual = Dual {
        z: elements,
        affine,
        d,
    };
    let mut y = vec![0.0; n];
    let (mut f, mut g, mut x) = dual.eval(&y)?;
    // inverse Hessian estimate, row-major
    let mut hinv = vec![0.0; n * n];
    let k = elements.len() as f64;
    let curv = k + affine.works.iter().map(|w| w * w).sum::<f64>();
    for i in 0..n {
        hinv[i * n + i] = 1.0 / curv;
    }
    let mut iters = 0;
    while iters < max_iter {
        if dot(&g, &g).sqrt() <= 0.5 * tol {
            break;
        }
        iters += 1;
        let p: Vec<f64> = (0..n)
            .map(|i| -dot(&hinv[i * n..(i + 1) * n], &g))
            .collect();
        let slope = dot(&p, &g);
        let p = if slope < 0.0 {
            p
        } else {
            g.iter().map(|v| -v / curv).collect()
        };
        let slope = dot(&p, &g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            let (ft, gt, xt) = dual.eval(&trial)?;
            if ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt, xt));
                break;
            }
            t *= 0.5;
        }
        let Some((yn, fn_, gn, xn)) = accepted else {
            return Ok(None);
        };
        let sv: Vec<f64> = yn.iter().zip(&y).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-16 * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| dot(&hinv[i * n..(i + 1) * n], &yv))
                .collect();
            let yhy = dot(&yv, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -rho * (hy[i] * sv[j] + sv[i] * hy[j])
                        + (rho * rho * yhy + rho) * sv[i] * sv[j];
                }
            }
        }
        y = yn;
        f = fn_;
        g = gn;
        x = xn;
    }
    affine.project(&mut x);
    let mut report = affine.report(&x)?;
    report.cycles = iters;
    report.converged = report.max_residual() <= tol;
    Ok(report.converged.then_some((x, report)))
}

/// Nearest point (Frobenius) to `elements` in `{M_a >= 0, sum M_a = 1,
/// sum W_a M_a = Omega}` for the given works, by Dykstra's alternating
/// projections capped at `max_cycles`. The report flags non-convergence.
pub fn project_feasible(
    elements: &[HermitianOperator],
    works: &[f64],
    omega: &HermitianOperator,
    max_cycles: usize,
) -> Result<(Vec<HermitianOperator>, FeasibilityReport)> {
    if elements.len() != works.len() || elements.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} elements but {} works",
            elements.len(),
            works.len()
        )));
    }
    for e in elements {
        if e.dim() != omega.dim() {
            return Err(Error::DimensionMismatch {
                expected: omega.dim(),
                found: e.dim(),
            });
        }
    }
    let affine = Affine::new(works, omega);
    project_with(elements, &affine, max_cycles, FEASIBILITY_TOL * 1e-2)
}

/// Objective `ln sum_a e^{-beta W_a} tr(tau M_a)` evaluated in the eigenbasis
/// of `H`, plus the pieces needed for its gradient.
struct Objective {
    beta: f64,
    beta_df: f64,
    vecs: Vec<Vec<Complex64>>,
    ln_tau: Vec<f64>,
    tau: HermitianOperator,
}

impl Objective {
    fn new(p: &Process) -> Self {
        let d = p.dim();
        Self {
            beta: p.beta(),
            beta_df: p.beta() * p.thermal_quantities().delta_f,
            vecs: (0..d).map(|k| p.h_spectrum().vector(k)).collect(),
            ln_tau: p.gibbs_log_weights(),
            tau: p.thermal_state().operator().clone(),
        }
    }

    /// `tr(tau M_a)` for each element.
    fn traces(&self, m: &[HermitianOperator]) -> Vec<f64> {
        m.iter()
            .map(|x| {
                self.vecs
                    .iter()
                    .zip(&self.ln_tau)
                    .map(|(v, &l)| x.expectation(v) * libm::exp(l))
                    .sum()
            })
            .collect()
    }

    fn ln_s(&self, m: &[HermitianOperator], w: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(m.len() * self.vecs.len());
        for (x, &wa) in m.iter().zip(w) {
            for (v, &l) in self.vecs.iter().zip(&self.ln_tau) {
                terms.push((x.expectation(v), l - self.beta * wa));
            }
        }
        log_sum_exp_weighted(&terms)
    }

    fn xi(&self, m: &[HermitianOperator], w: &[f64]) -> f64 {
        self.ln_s(m, w) + self.beta_df
    }

    /// `e^{-beta W_a} / S`, capped to stay finite.
    fn weights(&self, w: &[f64], ln_s: f64) -> Vec<f64> {
        w.iter()
            .map(|&wa| libm::exp((-self.beta * wa - ln_s).min(600.0)))
            .collect()
    }
}

struct State {
    m: Vec<HermitianOperator>,
    w: Vec<f64>,
    xi: f64,
    report: FeasibilityReport,
    accepted: usize,
}

struct Search<'a> {
    obj: &'a Objective,
    omega: &'a HermitianOperator,
    work_bound: f64,
    opts: &'a OptimizeOptions,
    proj_tol: f64,
}

impl Search<'_> {
    fn project(
        &self,
        m: &[HermitianOperator],
        w: &[f64],
    ) -> Result<(Vec<HermitianOperator>, FeasibilityReport)> {
        let affine = Affine::new(w, self.omega);
        if let Some(done) = project_dual(m, &affine, 200, self.proj_tol)? {
            return Ok(done);
        }
        project_with(m, &affine, self.opts.max_cycles, self.proj_tol)
    }

    fn candidate(&self, m: &[HermitianOperator], w: Vec<f64>) -> Option<State> {
        let (m, report) = self.project(m, &w).ok()?;
        if !report.converged {
            return None;
        }
        let xi = self.obj.xi(&m, &w);
        xi.is_finite().then_some(State {
            m,
            w,
            xi,
            report,
            accepted: 0,
        })
    }

    fn m_step(&self, s: &State, eta: f64) -> Option<State> {
        let ln_s = s.xi - self.obj.beta_df;
        let g = self.obj.weights(&s.w, ln_s);
        let gmax = g.iter().cloned().fold(0.0, f64::max) * self.obj.tau.norm();
        if !(gmax > 0.0) {
            return None;
        }
        let mut dir: Vec<HermitianOperator> =
            g.iter().map(|&ga| self.obj.tau.scale(-ga / gmax)).collect();
        Affine::new(&s.w, self.omega).project_direction(&mut dir);
        let moved: Vec<HermitianOperator> =
            s.m.iter()
                .zip(&dir)
                .map(|(x, dx)| {
                    let mut y = x.clone();
                    y.add_scaled(dx, eta);
                    y
                })
                .collect();
        self.candidate(&moved, s.w.clone())
    }

    fn w_step(&self, s: &State, eta: f64) -> Option<State> {
        let ln_s = s.xi - self.obj.beta_df;
        let g = self.obj.weights(&s.w, ln_s);
        let t = self.obj.traces(&s.m);
        // d ln S / d W_a = -beta e^{-beta W_a} tr(tau M_a) / S
        let grad: Vec<f64> = g
            .iter()
            .zip(&t)
            .map(|(ga, ta)| -self.obj.beta * ga * ta.max(0.0))
            .collect();
        let gmax = grad.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !(gmax > 0.0) {
            return None;
        }
        let w: Vec<f64> =
            s.w.iter()
                .zip(&grad)
                .map(|(wa, ga)| (wa - eta * ga / gmax).clamp(-self.work_bound, self.work_bound))
                .collect();
        self.candidate(&s.m, w)
    }

    /// Alternating descent from a feasible start; the objective never rises.
    fn run(&self, mut s: State) -> State {
        let w_scale = self.work_bound / WORK_BOUND_FACTOR;
        let mut eta_m = 0.05;
        let mut eta_w = 0.05 * w_scale;
        let mut history = vec![s.xi];
        for _ in 0..self.opts.iters {
            let mut improved = false;
            for _ in 0..6 {
                match self.m_step(&s, eta_m) {
                    Some(n) if n.xi < s.xi => {
                        s = State {
                            accepted: s.accepted + 1,
                            ..n
                        };
                        eta_m = (eta_m * 2.0).min(1.0);
                        improved = true;
                        break;
                    }
                    _ => eta_m *= 0.25,
                }
            }
            for _ in 0..6 {
                match self.w_step(&s, eta_w) {
                    Some(n) if n.xi < s.xi => {
                        s = State {
                            accepted: s.accepted + 1,
                            ..n
                        };
                        eta_w = (eta_w * 2.0).min(10.0 * w_scale);
                        improved = true;
                        break;
                    }
                    _ => eta_w *= 0.25,
                }
            }
            history.push(s.xi);
            let n = history.len();
            let stalled = n > 20 && history[n - 21] - s.xi < self.opts.tol * (1.0 + s.xi.abs());
            if !improved && eta_m < 1e-12 && eta_w < 1e-12 * w_scale || stalled {
                break;
            }
            eta_m = eta_m.max(1e-6);
            eta_w = eta_w.max(1e-6 * w_scale);
        }
        s
    }
}

/// The HOW scheme padded to `k` outcomes with zero elements whose works
/// repeat the HOW values.
fn padded_how(p: &Process, k: usize) -> Result<(Vec<HermitianOperator>, Vec<f64>)> {
    let how = how_scheme(p)?;
    let mut m: Vec<HermitianOperator> = how.outcomes().iter().map(|o| o.element.clone()).collect();
    let mut w = how.works();
    let n = w.len();
    let spread = p.char_energy_scale()?;
    let mut extra = 0;
    while m.len() < k {
        let base = w[extra % n];
        let side = if extra % 2 == 0 { -1.0 } else { 1.0 };
        w.push(base + side * 0.5 * spread * (1 + extra / 2) as f64);
        m.push(HermitianOperator::zeros(p.dim()));
        extra += 1;
    }
    Ok((m, w))
}

fn restart_start(
    p: &Process,
    k: usize,
    seed: u64,
    r: usize,
) -> Result<(Vec<HermitianOperator>, Vec<f64>)> {
    if r == 0 {
        return padded_how(p, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    let (lo, hi) = p.how_operator().eigen_range()?;
    let w = p.char_energy_scale()?;
    let works = (0..k)
        .map(|_| rng.random_range((lo - w)..(hi + w)))
        .collect();
    Ok((random_povm(&mut rng, p.dim(), k), works))
}

fn one_restart(search: &Search<'_>, p: &Process, k: usize, r: usize) -> Option<State> {
    let (m, w) = restart_start(p, k, search.opts.seed, r).ok()?;
    let start = search.candidate(&m, w)?;
    Some(search.run(start))
}

fn to_scheme(p: &Process, s: &State) -> Result<MeasurementScheme> {
    let outcomes =
        s.m.iter()
            .zip(&s.w)
            .enumerate()
            .map(|(a, (x, &wa))| Outcome::new(x.clone(), wa, format!("a{a}")))
            .collect();
    MeasurementScheme::new(p.dim(), outcomes)
}

/// Minimizes `Xi_S` over `k`-outcome schemes obeying condition (i).
///
/// Restart 0 starts from the padded HOW scheme. Unless some restart beats
/// `Xi_HOW` by more than [`RESOLUTION`], the HOW scheme itself is returned.
pub fn minimize_xi(
    p: &Process,
    opts: &OptimizeOptions,
) -> Result<(MeasurementScheme, MinimizeReport)> {
    let d = p.dim();
    let k = opts.k.unwrap_or(2 * d);
    if k < d {
        return Err(Error::Infeasible(format!(
            "{k} outcomes cannot reproduce a work operator of dimension {d}"
        )));
    }
    if opts.restarts == 0 || opts.iters == 0 {
        return Err(Error::InvalidParameter(
            "restarts and iters must be positive".into(),
        ));
    }
    let xi_how = xi_how_bound(p)?;
    let obj = Objective::new(p);
    let w = p.char_energy_scale()?;
    let search = Search {
        obj: &obj,
        omega: p.how_operator(),
        work_bound: WORK_BOUND_FACTOR * w,
        opts,
        proj_tol: 0.5 * FEASIBILITY_TOL,
    };
    let results = run_restarts(&search, p, k);
    let best = results
        .into_iter()
        .enumerate()
        .filter_map(|(r, s)| s.map(|s| (r, s)))
        .filter(|(_, s)| s.report.max_residual() <= FEASIBILITY_TOL)
        .min_by(|a, b| a.1.xi.total_cmp(&b.1.xi));
    match best {
        Some((r, s)) if s.xi < xi_how - RESOLUTION * (1.0 + xi_how.abs()) => {
            let scheme = to_scheme(p, &s)?;
            let report = MinimizeReport {
                xi: scheme.xi(p),
                xi_how,
                residuals: s.report,
                iters: s.accepted,
                seed: opts.seed,
                k,
                restart: Some(r),
            };
            Ok((scheme, report))
        }
        _ => {
            let scheme = how_scheme(p)?;
            let v = scheme.validate(FEASIBILITY_TOL)?;
            let report = MinimizeReport {
                xi: xi_how,
                xi_how,
                residuals: FeasibilityReport {
                    completeness: v.completeness_error,
                    condition_i: scheme.condition_i_residual(p),
                    positivity: v.positivity_violation,
                    cycles: 0,
                    converged: true,
                },
                iters: 0,
                seed: opts.seed,
                k: scheme.len(),
                restart: None,
            };
            Ok((scheme, report))
        }
    }
}

#[cfg(feature = "parallel")]
fn run_restarts(search: &Search<'_>, p: &Process, k: usize) -> Vec<Option<State>> {
    use rayon::prelude::*;
    (0..search.opts.restarts)
        .into_par_iter()
        .map(|r| one_restart(search, p, k, r))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_restarts(search: &Search<'_>, p: &Process, k: usize) -> Vec<Option<State>> {
    (0..search.opts.restarts)
        .map(|r| one_restart(search, p, k, r))
        .collect()
}
