//! Dissipated-work distributions in the dimensionless variable `x = beta
//! w_d`: a pair obeying the classical and the quantum-corrected Jarzynski
//! relation with identical negative tails, and checks on second-law CDF
//! bounds and CDF crossings.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line};
pub use crate::special::{erfc, erfcx};

/// Absolute tolerance of the quadratures behind `xi_of_a`.
pub const QUAD_TOL: f64 = 1e-12;
/// Bracket searched by [`maximize_xi`].
pub const XI_BRACKET: (f64, f64) = (0.05, 3.0);

/// Alias kept for the name used in reports and docs.
pub fn erfc_accurate(x: f64) -> f64 {
    erfc(x)
}

/// A dissipated-work law in `x = beta w_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkLaw {
    /// Half-Gaussians of widths set by `a` (for `x >= 0`) and `b` (`x < 0`).
    Classical {
        a: f64,
        b: f64,
    },
    /// Squared-Lorentzian for `x >= 0`, the classical half-Gaussian for `x < 0`.
    Quantum {
        a: f64,
        b: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    PointMass {
        at: f64,
    },
}

fn half_gauss_pdf(x: f64, width: f64) -> f64 {
    libm::exp(-x * x / (4.0 * PI * width * width)) / (2.0 * PI * width)
}

fn lorentz2_pdf(x: f64, a: f64) -> f64 {
    let u = x / (PI * a);
    let s = 1.0 + u * u;
    2.0 / (PI * PI * a * s * s)
}

impl WorkLaw {
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            WorkLaw::Classical { a, b } => {
                if x >= 0.0 {
                    half_gauss_pdf(x, a)
                } else {
                    half_gauss_pdf(x, b)
                }
            }
            WorkLaw::Quantum { a, b } => {
                if x >= 0.0 {
                    lorentz2_pdf(x, a)
                } else {
                    half_gauss_pdf(x, b)
                }
            }
            WorkLaw::Gaussian { mean, var } => {
                libm::exp(-(x - mean) * (x - mean) / (2.0 * var)) / libm::sqrt(2.0 * PI * var)
            }
            WorkLaw::PointMass { .. } => 0.0,
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            WorkLaw::Classical { a, b } => {
                if x < 0.0 {
                    0.5 * erfc(-x / (2.0 * libm::sqrt(PI) * b))
                } else {
                    1.0 - 0.5 * erfc(x / (2.0 * libm::sqrt(PI) * a))
                }
            }
            WorkLaw::Quantum { a, b } => {
                if x < 0.0 {
                    0.5 * erfc(-x / (2.0 * libm::sqrt(PI) * b))
                } else {
                    let u = x / (PI * a);
                    0.5 + (u / (1.0 + u * u) + libm::atan(u)) / PI
                }
            }
            WorkLaw::Gaussian { mean, var } => 0.5 * erfc(-(x - mean) / libm::sqrt(2.0 * var)),
            WorkLaw::PointMass { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the law is discontinuous or concentrated; quadratures
    /// split there.
    fn breakpoint(&self) -> f64 {
        match *self {
            WorkLaw::Gaussian { mean, .. } => mean,
            WorkLaw::PointMass { at } => at,
            _ => 0.0,
        }
    }

    /// `int f(x) p(x) dx` over the real line.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        if let WorkLaw::PointMass { at } = *self {
            return Ok(f(at));
        }
        let c = self.breakpoint();
        let right = integrate_half_line(|y| weighted(self.pdf(c + y), || f(c + y)), QUAD_TOL, 0.0)?;
        // pdf is evaluated strictly left of the split
        let left = integrate_half_line(
            |y| {
                if y > 0.0 {
                    weighted(self.pdf(c - y), || f(c - y))
                } else {
                    0.0
                }
            },
            QUAD_TOL,
            0.0,
        )?;
        Ok(left + right)
    }

    pub fn normalization(&self) -> Result<f64> {
        self.expect(|_| 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        self.expect(|x| x)
    }

    /// `<e^{-x}>`.
    pub fn exp_average(&self) -> Result<f64> {
        match *self {
            WorkLaw::Gaussian { mean, var } => Ok(libm::exp(-mean + 0.5 * var)),
            WorkLaw::PointMass { at } => Ok(libm::exp(-at)),
            _ => self.expect(|x| libm::exp(-x)),
        }
    }
}

/// `p f`, zero where `p` vanishes so that an overflowing `f` in a far
/// tail does not produce `0 * inf`.
fn weighted(p: f64, f: impl FnOnce() -> f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * f()
    }
}

/// Residual of the normalization condition fixing `b`:
/// `erfcx(-b sqrt(pi)) - (2 - erfcx(a sqrt(pi)))`.
fn b_residual(a: f64, b: f64) -> f64 {
    let sp = libm::sqrt(PI);
    erfcx(-b * sp) - (2.0 - erfcx(a * sp))
}

/// The `b` for which the classical law obeys `<e^{-x}> = 1`, i.e. the root
/// of `e^{pi b^2}[1 + erf(b sqrt(pi))] = 2 - e^{pi a^2}[1 - erf(a sqrt(pi))]`.
/// Bisection safeguarded Newton, residual below `1e-12`.
pub fn solve_b(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let sp = libm::sqrt(PI);
    let rhs = 2.0 - erfcx(a * sp);
    if !(rhs > 1.0) {
        return Err(Error::Domain(format!(
            "right-hand side {rhs} is not above 1 for a = {a}"
        )));
    }
    // residual rises from 1 - rhs < 0 at b = 0
    let (mut lo, mut hi) = (0.0, a);
    if b_residual(a, hi) < 0.0 {
        return Err(Error::Numeric(format!("no root in (0, a] for a = {a}")));
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = b_residual(a, b);
        if r.abs() <= 1e-14 {
            break;
        }
        if r < 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        // d/db erfcx(-b sqrt(pi)) = 2 pi b erfcx(-b sqrt(pi)) + 2
        let slope = 2.0 * PI * b * erfcx(-b * sp) + 2.0;
        let newton = b - r / slope;
        b = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 * a {
            break;
        }
    }
    let r = b_residual(a, b);
    if r.abs() > 1e-12 {
        return Err(Error::Numeric(format!("residual {r:e} at b = {b}")));
    }
    Ok(b)
}

/// The classical/quantum pair for a given `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationPair {
    pub a: f64,
    pub b: f64,
    pub xi: f64,
}

impl DissipationPair {
    pub fn new(a: f64) -> Result<Self> {
        let b = solve_b(a)?;
        Ok(Self {
            a,
            b,
            xi: xi_with_b(a, b)?,
        })
    }

    pub fn classical(&self) -> WorkLaw {
        WorkLaw::Classical {
            a: self.a,
            b: self.b,
        }
    }

    pub fn quantum(&self) -> WorkLaw {
        WorkLaw::Quantum {
            a: self.a,
            b: self.b,
        }
    }
}

fn xi_with_b(a: f64, b: f64) -> Result<f64> {
    let negative = 0.5 * erfcx(-b * libm::sqrt(PI));
    let positive = integrate_half_line(|x| lorentz2_pdf(x, a) * libm::exp(-x), QUAD_TOL, 0.0)?;
    Ok(libm::log(negative + positive))
}

/// `Xi(a) = ln int p_q(x) e^{-x} dx`: the negative half in closed form
/// through `erfcx`, the positive half by quadrature.
pub fn xi_of_a(a: f64) -> Result<f64> {
    let b = solve_b(a)?;
    xi_with_b(a, b)
}

/// Golden-section maximization of `xi_of_a` over [`XI_BRACKET`].
/// Returns `(a_m, b_m, xi_max)`.
pub fn maximize_xi() -> Result<(f64, f64, f64)> {
    let (mut lo, mut hi) = XI_BRACKET;
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = xi_of_a(x1)?;
    let mut f2 = xi_of_a(x2)?;
    while hi - lo > 1e-9 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = xi_of_a(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = xi_of_a(x1)?;
        }
    }
    let a = 0.5 * (lo + hi);
    let pair = DissipationPair::new(a)?;
    Ok((a, pair.b, pair.xi))
}

/// `(a, b(a), Xi(a))` on a grid of `a` values.
pub fn xi_curve(grid: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    grid.iter()
        .map(|&a| DissipationPair::new(a).map(|p| (p.a, p.b, p.xi)))
        .collect()
}

/// `(x, p_c(x), p_q(x))` rows for plotting the pair.
pub fn pdf_table(pair: &DissipationPair, xs: &[f64]) -> Vec<(f64, f64, f64)> {
    xs.iter()
        .map(|&x| (x, pair.classical().pdf(x), pair.quantum().pdf(x)))
        .collect()
}

/// Default grid for crossing searches, in `x = beta zeta`.
pub fn default_crossing_grid() -> Vec<f64> {
    let n = 4000;
    (0..n).map(|k| -40.0 + 40.0 * k as f64 / n as f64).collect()
}

/// Most negative `zeta_0 < 0` on `grid` (given in `x = beta zeta`) with
/// `Phi_q(zeta_0) > Phi_c(zeta_0) + 1e-10`, returned in energy units.
pub fn cdf_crossing(
    quantum: &WorkLaw,
    classical: &WorkLaw,
    beta: f64,
    grid: &[f64],
) -> Option<f64> {
    grid.iter()
        .copied()
        .filter(|&x| x < 0.0)
        .find(|&x| quantum.cdf(x) > classical.cdf(x) + 1e-10)
        .map(|x| x / beta)
}

/// Largest `Phi(x) - e^{x + xi}` over `grid`; nonpositive when the
/// second-law CDF bound holds there.
pub fn cdf_bound_excess(law: &WorkLaw, xi: f64, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| law.cdf(x) - libm::exp(x + xi))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpReport {
    /// `int Phi(x) e^{-x} dx` over the real line.
    pub total: f64,
    /// The same integral over `x < 0`.
    pub negative_part: f64,
    pub xi_expected: f64,
    /// `|total - e^{xi}| <= 1e-6`.
    pub total_matches: bool,
    /// `negative_part >= e^{xi} - 1`.
    pub quantum_bound_holds: bool,
    /// `negative_part <= 1`.
    pub classical_bound_holds: bool,
}

/// Integration-by-parts identities: `int Phi(x) e^{-x} dx = <e^{-x}> =
/// e^{xi}`, and the bounds on the negative half that follow from it.
pub fn verify_ibp_identities(law: &WorkLaw, xi_expected: f64) -> Result<IbpReport> {
    let c = law.breakpoint().min(0.0);
    let negative = integrate_half_line(
        |y| {
            if y > 0.0 {
                weighted(law.cdf(c - y), || libm::exp(y - c))
            } else {
                0.0
            }
        },
        QUAD_TOL,
        0.0,
    )? + integrate(|x| law.cdf(x) * libm::exp(-x), c, 0.0, QUAD_TOL, 0.0)?;
    let positive = integrate_half_line(|x| weighted(law.cdf(x), || libm::exp(-x)), QUAD_TOL, 0.0)?;
    let total = negative + positive;
    let target = libm::exp(xi_expected);
    Ok(IbpReport {
        total,
        negative_part: negative,
        xi_expected,
        total_matches: (total - target).abs() <= 1e-6,
        quantum_bound_holds: negative >= target - 1.0 - 1e-12,
        classical_bound_holds: negative <= 1.0 + 1e-12,
    })
}

/// Gaussian pair with a common mean `sigma^2 / 2`: the classical law has
/// variance `sigma^2` (so `<e^{-x}> = 1`), the quantum one variance
/// `sigma^2 + 2 xi`, giving `<e^{-x}> = e^{xi}`.
pub fn gaussian_pair(sigma2: f64, xi: f64) -> (WorkLaw, WorkLaw) {
    let mean = 0.5 * sigma2;
    (
        WorkLaw::Gaussian { mean, var: sigma2 },
        WorkLaw::Gaussian {
            mean,
            var: sigma2 + 2.0 * xi,
        },
    )
}
