//! JSON file formats. Complex matrices are row-major nested arrays of
//! `[re, im]` pairs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use workfluct_core::modified::EpsVParameters;
use workfluct_core::optimize::{FeasibilityReport, MinimizeReport};
use workfluct_core::scheme::Outcome;
use workfluct_core::{
    ComplexMatrix, DensityMatrix, HermitianOperator, MeasurementScheme, Process, UnitaryOperator,
};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.dim())
        .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson, dim: usize) -> Result<ComplexMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        bail!("expected a {dim}x{dim} matrix");
    }
    let data = rows
        .iter()
        .flatten()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    Ok(ComplexMatrix::new(dim, data)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessFile {
    pub dim: usize,
    pub beta: f64,
    #[serde(rename = "H")]
    pub h: MatrixJson,
    #[serde(rename = "H_prime")]
    pub h_prime: MatrixJson,
    #[serde(rename = "U")]
    pub u: MatrixJson,
    /// Overrides the default energy scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
}

impl ProcessFile {
    pub fn from_process(p: &Process) -> Self {
        Self {
            dim: p.dim(),
            beta: p.beta(),
            h: matrix_to_json(p.h().matrix()),
            h_prime: matrix_to_json(p.h_prime().matrix()),
            u: matrix_to_json(p.u().matrix()),
            w: None,
        }
    }

    pub fn to_process(&self) -> Result<Process> {
        let h = HermitianOperator::new(matrix_from_json(&self.h, self.dim).context("H")?)?;
        let hp =
            HermitianOperator::new(matrix_from_json(&self.h_prime, self.dim).context("H_prime")?)?;
        let u = UnitaryOperator::new(matrix_from_json(&self.u, self.dim).context("U")?)?;
        let p = Process::new(h, hp, u, self.beta)?;
        Ok(match self.w {
            Some(w) => p.with_energy_scale(w)?,
            None => p,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeJson {
    pub label: String,
    pub work: f64,
    pub matrix: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeFile {
    pub dim: usize,
    pub outcomes: Vec<OutcomeJson>,
}

impl SchemeFile {
    pub fn from_scheme(s: &MeasurementScheme) -> Self {
        Self {
            dim: s.dim(),
            outcomes: s
                .outcomes()
                .iter()
                .map(|o| OutcomeJson {
                    label: o.label.clone(),
                    work: o.work,
                    matrix: matrix_to_json(o.element.matrix()),
                })
                .collect(),
        }
    }

    pub fn to_scheme(&self) -> Result<MeasurementScheme> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| {
                let m = matrix_from_json(&o.matrix, self.dim)
                    .with_context(|| format!("outcome {}", o.label))?;
                Ok(Outcome::new(
                    HermitianOperator::new(m)?,
                    o.work,
                    o.label.clone(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasurementScheme::new(self.dim, outcomes)?)
    }
}

/// Initial state, `{"dim": d, "rho": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dim: usize,
    pub rho: MatrixJson,
}

impl StateFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self {
            dim: rho.dim(),
            rho: matrix_to_json(rho.matrix()),
        }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::new(matrix_from_json(&self.rho, self.dim)?)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsVJson {
    #[serde(rename = "V")]
    pub v_shift: f64,
    pub v: f64,
    pub delta_margin: Option<f64>,
    pub epsilon: f64,
    pub w: f64,
}

impl From<&EpsVParameters> for EpsVJson {
    fn from(p: &EpsVParameters) -> Self {
        Self {
            v_shift: p.v_shift,
            v: p.v,
            delta_margin: p.delta_margin,
            epsilon: p.epsilon,
            w: p.w,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualsJson {
    pub completeness: f64,
    pub condition_i: f64,
    pub positivity: f64,
}

impl From<&FeasibilityReport> for ResidualsJson {
    fn from(r: &FeasibilityReport) -> Self {
        Self {
            completeness: r.completeness,
            condition_i: r.condition_i,
            positivity: r.positivity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeJson {
    pub xi: f64,
    pub xi_how: f64,
    pub residuals: ResidualsJson,
    pub iters: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub restart: Option<usize>,
}

impl From<&MinimizeReport> for MinimizeJson {
    fn from(r: &MinimizeReport) -> Self {
        Self {
            xi: r.xi,
            xi_how: r.xi_how,
            residuals: (&r.residuals).into(),
            iters: r.iters,
            seed: r.seed,
            k: r.k,
            restart: r.restart,
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_process(path: &Path) -> Result<Process> {
    read_json::<ProcessFile>(path)?
        .to_process()
        .with_context(|| format!("invalid process in {}", path.display()))
}

pub fn read_scheme(path: &Path) -> Result<MeasurementScheme> {
    read_json::<SchemeFile>(path)?
        .to_scheme()
        .with_context(|| format!("invalid scheme in {}", path.display()))
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    read_json::<StateFile>(path)?
        .to_density()
        .with_context(|| format!("invalid state in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use workfluct_core::qubit::example_process;
    use workfluct_core::scheme::how_scheme;

    #[test]
    fn process_round_trip_is_lossless() {
        let p = example_process(2.0, 3.0, 0.2).unwrap();
        let text = serde_json::to_string(&ProcessFile::from_process(&p)).unwrap();
        let back: ProcessFile = serde_json::from_str(&text).unwrap();
        let q = back.to_process().unwrap();
        assert_eq!(p.u().matrix(), q.u().matrix());
        assert_eq!(p.how_operator(), q.how_operator());
    }

    #[test]
    fn scheme_round_trip_is_lossless() {
        let p = example_process(2.0, 3.0, 0.2).unwrap();
        let s = how_scheme(&p).unwrap();
        let text = serde_json::to_string(&SchemeFile::from_scheme(&s)).unwrap();
        let back: SchemeFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_scheme().unwrap(), s);
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        let rows: MatrixJson = vec![vec![[1.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]];
        assert!(matrix_from_json(&rows, 2).is_err());
        let rows: MatrixJson = vec![vec![[f64::NAN, 0.0]]];
        assert!(matrix_from_json(&rows, 1).is_err());
    }
}
