//! CSV emitters. Floats are written with 17 significant digits so that
//! every double round-trips exactly.

use std::path::Path;

use anyhow::{Context, Result};

use workfluct_core::circuits::WorkSamples;
use workfluct_core::dissipation::DissipationPair;
use workfluct_core::qubit::{Fig2Row, HistogramRow};
use workfluct_core::WorkDistribution;

pub enum Cell {
    F(f64),
    I(u64),
    S(String),
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(n) => n.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<Cell>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_distribution(path: &Path, dist: &WorkDistribution) -> Result<()> {
    write_csv(
        path,
        &["work", "probability"],
        dist.points()
            .iter()
            .map(|&(w, p)| vec![Cell::F(w), Cell::F(p)]),
    )
}

pub fn write_samples(path: &Path, s: &WorkSamples) -> Result<()> {
    write_csv(
        path,
        &["shot", "work"],
        s.samples
            .iter()
            .enumerate()
            .map(|(n, &w)| vec![Cell::I(n as u64), Cell::F(w)]),
    )
}

pub fn write_fig2(path: &Path, rows: &[Fig2Row]) -> Result<()> {
    write_csv(
        path,
        &["epsilon", "xi", "lambda_plus", "neg_lambda_minus"],
        rows.iter().map(|r| {
            vec![
                Cell::F(r.epsilon),
                Cell::F(r.xi),
                Cell::F(r.lambda_plus),
                Cell::F(r.neg_lambda_minus),
            ]
        }),
    )
}

pub fn write_histogram(path: &Path, rows: &[HistogramRow]) -> Result<()> {
    write_csv(
        path,
        &["work", "probability", "branch"],
        rows.iter().map(|r| {
            vec![
                Cell::F(r.work),
                Cell::F(r.probability),
                Cell::S(r.branch.as_str().into()),
            ]
        }),
    )
}

pub fn write_pdfs(path: &Path, pair: &DissipationPair, xs: &[f64]) -> Result<()> {
    write_csv(
        path,
        &["x", "pdf_c", "pdf_q"],
        workfluct_core::dissipation::pdf_table(pair, xs)
            .into_iter()
            .map(|(x, c, q)| vec![Cell::F(x), Cell::F(c), Cell::F(q)]),
    )
}

pub fn write_xi_curve(path: &Path, curve: &[(f64, f64, f64)]) -> Result<()> {
    write_csv(
        path,
        &["a", "b", "xi"],
        curve
            .iter()
            .map(|&(a, b, xi)| vec![Cell::F(a), Cell::F(b), Cell::F(xi)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
