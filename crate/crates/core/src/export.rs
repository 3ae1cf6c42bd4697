//! Curve and report files.
//!
//! Curves are written as two-column CSV with a header and one row per grid
//! point in increasing `nu`. Floats use Rust's shortest round-trip format, so
//! reading a file back reproduces the curve bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::IoError;
use crate::kendall::{GeneratorCurve, KendallCurve, KendallError};
use crate::pipeline::{PipelineOptions, PipelineResult};
use crate::selector::SelectionReport;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("malformed curve file at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Curve(#[from] KendallError),
}

impl From<std::io::Error> for ExportError {
    fn from(e: std::io::Error) -> Self {
        ExportError::Io(IoError::Io(e))
    }
}

impl From<serde_json::Error> for ExportError {
    fn from(e: serde_json::Error) -> Self {
        ExportError::Io(IoError::Json(e))
    }
}

pub fn write_curve_to<W: Write>(mut w: W, header: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<(), ExportError> {
    writeln!(w, "{},{}", header.0, header.1)?;
    for (x, y) in xs.iter().zip(ys) {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}

fn write_curve(path: &Path, header: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_curve_to(&mut w, header, xs, ys)?;
    w.flush()?;
    Ok(())
}

/// Parses a two-column curve, checking the grid is strictly increasing.
pub fn read_curve_from<R: Read>(mut r: R) -> Result<(Vec<f64>, Vec<f64>), ExportError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ExportError::Malformed { line: i + 1, message };
        let (a, b) = line.split_once(',').ok_or_else(|| bad("expected two columns".into()))?;
        let x: f64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let y: f64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
        if xs.last().is_some_and(|&p| x <= p) {
            return Err(bad("grid is not strictly increasing".into()));
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

pub fn write_kendall_csv(curve: &KendallCurve, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_curve(path.as_ref(), ("nu", "K"), &curve.nu_grid, &curve.k_values)
}

pub fn write_lambda_csv(curve: &KendallCurve, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_curve(path.as_ref(), ("nu", "lambda"), &curve.nu_grid, &curve.lambda())
}

/// Writes `log φ`; the anchor and clipping level live in the JSON bundle.
pub fn write_generator_csv(curve: &GeneratorCurve, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_curve(path.as_ref(), ("nu", "log_phi"), &curve.nu_grid, &curve.log_phi)
}

pub fn read_kendall_csv(path: impl AsRef<Path>) -> Result<KendallCurve, ExportError> {
    let (xs, ys) = read_curve_from(File::open(path)?)?;
    Ok(KendallCurve::from_values(xs, ys)?)
}

pub fn read_generator_csv(path: impl AsRef<Path>, nu0: f64, epsilon: f64) -> Result<GeneratorCurve, ExportError> {
    let (nu_grid, log_phi) = read_curve_from(File::open(path)?)?;
    Ok(GeneratorCurve { nu_grid, log_phi, nu0, epsilon, clip_count: 0 })
}

/// Everything a `fit` run produces, plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBundle {
    pub input: String,
    pub options: PipelineOptions,
    #[serde(flatten)]
    pub result: PipelineResult,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<CurveBundle, ExportError> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

/// Writes `kendall.csv`, `lambda.csv`, `generator.csv` and `fit.json` into `dir`.
pub fn write_fit_outputs(bundle: &CurveBundle, dir: impl AsRef<Path>) -> Result<(), ExportError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_kendall_csv(&bundle.result.kendall, dir.join("kendall.csv"))?;
    write_lambda_csv(&bundle.result.kendall, dir.join("lambda.csv"))?;
    write_generator_csv(&bundle.result.generator, dir.join("generator.csv"))?;
    write_json(bundle, dir.join("fit.json"))
}

/// Writes `selection.json` and `selection.txt` into `dir`.
pub fn write_selection_outputs(report: &SelectionReport, dir: impl AsRef<Path>) -> Result<(), ExportError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_json(report, dir.join("selection.json"))?;
    std::fs::write(dir.join("selection.txt"), report.to_table())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Family, FamilyFit};

    #[test]
    fn kendall_csv_round_trip() {
        let curve = FamilyFit::from_tau(Family::Gumbel, 0.37).unwrap().kendall_curve(257).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        write_kendall_csv(&curve, &p).unwrap();
        let back = read_kendall_csv(&p).unwrap();
        assert_eq!(back.nu_grid, curve.nu_grid);
        assert_eq!(back.k_values, curve.k_values);
    }

    #[test]
    fn generator_csv_round_trip() {
        let fit = FamilyFit::from_tau(Family::Frank, 0.3).unwrap();
        let gen = fit.exact_generator_curve(101, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        write_generator_csv(&gen, &p).unwrap();
        let back = read_generator_csv(&p, gen.nu0, gen.epsilon).unwrap();
        assert_eq!(back.nu_grid, gen.nu_grid);
        assert_eq!(back.log_phi, gen.log_phi);
    }

    #[test]
    fn unordered_grid_rejected() {
        let text = "nu,K\n0.5,0.6\n0.4,0.7\n";
        assert!(matches!(read_curve_from(text.as_bytes()), Err(ExportError::Malformed { line: 3, .. })));
    }
}
