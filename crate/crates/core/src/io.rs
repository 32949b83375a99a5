//! Dataset manifests and CSV matrix files.
//!
//! A manifest is a JSON document listing one headerless CSV file per
//! observation matrix. Relative paths resolve against the manifest's directory.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MatrixDataset;
use crate::linalg::SymMatrix;
use crate::montecarlo::fmt_full;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub group: String,
    pub p: usize,
    pub q: usize,
    pub observations: Vec<PathBuf>,
    #[serde(default)]
    pub center: bool,
    #[serde(default)]
    pub row_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub group: String,
    pub dataset: MatrixDataset,
    /// Labels of the row variables after any transpose.
    pub row_labels: Option<Vec<String>>,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a headerless comma-separated numeric matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                col: c + 1,
                cell: cell.to_string(),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Shape {
                    path: path.to_path_buf(),
                    message: format!("row {} has {} columns, expected {}", r + 1, row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Shape {
            path: path.to_path_buf(),
            message: "file has no rows".into(),
        });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn read_sym_csv(path: &Path) -> Result<SymMatrix> {
    let m = read_matrix_csv(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Shape {
            path: path.to_path_buf(),
            message: format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    SymMatrix::new(m)
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: &mut W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_full(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_sign_csv<W: Write>(signs: &[Vec<i8>], out: &mut W) -> std::io::Result<()> {
    for row in signs {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(io_error(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Loads every observation listed in a manifest.
///
/// With `transpose`, each matrix is transposed so the row machinery tests the
/// column covariance. Requested centering is deferred to the estimators, which
/// demean each row variable of the (possibly transposed) data.
pub fn load_dataset(manifest_path: &Path, transpose: bool) -> Result<LoadedDataset> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.observations.is_empty() {
        return Err(Error::invalid(format!(
            "{}: manifest lists no observations",
            manifest_path.display()
        )));
    }
    if let Some(labels) = &manifest.row_labels {
        if labels.len() != manifest.p {
            return Err(Error::invalid(format!(
                "{}: {} row labels for p = {}",
                manifest_path.display(),
                labels.len(),
                manifest.p
            )));
        }
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut observations = Vec::with_capacity(manifest.observations.len());
    for rel in &manifest.observations {
        let path = if rel.is_absolute() {
            rel.clone()
        } else {
            base.join(rel)
        };
        let m = read_matrix_csv(&path)?;
        if m.shape() != (manifest.p, manifest.q) {
            return Err(Error::Shape {
                path,
                message: format!(
                    "matrix is {}x{}, manifest declares {}x{}",
                    m.nrows(),
                    m.ncols(),
                    manifest.p,
                    manifest.q
                ),
            });
        }
        observations.push(if transpose { m.transpose() } else { m });
    }
    let dataset = MatrixDataset::new(observations, !manifest.center)?;
    Ok(LoadedDataset {
        group: manifest.group,
        dataset,
        row_labels: if transpose { None } else { manifest.row_labels },
    })
}
