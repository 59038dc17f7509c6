//! CSV ingestion, fit artifacts and atomic output files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::process::{CoefficientProcess, FitDiagnostics, QuantileGrid};

/// A numeric table read from CSV: the response and the covariate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub response: String,
    pub covariate_names: Vec<String>,
    pub y: Vec<f64>,
    pub covariates: Vec<Vec<f64>>,
}

fn csv_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Reads a comma-separated file with a header. `covariates = None` takes
/// every column other than the response, in file order.
///
/// Rows are numbered from 1 for the first data record.
pub fn read_csv(path: &Path, response: &str, covariates: Option<&[String]>) -> Result<CsvData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file, response, covariates)
}

pub fn read_csv_from(reader: impl std::io::Read, response: &str, covariates: Option<&[String]>) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(0, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(0, name, "column not found in header"))
    };
    let y_col = find(response)?;
    let names: Vec<String> = match covariates {
        Some(c) => c.to_vec(),
        None => header.iter().filter(|h| h.as_str() != response).cloned().collect(),
    };
    if names.is_empty() {
        return Err(csv_err(0, "", "no covariate columns"));
    }
    let x_cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| csv_err(row, "", e.to_string()))?;
        let cell = |col: usize| -> Result<f64> {
            let name = &header[col];
            let raw = rec.get(col).ok_or_else(|| csv_err(row, name, "missing cell"))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| csv_err(row, name, format!("cannot parse '{raw}' as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(csv_err(row, name, format!("non-finite value '{raw}'")))
            }
        };
        y.push(cell(y_col)?);
        rows.push(x_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
    }
    if y.is_empty() {
        return Err(csv_err(0, "", "no data rows"));
    }
    Ok(CsvData {
        response: response.to_string(),
        covariate_names: names,
        y,
        covariates: rows,
    })
}

/// Row-major matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_dmatrix(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| a[(i, j)])).collect();
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<f64>> {
        self.check()?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn to_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        if self.cols == 0 {
            return Ok(vec![Vec::new(); self.rows]);
        }
        Ok(self.data.chunks(self.cols).map(<[f64]>::to_vec).collect())
    }

    fn check(&self) -> Result<()> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Artifact(format!(
                "matrix declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }
}

pub const ARTIFACT_FORMAT: &str = "seriesqr-fit";
pub const ARTIFACT_VERSION: u32 = 1;

/// Everything later band runs need from a fit, without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArtifact {
    pub format: String,
    pub version: u32,
    /// Echo of the configuration that produced the fit.
    pub config: serde_json::Value,
    pub response: String,
    pub covariate_names: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub grid: Vec<f64>,
    /// `grid × m`.
    pub betas: Matrix,
    pub gram: Matrix,
    pub jacobians: Vec<Matrix>,
    pub bandwidths: Vec<f64>,
    pub basis: BasisSpec,
    /// `n × d` covariate sample (needed for averaged loadings).
    pub covariates: Matrix,
    pub diagnostics: Vec<FitDiagnostics>,
}

impl FitArtifact {
    pub fn new(
        proc: &CoefficientProcess,
        basis: &BasisSpec,
        data: &CsvData,
        config: serde_json::Value,
    ) -> Self {
        Self {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            config,
            response: data.response.clone(),
            covariate_names: data.covariate_names.clone(),
            n: proc.n,
            m: proc.m(),
            grid: proc.grid.points().to_vec(),
            betas: Matrix::from_rows(&proc.betas),
            gram: Matrix::from_dmatrix(&proc.gram),
            jacobians: proc.jacobians.iter().map(Matrix::from_dmatrix).collect(),
            bandwidths: proc.bandwidths.clone(),
            basis: basis.clone(),
            covariates: Matrix::from_rows(&data.covariates),
            diagnostics: proc.diagnostics.clone(),
        }
    }

    /// Rebuilds the coefficient process; bit-identical to the one saved.
    pub fn process(&self) -> Result<CoefficientProcess> {
        let grid = QuantileGrid::new(self.grid.clone())?;
        let jacobians = self
            .jacobians
            .iter()
            .map(Matrix::to_dmatrix)
            .collect::<Result<Vec<_>>>()?;
        CoefficientProcess::from_parts(
            grid,
            self.betas.to_rows()?,
            self.gram.to_dmatrix()?,
            jacobians,
            self.bandwidths.clone(),
            self.n,
            Some(self.basis.clone()),
            self.diagnostics.clone(),
        )
        .map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn covariate_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.covariates.to_rows()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Artifact(e.to_string()))?;
        match (value.get("format").and_then(|v| v.as_str()), value.get("version").and_then(|v| v.as_u64())) {
            (Some(ARTIFACT_FORMAT), Some(v)) if v == u64::from(ARTIFACT_VERSION) => {}
            (Some(ARTIFACT_FORMAT), v) => {
                return Err(Error::Artifact(format!("unsupported artifact version {v:?}")))
            }
            _ => return Err(Error::Artifact("not a seriesqr fit artifact".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Artifact(e.to_string()))
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Artifact(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
