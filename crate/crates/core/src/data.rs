//! Datasets, CSV ingestion, standardization and the spectrum of `XᵀX/n`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Centering/scaling applied by [`standardize`], kept so coefficients can be
/// mapped back to the original column scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
}

impl Standardization {
    /// Map coefficients fitted on standardized columns back to the raw scale.
    pub fn to_original_scale(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter()
            .zip(&self.x_scale)
            .map(|(b, s)| b / s)
            .collect()
    }
}

/// Response vector and design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    names: Vec<String>,
    standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n >= 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidDataset("need at least one predictor".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "y has length {} but x has {n} rows",
                y.len()
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        Ok(Self {
            y,
            x,
            names,
            standardization: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Rows `rows` of this dataset (standardization state is dropped).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Dataset::with_names(x, y, self.names.clone())
    }

    /// Columns `cols` of this dataset, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        let x = self.x.select_columns(cols);
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        Dataset::with_names(x, self.y.clone(), names)
    }

    /// `XᵀX`
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x)
    }

    /// Write `response` followed by the predictor columns. Values use Rust's
    /// shortest round-trip formatting, so a reload is bit-identical.
    pub fn write_csv(&self, path: impl AsRef<Path>, response: &str) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str(response);
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n() {
            write!(out, "{}", self.y[i]).unwrap();
            for j in 0..self.p() {
                write!(out, ",{}", self.x[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Load a comma-separated file with one header row. `response_col` becomes
/// `y`; every other column, in header order, becomes a column of `x`.
pub fn load_csv(path: impl AsRef<Path>, response_col: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, response_col)
}

pub fn parse_csv(text: &str, response_col: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .quoting(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let ycol = header
        .iter()
        .position(|h| h == response_col)
        .ok_or_else(|| Error::ResponseColumnAbsent(response_col.to_owned()))?;

    let p = header.len() - 1;
    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        // header is row 1
        let row = r + 2;
        if record.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row,
                    col: c + 1,
                    name: header[c].clone(),
                    value: cell.to_owned(),
                })?;
            if c == ycol {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!("need n >= 2 rows, got {n}")));
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    let names = header
        .into_iter()
        .enumerate()
        .filter(|&(c, _)| c != ycol)
        .map(|(_, h)| h)
        .collect();
    Dataset::with_names(x, DVector::from_vec(ys), names)
}

/// Center every column of `x` and scale it to unit sample standard deviation
/// (denominator `n - 1`); center `y`.
///
/// Applying this to an already standardized dataset is a no-op up to
/// rounding; the recorded transformation is composed so back-mapping still
/// refers to the original raw columns.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    let n = d.n();
    let mut x = d.x.clone();
    let mut means = Vec::with_capacity(d.p());
    let mut scales = Vec::with_capacity(d.p());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        let sd = (ss / (n - 1) as f64).sqrt();
        let tol = 1e-12 * mean.abs().max(1.0);
        if !(sd > tol) {
            return Err(Error::ConstantColumn(j + 1));
        }
        col.scale_mut(1.0 / sd);
        means.push(mean);
        scales.push(sd);
    }
    let y_mean = d.y.mean();
    let y = d.y.add_scalar(-y_mean);

    let standardization = match &d.standardization {
        None => Standardization {
            x_mean: means,
            x_scale: scales,
            y_mean,
        },
        Some(prev) => Standardization {
            x_mean: prev
                .x_mean
                .iter()
                .zip(&prev.x_scale)
                .zip(&means)
                .map(|((m0, s0), m)| m0 + s0 * m)
                .collect(),
            x_scale: prev.x_scale.iter().zip(&scales).map(|(a, b)| a * b).collect(),
            y_mean: prev.y_mean + y_mean,
        },
    };
    Ok(Dataset {
        y,
        x,
        names: d.names.clone(),
        standardization: Some(standardization),
    })
}

/// Eigendecomposition `XᵀX/n = Γ D Γᵀ` with eigenvalues in non-increasing
/// order.
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Eigenvalues within this (relative) distance of zero are set to zero.
const NEG_EIGEN_CLAMP: f64 = 1e-10;

impl EigenSpectrum {
    /// Spectrum of an arbitrary symmetric PSD matrix.
    pub fn of_symmetric(m: DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 10_000 * p.max(1)).ok_or_else(|| {
            let diag = m.diagonal();
            let lo = diag.min().abs().max(f64::MIN_POSITIVE);
            Error::EigenNonConvergence {
                condition: diag.max() / lo,
            }
        })?;
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut values = DVector::zeros(p);
        let mut vectors = DMatrix::zeros(p, p);
        for (k, &i) in order.iter().enumerate() {
            let v = eig.eigenvalues[i];
            if v < -NEG_EIGEN_CLAMP * scale.max(1.0) {
                return Err(Error::EigenNonConvergence {
                    condition: f64::INFINITY,
                });
            }
            values[k] = if v.abs() <= NEG_EIGEN_CLAMP * scale { 0.0 } else { v };
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Ok(Self {
            eigenvalues: values,
            eigenvectors: vectors,
        })
    }

    /// Spectrum that carries eigenvalues only (eigenvectors set to identity).
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let p = values.len();
        Self {
            eigenvalues: DVector::from_vec(values),
            eigenvectors: DMatrix::identity(p, p),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.eigenvalues.norm_squared()
    }

    /// `Γ D Γᵀ`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let g = &self.eigenvectors;
        let mut scaled = g.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.eigenvalues[j]);
        }
        scaled * g.transpose()
    }
}

/// Spectrum of `XᵀX/n`.
pub fn eigen_gram(d: &Dataset) -> Result<EigenSpectrum> {
    let g = d.gram() / d.n() as f64;
    EigenSpectrum::of_symmetric(g)
}

/// AR(1) correlation matrix `R[i][j] = rho^|i-j|`.
pub fn ar1_correlation(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// Eigenvalues of the AR(1) correlation matrix, largest first.
///
/// `R⁻¹(1 - ρ²)` is tridiagonal with diagonal `(1, 1+ρ², …, 1+ρ², 1)` and
/// off-diagonal `-ρ`, so each eigenvalue is found by Sturm-count bisection in
/// `O(p)` per step instead of a dense `O(p³)` solve.
pub fn ar1_eigenvalues(p: usize, rho: f64) -> Result<Vec<f64>> {
    if p == 0 || !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) needs p >= 1 and |rho| < 1, got p = {p}, rho = {rho}")));
    }
    if p == 1 || rho == 0.0 {
        return Ok(vec![1.0; p]);
    }
    let r2 = rho * rho;
    let diag = |i: usize| if i == 0 || i == p - 1 { 1.0 } else { 1.0 + r2 };
    // eigenvalues of T below x
    let count_below = |x: f64| {
        let mut below = 0;
        let mut q = diag(0) - x;
        for i in 0..p {
            if i > 0 {
                let prev = if q == 0.0 { f64::EPSILON * r2 } else { q };
                q = diag(i) - x - r2 / prev;
            }
            if q < 0.0 {
                below += 1;
            }
        }
        below
    };
    // Gershgorin: spec(T) ⊂ [(1-|ρ|)², (1+|ρ|)²]
    let (lo0, hi0) = ((1.0 - rho.abs()).powi(2), (1.0 + rho.abs()).powi(2));
    let mut values: Vec<f64> = (0..p)
        .map(|k| {
            // k-th smallest eigenvalue of T
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > 4.0 * f64::EPSILON * hi {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (1.0 - r2) / (0.5 * (lo + hi))
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Spectrum of `E[XᵀX/n]` for `n` rows drawn from an AR(1) design whose
/// columns are then centered and scaled to unit sample SD: `(n-1)/n · R`.
pub fn ar1_expected_gram_spectrum(p: usize, rho: f64, n: usize) -> Result<EigenSpectrum> {
    let c = (n - 1) as f64 / n as f64;
    Ok(EigenSpectrum::from_eigenvalues(ar1_eigenvalues(p, rho)?.into_iter().map(|v| c * v).collect()))
}
