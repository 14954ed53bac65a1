//! Self-contained learners used by the evaluation protocols.

pub mod agglomerative;
pub mod gbdt;
pub mod kmeans;
pub mod logreg;
pub mod ols;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::SizeMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Which supervised learner the classification protocols use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Gbdt(gbdt::GbdtConfig),
    Logistic(logreg::LogRegConfig),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self::Gbdt(gbdt::GbdtConfig::default())
    }
}

pub enum Classifier {
    Gbdt(gbdt::Gbdt),
    Logistic(logreg::LogReg),
}

impl Classifier {
    /// Labels must lie in `0..n_classes`.
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Self> {
        Ok(match spec {
            ClassifierSpec::Gbdt(cfg) => Self::Gbdt(gbdt::Gbdt::fit(cfg, x, y, n_classes)?),
            ClassifierSpec::Logistic(cfg) => Self::Logistic(logreg::LogReg::fit(cfg, x, y, n_classes)?),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        match self {
            Self::Gbdt(m) => m.predict(x),
            Self::Logistic(m) => m.predict(x),
        }
    }
}

pub(crate) fn check_labels(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::SizeMismatch(format!("{} rows, {} labels", x.rows(), y.len())));
    }
    if x.rows() == 0 {
        return Err(Error::NotEnoughData("empty training set".into()));
    }
    if n_classes < 2 {
        return Err(Error::Invalid("need at least 2 classes".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Invalid(format!("label {bad} >= {n_classes} classes")));
    }
    Ok(())
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
