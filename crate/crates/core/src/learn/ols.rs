//! Ordinary least squares with an intercept, falling back to a tiny ridge
//! penalty when the design matrix is rank deficient.

use nalgebra::{DMatrix, DVector};

use super::Matrix;
use crate::error::{Error, Result};

/// Penalty used when the design matrix is singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Relative singular-value cutoff below which the design counts as singular.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Whether the ridge fallback was needed.
    pub ridge: bool,
}

impl LinearModel {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::SizeMismatch(format!("{} rows, {} targets", x.rows(), y.len())));
        }
        if x.rows() == 0 {
            return Err(Error::NotEnoughData("empty regression set".into()));
        }
        let (n, d) = (x.rows(), x.cols());
        let design = DMatrix::from_fn(n, d + 1, |r, c| if c == 0 { 1.0 } else { x.get(r, c - 1) });
        let target = DVector::from_column_slice(y);
        let svd = design.clone().svd(false, false);
        let sv = &svd.singular_values;
        let max = sv.max();
        let min = if n >= d + 1 { sv.min() } else { 0.0 };
        let singular = max == 0.0 || min <= RANK_TOL * max;
        let beta = if singular {
            // Ridge on the slopes only, as least squares on [X; sqrt(l) I].
            let mut aug = DMatrix::zeros(n + d, d + 1);
            aug.view_mut((0, 0), (n, d + 1)).copy_from(&design);
            for j in 0..d {
                aug[(n + j, j + 1)] = RIDGE_FALLBACK.sqrt();
            }
            let mut rhs = DVector::zeros(n + d);
            rhs.rows_mut(0, n).copy_from(&target);
            solve_least_squares(aug, rhs)?
        } else {
            solve_least_squares(design, target)?
        };
        Ok(Self {
            intercept: beta[0],
            coefficients: beta.iter().skip(1).copied().collect(),
            ridge: singular,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}

fn solve_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * 1e-14;
    svd.solve(&b, eps)
        .map_err(|e| Error::Invalid(format!("least squares failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_exact_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.gen()).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 + 3.0 * r[0] - r[1] + 0.5 * r[2]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = LinearModel::fit(&x, &y).unwrap();
        assert!(!m.ridge);
        assert_abs_diff_eq!(m.intercept, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.coefficients[0], 3.0, epsilon = 1e-9);
        let r2 = crate::stats::r_squared(&y, &m.predict(&x)).unwrap();
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_design_uses_ridge() {
        // Rows sum to one, so the columns are collinear with the intercept.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.gen();
                vec![a, 1.0 - a]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 4.0 * r[0] + 1.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = LinearModel::fit(&x, &y).unwrap();
        assert!(m.ridge);
        let r2 = crate::stats::r_squared(&y, &m.predict(&x)).unwrap();
        assert!(r2 > 1.0 - 1e-9, "{r2}");
    }

    #[test]
    fn fewer_rows_than_columns() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let m = LinearModel::fit(&x, &[1.0, 2.0]).unwrap();
        assert!(m.ridge);
        assert_abs_diff_eq!(m.predict_row(&[1.0, 0.0, 0.0]), 1.0, epsilon = 1e-6);
    }
}
