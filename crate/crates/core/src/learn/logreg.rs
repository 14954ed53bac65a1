//! Multinomial logistic regression on standardized features, trained by
//! full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::gbdt::{argmax, softmax};
use super::{check_labels, Matrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogReg {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes x (features + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl LogReg {
    pub fn fit(cfg: &LogRegConfig, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Self> {
        check_labels(x, y, n_classes)?;
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v / n as f64;
            }
        }
        for r in 0..n {
            for ((s, m), v) in scale.iter_mut().zip(&mean).zip(x.row(r)) {
                *s += (v - m).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        let mut model = Self {
            mean,
            scale,
            weights: vec![vec![0.0; d + 1]; n_classes],
        };
        let z: Vec<Vec<f64>> = (0..n).map(|r| model.standardize(x.row(r))).collect();
        let mut grad = vec![vec![0.0; d + 1]; n_classes];
        let mut logits = vec![0.0; n_classes];
        let mut probs = vec![0.0; n_classes];
        for _ in 0..cfg.iterations {
            for g in &mut grad {
                g.fill(0.0);
            }
            for (row, &label) in z.iter().zip(y) {
                for (l, w) in logits.iter_mut().zip(&model.weights) {
                    *l = dot_bias(w, row);
                }
                softmax(&logits, &mut probs);
                for (k, g) in grad.iter_mut().enumerate() {
                    let err = probs[k] - f64::from(u8::from(k == label));
                    for (gj, xj) in g.iter_mut().zip(row) {
                        *gj += err * xj;
                    }
                    g[d] += err;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for j in 0..=d {
                    let reg = if j < d { cfg.l2 * w[j] } else { 0.0 };
                    w[j] -= cfg.learning_rate * (g[j] / n as f64 + reg);
                }
            }
        }
        Ok(model)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows())
            .map(|r| {
                let z = self.standardize(x.row(r));
                let logits: Vec<f64> = self.weights.iter().map(|w| dot_bias(w, &z)).collect();
                argmax(&logits)
            })
            .collect()
    }
}

fn dot_bias(w: &[f64], x: &[f64]) -> f64 {
    w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::accuracy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..300 {
            let c = rng.gen_range(0..3);
            rows.push(vec![c as f64 * 3.0 + rng.gen_range(-1.0..1.0), rng.gen()]);
            y.push(c);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = LogReg::fit(&LogRegConfig::default(), &x, &y, 3).unwrap();
        assert!(accuracy(&y, &m.predict(&x)) > 0.97);
    }

    #[test]
    fn constant_feature_is_harmless() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.1], vec![1.0, 0.9]]).unwrap();
        let y = [0, 1, 0, 1];
        let m = LogReg::fit(&LogRegConfig::default(), &x, &y, 2).unwrap();
        assert_eq!(m.predict(&x), y);
    }
}
