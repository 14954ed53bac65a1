//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{squared_distance, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

/// Best of `restarts` runs by inertia.
pub fn kmeans(x: &Matrix, cfg: &KMeansConfig, rng: &mut impl Rng) -> Result<KMeansResult> {
    if cfg.k == 0 || cfg.restarts == 0 {
        return Err(Error::Invalid("k and restarts must be positive".into()));
    }
    if x.rows() < cfg.k {
        return Err(Error::NotEnoughData(format!("{} points for {} clusters", x.rows(), cfg.k)));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts {
        let r = lloyd(x, cfg, rng);
        if best.as_ref().map_or(true, |b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(x: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = x.rows();
    let mut c = Matrix::zeros(k, x.cols());
    let first = rng.gen_range(0..n);
    c.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(x.row(i), c.row(0))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        c.row_mut(j).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), c.row(j)));
        }
    }
    c
}

fn nearest(row: &[f64], c: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..c.rows() {
        let d = squared_distance(row, c.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn lloyd(x: &Matrix, cfg: &KMeansConfig, rng: &mut impl Rng) -> KMeansResult {
    let (n, d, k) = (x.rows(), x.cols(), cfg.k);
    let mut c = plus_plus(x, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..cfg.max_iter {
        let mut changed = false;
        for i in 0..n {
            let (j, dd) = nearest(x.row(i), &c);
            dist[i] = dd;
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // reseed an empty cluster at the worst-served point
                let far = (0..n).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap_or(0);
                c.row_mut(j).copy_from_slice(x.row(far));
                dist[far] = 0.0;
            } else {
                for (cv, s) in c.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *cv = s / counts[j] as f64;
                }
            }
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        let (j, dd) = nearest(x.row(i), &c);
        labels[i] = j;
        inertia += dd;
    }
    KMeansResult {
        labels,
        centroids: c,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        for c in 0..3 {
            for _ in 0..20 {
                rows.push(vec![c as f64 * 10.0 + rng.gen::<f64>(), rng.gen::<f64>()]);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let r = kmeans(&x, &KMeansConfig::new(3), &mut rng).unwrap();
        for c in 0..3 {
            let l = r.labels[c * 20];
            assert!(r.labels[c * 20..(c + 1) * 20].iter().all(|&x| x == l));
        }
        let distinct: std::collections::BTreeSet<_> = r.labels.iter().collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn too_few_points() {
        let x = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(kmeans(&x, &KMeansConfig::new(2), &mut rng).is_err());
    }

    #[test]
    fn duplicate_points_do_not_panic() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0]; 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = kmeans(&x, &KMeansConfig::new(3), &mut rng).unwrap();
        assert_eq!(r.inertia, 0.0);
    }
}
