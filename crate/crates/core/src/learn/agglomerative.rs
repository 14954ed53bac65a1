//! Average-linkage agglomerative clustering over a precomputed distance
//! matrix.

use super::Matrix;
use crate::error::{Error, Result};

/// Cosine distance `1 - cos` between all rows; zero rows are at distance 1
/// from everything else.
pub fn cosine_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let norms: Vec<f64> = (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let cos = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum::<f64>() / (norms[i] * norms[j])
            };
            let v = (1.0 - cos).max(0.0);
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// Merges the closest pair of clusters (ties to the lowest index pair) until
/// `k` remain. Returns contiguous labels in order of first appearance.
pub fn average_linkage(dist: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = dist.rows();
    if dist.cols() != n {
        return Err(Error::SizeMismatch("distance matrix must be square".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("cannot form {k} clusters from {n} points")));
    }
    let mut d = dist.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    for _ in 0..n - k {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d.get(i, j) < best.2 {
                    best = (i, j, d.get(i, j));
                }
            }
        }
        let (a, b, _) = best;
        // Lance-Williams update for average linkage
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for m in 0..n {
            if active[m] && m != a && m != b {
                let v = (sa * d.get(a, m) + sb * d.get(b, m)) / (sa + sb);
                d.set(a, m, v);
                d.set(m, a, v);
            }
        }
        size[a] += size[b];
        active[b] = false;
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
    }
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    Ok(owner
        .into_iter()
        .map(|o| {
            if relabel[o] == usize::MAX {
                relabel[o] = next;
                next += 1;
            }
            relabel[o]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_linkage_by_hand() {
        // Points on a line at 0, 1, 5, 6, 20.
        let xs = [0.0f64, 1.0, 5.0, 6.0, 20.0];
        let n = xs.len();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d.set(i, j, (xs[i] - xs[j]).abs());
            }
        }
        assert_eq!(average_linkage(&d, 3).unwrap(), vec![0, 0, 1, 1, 2]);
        // {0,1} vs {5,6}: mean distance 5; {5,6} vs {20}: 14.5.
        assert_eq!(average_linkage(&d, 2).unwrap(), vec![0, 0, 0, 0, 1]);
        assert_eq!(average_linkage(&d, 1).unwrap(), vec![0; 5]);
        assert!(average_linkage(&d, 6).is_err());
    }

    #[test]
    fn cosine_groups_directions() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![5.0, 0.1], vec![0.0, 2.0], vec![0.1, 3.0]]).unwrap();
        let d = cosine_distances(&x);
        assert_eq!(average_linkage(&d, 2).unwrap(), vec![0, 0, 1, 1]);
    }
}
