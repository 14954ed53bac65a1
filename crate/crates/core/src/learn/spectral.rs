//! Normalized spectral clustering on the cosine affinity of nonnegative
//! embedding rows.
//!
//! The affinity `S = X X^T` of unit-normalized rows has rank at most the
//! embedding width, so the leading eigenvectors of `D^-1/2 S D^-1/2` are
//! recovered from a small Gram matrix instead of an `n x n` decomposition.
//! When the affinity graph is disconnected a uniform floor is added to every
//! entry, which keeps the factorization low-rank.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::kmeans::{kmeans, KMeansConfig};
use super::Matrix;
use crate::embed::SparseEmbedding;
use crate::error::{Error, Result};

/// Uniform affinity added when the similarity graph has several components.
pub const AFFINITY_FLOOR: f64 = 1e-12;

/// Relative eigenvalue cutoff below which the Gram route is abandoned.
const EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub labels: Vec<usize>,
    pub floor_added: bool,
    /// Whether a dense decomposition was needed.
    pub dense: bool,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Rows sharing a nonzero dimension have positive affinity.
fn affinity_connected(e: &SparseEmbedding) -> bool {
    let n = e.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut first_in_dim = vec![usize::MAX; e.cols()];
    for r in 0..n {
        for &d in e.row_indices(r) {
            if first_in_dim[d] == usize::MAX {
                first_in_dim[d] = r;
            } else {
                let (a, b) = (find(&mut parent, r), find(&mut parent, first_in_dim[d]));
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, 0);
    (1..n).all(|r| find(&mut parent, r) == root)
}

/// Clusters the rows of `e` into `k` groups.
pub fn spectral_clustering(
    e: &SparseEmbedding,
    k: usize,
    kmeans_cfg: Option<KMeansConfig>,
    rng: &mut impl Rng,
) -> Result<SpectralResult> {
    let n = e.rows();
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("cannot form {k} clusters from {n} rows")));
    }
    let floor_added = !affinity_connected(e);
    let eps = if floor_added { AFFINITY_FLOOR } else { 0.0 };
    let width = e.cols() + usize::from(floor_added);

    // Unit rows, then degrees of S = X X^T + eps 11^T.
    let norms: Vec<f64> = (0..n).map(|r| e.row_norm(r)).collect();
    let mut col_sums = vec![0.0; e.cols()];
    for r in 0..n {
        if norms[r] > 0.0 {
            for (d, v) in e.row(r) {
                col_sums[d] += v / norms[r];
            }
        }
    }
    let mut inv_sqrt_deg = vec![0.0; n];
    for r in 0..n {
        let mut deg = eps * n as f64;
        if norms[r] > 0.0 {
            deg += e.row(r).map(|(d, v)| v / norms[r] * col_sums[d]).sum::<f64>();
        }
        if deg <= 0.0 {
            return Err(Error::ZeroRow(r));
        }
        inv_sqrt_deg[r] = 1.0 / deg.sqrt();
    }

    // Y = D^-1/2 [X | sqrt(eps) 1], so D^-1/2 S D^-1/2 = Y Y^T.
    let mut y = DMatrix::<f64>::zeros(n, width);
    for r in 0..n {
        if norms[r] > 0.0 {
            for (d, v) in e.row(r) {
                y[(r, d)] = v / norms[r] * inv_sqrt_deg[r];
            }
        }
        if floor_added {
            y[(r, width - 1)] = eps.sqrt() * inv_sqrt_deg[r];
        }
    }

    let gram = y.transpose() * &y;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let usable = order.iter().filter(|&&i| eig.eigenvalues[i] > EIG_TOL * top).count();

    let mut maps = Matrix::zeros(n, k);
    let dense = usable < k;
    if dense {
        let affinity = &y * y.transpose();
        let full = SymmetricEigen::new(affinity);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| full.eigenvalues[b].total_cmp(&full.eigenvalues[a]));
        for (j, &i) in order.iter().take(k).enumerate() {
            for r in 0..n {
                maps.set(r, j, full.eigenvectors[(r, i)] * inv_sqrt_deg[r]);
            }
        }
    } else {
        for (j, &i) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(i);
            let u = &y * v / eig.eigenvalues[i].sqrt();
            for r in 0..n {
                maps.set(r, j, u[r] * inv_sqrt_deg[r]);
            }
        }
    }
    let cfg = kmeans_cfg.unwrap_or_else(|| KMeansConfig::new(k));
    let labels = kmeans(&maps, &KMeansConfig { k, ..cfg }, rng)?.labels;
    Ok(SpectralResult {
        labels,
        floor_added,
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::{nmi, Partition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn indicator(labels: &[usize], k: usize) -> SparseEmbedding {
        SparseEmbedding::from_rows(k, labels.iter().map(|&c| vec![(c, 1.0)]).collect()).unwrap()
    }

    #[test]
    fn indicator_rows_are_recovered() {
        let truth: Vec<usize> = (0..60).map(|i| i % 4).collect();
        let e = indicator(&truth, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = spectral_clustering(&e, 4, None, &mut rng).unwrap();
        assert!(r.floor_added);
        assert!(!r.dense);
        let score = nmi(&Partition::from_assignment(&truth), &Partition::from_assignment(&r.labels)).unwrap();
        assert!((score - 1.0).abs() < 1e-12, "{score}");
    }

    #[test]
    fn gram_route_separates_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<(usize, f64)>> = (0..30)
            .map(|i| {
                let base = (i / 10) * 2;
                vec![(base, 1.0 + rng.gen::<f64>()), (base + 1, rng.gen::<f64>()), (6, 0.05)]
            })
            .collect();
        let e = SparseEmbedding::from_rows(7, rows).unwrap();
        let r = spectral_clustering(&e, 3, None, &mut rng).unwrap();
        assert!(!r.floor_added);
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let score = nmi(&Partition::from_assignment(&truth), &Partition::from_assignment(&r.labels)).unwrap();
        assert!(score > 0.99, "{score}");
    }

    #[test]
    fn low_rank_falls_back_to_dense() {
        let e = indicator(&[0, 0, 0, 1, 1, 1], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = spectral_clustering(&e, 4, None, &mut rng).unwrap();
        assert!(r.dense);
        assert_eq!(r.labels.len(), 6);
    }

    #[test]
    fn connectivity_check() {
        assert!(affinity_connected(&SparseEmbedding::from_rows(2, vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)], vec![(1, 1.0)]]).unwrap()));
        assert!(!affinity_connected(&SparseEmbedding::from_rows(2, vec![vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap()));
    }
}
