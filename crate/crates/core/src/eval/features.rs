//! Pair features for link prediction.

use crate::embed::SparseEmbedding;
use crate::error::{Error, Result};
use crate::graph::{sorted_intersection_count, WeightedGraph};
use crate::learn::Matrix;

/// Elementwise product of rows `u` and `v`, as sorted `(dim, value)` pairs.
/// Only dimensions present in both rows can be nonzero.
pub fn hadamard_features(e: &SparseEmbedding, u: usize, v: usize) -> Result<Vec<(usize, f64)>> {
    for r in [u, v] {
        if r >= e.rows() {
            return Err(Error::NodeOutOfRange { node: r, n: e.rows() });
        }
    }
    let (ia, va) = (e.row_indices(u), e.row_values(u));
    let (ib, vb) = (e.row_indices(v), e.row_values(v));
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ia.len() && j < ib.len() {
        match ia[i].cmp(&ib[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((ia[i], va[i] * vb[j]));
                i += 1;
                j += 1;
            }
        }
    }
    Ok(out)
}

/// Dense Hadamard feature rows for a list of pairs.
pub fn hadamard_matrix(e: &SparseEmbedding, pairs: &[(usize, usize)]) -> Result<Matrix> {
    let mut m = Matrix::zeros(pairs.len(), e.cols());
    for (r, &(u, v)) in pairs.iter().enumerate() {
        for (d, x) in hadamard_features(e, u, v)? {
            m.set(r, d, x);
        }
    }
    Ok(m)
}

/// Common neighbors, Adamic-Adar, preferential attachment, Jaccard and
/// resource allocation for the pair `(u, v)`, on the unweighted skeleton.
/// An edge between `u` and `v` itself is ignored, so training positives look
/// like held-out ones.
pub fn heuristic_features(g: &WeightedGraph, u: usize, v: usize) -> Result<[f64; 5]> {
    let link = usize::from(u != v && g.has_edge(u, v));
    let (du, dv) = (g.degree(u)? - link, g.degree(v)? - link);
    let (nu, nv) = (g.neighbors(u), g.neighbors(v));
    let (mut aa, mut ra, mut cn) = (0.0, 0.0, 0usize);
    let (mut i, mut j) = (0, 0);
    while i < nu.len() && j < nv.len() {
        match nu[i].cmp(&nv[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let dz = nu[i];
                let deg = g.neighbors(dz).len() as f64;
                cn += 1;
                ra += 1.0 / deg;
                if deg > 1.0 {
                    aa += 1.0 / deg.ln();
                }
                i += 1;
                j += 1;
            }
        }
    }
    debug_assert_eq!(cn, sorted_intersection_count(nu, nv));
    let union = du + dv - cn;
    let jaccard = if union == 0 { 0.0 } else { cn as f64 / union as f64 };
    Ok([cn as f64, aa, (du * dv) as f64, jaccard, ra])
}

pub fn heuristic_matrix(g: &WeightedGraph, pairs: &[(usize, usize)]) -> Result<Matrix> {
    let mut m = Matrix::zeros(pairs.len(), 5);
    for (r, &(u, v)) in pairs.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&heuristic_features(g, u, v)?);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn hadamard_cases() {
        let e = SparseEmbedding::from_rows(3, vec![vec![(1, 0.5)], vec![(1, 0.4)], vec![(0, 1.0), (2, 1.0)]]).unwrap();
        assert_eq!(hadamard_features(&e, 0, 1).unwrap(), vec![(1, 0.2)]);
        assert!(hadamard_features(&e, 0, 2).unwrap().is_empty());
        assert!(hadamard_features(&e, 0, 3).is_err());
    }

    #[test]
    fn hadamard_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<(usize, f64)>> = (0..10)
            .map(|_| (0..8).filter_map(|d| rng.gen_bool(0.5).then(|| (d, rng.gen()))).collect())
            .collect();
        let e = SparseEmbedding::from_rows(8, rows).unwrap();
        let m = hadamard_matrix(&e, &[(0, 1), (2, 9), (5, 5)]).unwrap();
        for (r, &(u, v)) in [(0, 1), (2, 9), (5, 5)].iter().enumerate() {
            let (a, b) = (e.dense_row(u), e.dense_row(v));
            for d in 0..8 {
                assert_eq!(m.get(r, d), a[d] * b[d]);
            }
        }
    }

    #[test]
    fn triangle_arithmetic() {
        let g = WeightedGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
        let f = heuristic_features(&g, 0, 1).unwrap();
        assert_eq!(f[0], 1.0);
        assert_abs_diff_eq!(f[1], 1.0 / 2f64.ln());
        assert_eq!(f[2], 1.0);
        assert_abs_diff_eq!(f[3], 1.0);
        assert_eq!(f[4], 0.5);
    }

    #[test]
    fn star_leaves_and_strangers() {
        let g = WeightedGraph::from_edges(5, [(0, 1), (0, 2), (0, 3), (3, 4)]);
        let f = heuristic_features(&g, 1, 2).unwrap();
        assert_eq!((f[0], f[2]), (1.0, 1.0));
        let f = heuristic_features(&g, 1, 4).unwrap();
        assert_eq!([f[0], f[1], f[3], f[4]], [0.0; 4]);
    }

    #[test]
    fn heuristics_match_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(5..100);
            let mut b = crate::graph::GraphBuilder::new(n);
            for _ in 0..rng.gen_range(n..4 * n) {
                b.add_edge(rng.gen_range(0..n), rng.gen_range(0..n), 1.0).unwrap();
            }
            let g = b.build();
            let nb = |x: usize| -> BTreeSet<usize> { (0..n).filter(|&y| g.has_edge(x, y)).collect() };
            let without = |x: usize, y: usize| -> BTreeSet<usize> {
                nb(x).into_iter().filter(|&z| x == y || z != y).collect()
            };
            for _ in 0..30 {
                let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let (a, c) = (without(u, v), without(v, u));
                let common: Vec<usize> = a.intersection(&c).copied().collect();
                let union = a.union(&c).count();
                let cn = common.len() as f64;
                let aa: f64 = common
                    .iter()
                    .map(|&z| nb(z).len() as f64)
                    .map(|d| if d > 1.0 { 1.0 / d.ln() } else { 0.0 })
                    .sum();
                let ra: f64 = common.iter().map(|&z| 1.0 / nb(z).len() as f64).sum();
                let jac = if union == 0 { 0.0 } else { cn / union as f64 };
                let f = heuristic_features(&g, u, v).unwrap();
                let want = [cn, aa, (a.len() * c.len()) as f64, jac, ra];
                for k in 0..5 {
                    assert_abs_diff_eq!(f[k], want[k], epsilon = 1e-12);
                }
            }
        }
    }
}
