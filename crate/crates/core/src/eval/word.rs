//! Word-level protocols: similarity, categorization, community stability and
//! nearest-neighbor variation between models.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::datasets::{CategorizationDataset, SimilarityDataset};
use super::EvalReport;
use crate::community::{louvain, nmi, LouvainConfig, Partition};
use crate::embed::{cosine_similarity, LabeledEmbedding, NeighborIndex, SparseEmbedding};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::learn::agglomerative::{average_linkage, cosine_distances};
use crate::learn::kmeans::{kmeans, KMeansConfig};
use crate::learn::Matrix;
use crate::seed::{derive, stream_rng};
use crate::stats::{mean, spearman};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub spearman: f64,
    /// Share of pairs with both words in the vocabulary.
    pub coverage: f64,
    pub pairs_used: usize,
}

/// Spearman correlation between human scores and cosine similarity over the
/// pairs whose words are both embedded with nonzero vectors.
pub fn word_similarity(model: &LabeledEmbedding, ds: &SimilarityDataset) -> Result<SimilarityScore> {
    let mut human = Vec::new();
    let mut cosine = Vec::new();
    for (a, b, s) in &ds.pairs {
        let (Some(i), Some(j)) = (model.labels.id(a), model.labels.id(b)) else {
            continue;
        };
        match cosine_similarity(&model.embedding, i, j) {
            Ok(c) => {
                human.push(*s);
                cosine.push(c);
            }
            Err(Error::ZeroRow(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if human.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "{}: only {} pairs covered by the vocabulary",
            ds.name,
            human.len()
        )));
    }
    Ok(SimilarityScore {
        spearman: spearman(&human, &cosine)?,
        coverage: human.len() as f64 / ds.pairs.len() as f64,
        pairs_used: human.len(),
    })
}

/// `sum_c max_label |c ∩ label| / N`.
pub fn purity(clusters: &[usize], truth: &[usize]) -> f64 {
    if clusters.is_empty() {
        return f64::NAN;
    }
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let t = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; k * t];
    for (&c, &l) in clusters.iter().zip(truth) {
        table[c * t + l] += 1;
    }
    let hits: usize = (0..k).map(|c| table[c * t..(c + 1) * t].iter().max().copied().unwrap_or(0)).sum();
    hits as f64 / clusters.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorizationScore {
    /// Best of the two clusterings.
    pub purity: f64,
    pub kmeans_purity: f64,
    pub agglomerative_purity: f64,
    pub coverage: f64,
}

/// Clusters the covered words into as many groups as categories with
/// k-means (on unit rows, averaged over `runs` seeds) and with average-linkage
/// cosine agglomeration, and keeps the better purity.
pub fn concept_categorization(
    model: &LabeledEmbedding,
    ds: &CategorizationDataset,
    runs: usize,
    seed: u64,
) -> Result<CategorizationScore> {
    if runs == 0 {
        return Err(Error::Invalid("runs must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut truth_names = Vec::new();
    for (w, c) in &ds.items {
        if let Some(i) = model.labels.id(w) {
            let norm = model.embedding.row_norm(i);
            if norm > 0.0 {
                rows.push(model.embedding.dense_row(i).into_iter().map(|v| v / norm).collect::<Vec<_>>());
                truth_names.push(c.as_str());
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::NotEnoughData(format!("{}: no word is embedded", ds.name)));
    }
    let mut names: Vec<&str> = truth_names.clone();
    names.sort_unstable();
    names.dedup();
    let truth: Vec<usize> = truth_names.iter().map(|n| names.binary_search(n).expect("present")).collect();
    let k = ds.category_count().min(rows.len());
    let x = Matrix::from_rows(&rows)?;
    let km: Vec<f64> = (0..runs as u64)
        .map(|run| {
            let mut rng = stream_rng(derive(seed, run, super::purpose::CLUSTER), 0);
            Ok(purity(&kmeans(&x, &KMeansConfig::new(k), &mut rng)?.labels, &truth))
        })
        .collect::<Result<_>>()?;
    let kmeans_purity = mean(&km);
    let agglomerative_purity = purity(&average_linkage(&cosine_distances(&x), k)?, &truth);
    Ok(CategorizationScore {
        purity: kmeans_purity.max(agglomerative_purity),
        kmeans_purity,
        agglomerative_purity,
        coverage: rows.len() as f64 / ds.items.len() as f64,
    })
}

/// Mean NMI over all unordered pairs of `runs` Louvain partitions with
/// distinct seeds.
pub fn community_stability(g: &WeightedGraph, cfg: &LouvainConfig, runs: usize) -> Result<EvalReport> {
    if runs < 2 {
        return Err(Error::Invalid("stability needs at least 2 runs".into()));
    }
    let parts: Vec<Partition> = (0..runs as u64)
        .into_par_iter()
        .map(|run| louvain(g, &cfg.seeded(derive(cfg.seed, run, super::purpose::COMMUNITY))))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..runs).flat_map(|i| (i + 1..runs).map(move |j| (i, j))).collect();
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| nmi(&parts[i], &parts[j]))
        .collect::<Result<_>>()?;
    let counts = parts.iter().map(|p| p.community_count() as f64).collect();
    Ok(EvalReport::new("stability", "nmi", scores)
        .model("louvain", Some(cfg.gamma))
        .extra("dimensions", counts)
        .config(cfg))
}

/// Row ids of `b` for each row of `a`, matched by label.
pub fn align(a: &LabeledEmbedding, b: &LabeledEmbedding) -> Vec<Option<usize>> {
    a.labels.labels().iter().map(|l| b.labels.id(l)).collect()
}

/// Neighbor sets of one model, restricted to words shared with the other.
struct SharedNeighbors<'a> {
    index: NeighborIndex<'a>,
    allowed: Vec<bool>,
}

impl SharedNeighbors<'_> {
    fn top(&self, u: usize, n: usize) -> Result<Vec<usize>> {
        let sims = self.index.similarities(u)?;
        let mut cand: Vec<(usize, f64)> = sims
            .into_iter()
            .enumerate()
            .filter(|&(r, _)| r != u && self.allowed[r])
            .collect();
        if cand.len() < n {
            return Err(Error::NotEnoughData(format!("{} candidates for {n} neighbors", cand.len())));
        }
        let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if n < cand.len() {
            cand.select_nth_unstable_by(n, cmp);
            cand.truncate(n);
        }
        Ok(cand.into_iter().map(|c| c.0).collect())
    }
}

/// Pairwise comparison of two models over their shared vocabulary.
pub struct ModelPair<'a> {
    a: SharedNeighbors<'a>,
    b: SharedNeighbors<'a>,
    /// `a` row -> `b` row for shared words.
    a_to_b: Vec<Option<usize>>,
    b_to_a: Vec<Option<usize>>,
}

impl<'a> ModelPair<'a> {
    pub fn new(a: &'a LabeledEmbedding, b: &'a LabeledEmbedding) -> Self {
        let a_to_b = align(a, b);
        let b_to_a = align(b, a);
        Self {
            a: SharedNeighbors {
                index: NeighborIndex::new(&a.embedding),
                allowed: a_to_b.iter().map(Option::is_some).collect(),
            },
            b: SharedNeighbors {
                index: NeighborIndex::new(&b.embedding),
                allowed: b_to_a.iter().map(Option::is_some).collect(),
            },
            a_to_b,
            b_to_a,
        }
    }

    /// Rows of `a` whose word also exists in `b`.
    pub fn shared_rows(&self) -> Vec<usize> {
        (0..self.a_to_b.len()).filter(|&i| self.a_to_b[i].is_some()).collect()
    }

    /// `1 - |nn_a ∩ nn_b| / n` for the word at row `u` of `a`.
    pub fn varnn(&self, u: usize, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Invalid("N must be positive".into()));
        }
        let v = self
            .a_to_b
            .get(u)
            .copied()
            .flatten()
            .ok_or_else(|| Error::OutOfVocabulary(format!("row {u}")))?;
        let na: HashSet<usize> = self.a.top(u, n)?.into_iter().collect();
        let shared = self
            .b
            .top(v, n)?
            .into_iter()
            .filter(|&r| self.b_to_a[r].is_some_and(|x| na.contains(&x)))
            .count();
        Ok(1.0 - shared as f64 / n as f64)
    }
}

/// Proportion of the `n` nearest neighbors of `word` that differ between the
/// two models. Neighbors are taken among the words both models share.
pub fn varnn(a: &LabeledEmbedding, b: &LabeledEmbedding, word: &str, n: usize) -> Result<f64> {
    let u = a.row_of(word)?;
    b.row_of(word)?;
    ModelPair::new(a, b).varnn(u, n)
}

/// Mean varnn over all model pairs and sampled words, for each `N` in
/// `grid`. `sample` limits the words to a seeded random subset of the shared
/// vocabulary.
pub fn mean_varnn(models: &[LabeledEmbedding], grid: &[usize], sample: Option<usize>, seed: u64) -> Result<Vec<(usize, f64)>> {
    if models.len() < 2 {
        return Err(Error::Invalid("mean varnn needs at least 2 models".into()));
    }
    let mut words: Vec<String> = models[0]
        .labels
        .labels()
        .iter()
        .filter(|w| models[1..].iter().all(|m| m.labels.id(w).is_some()))
        .cloned()
        .collect();
    if let Some(k) = sample {
        let mut rng = stream_rng(seed, 0);
        let k = k.min(words.len());
        let idx = rand::seq::index::sample(&mut rng, words.len(), k).into_vec();
        let mut picked: Vec<String> = idx.into_iter().map(|i| words[i].clone()).collect();
        picked.sort();
        words = picked;
    }
    if words.is_empty() {
        return Err(Error::NotEnoughData("models share no word".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|i| (i + 1..models.len()).map(move |j| (i, j)))
        .collect();
    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mp = ModelPair::new(&models[i], &models[j]);
            let rows: Vec<usize> = words.iter().map(|w| models[i].row_of(w)).collect::<Result<_>>()?;
            grid.iter()
                .map(|&n| {
                    let mut total = 0.0;
                    for &u in &rows {
                        total += mp.varnn(u, n)?;
                    }
                    Ok(total / rows.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &n)| (n, per_pair.iter().map(|p| p[g]).sum::<f64>() / per_pair.len() as f64))
        .collect())
}

/// Random sparse model over `labels`, for controls.
pub fn random_model(labels: &crate::graph::NodeLabelMap, dims: usize, density: f64, rng: &mut impl Rng) -> Result<LabeledEmbedding> {
    let rows = (0..labels.len())
        .map(|_| {
            let mut row = Vec::new();
            for d in 0..dims {
                if rng.gen_bool(density) {
                    row.push((d, rng.gen::<f64>() + 1e-3));
                }
            }
            if row.is_empty() {
                row.push((rng.gen_range(0..dims), 1.0));
            }
            row
        })
        .collect();
    LabeledEmbedding::new(SparseEmbedding::from_rows(dims, rows)?, labels.clone())
}
