//! Graph-level protocols: link prediction, structural regressions, spectral
//! clustering and vertex classification.

use serde::{Deserialize, Serialize};

use super::features::{hadamard_matrix, heuristic_matrix};
use super::split::{make_linkpred_split, node_split, stratified_enough_split};
use super::{purpose, run_all, EmbedderSpec, EvalReport};
use crate::community::{nmi, Partition};
use crate::embed::SparseEmbedding;
use crate::error::{Error, Result};
use crate::graph::{clustering_coefficients, pagerank, WeightedGraph};
use crate::learn::ols::LinearModel;
use crate::learn::spectral::spectral_clustering;
use crate::learn::{Classifier, ClassifierSpec, Matrix};
use crate::seed::{derive, stream_rng};
use crate::stats::{accuracy, r_squared};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub runs: usize,
    pub seed: u64,
    /// Share of edges held out for link prediction.
    pub test_fraction: f64,
    /// Share of nodes used for training in node-level tasks.
    pub train_fraction: f64,
    pub classifier: ClassifierSpec,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            runs: 50,
            seed: 0,
            test_fraction: 0.2,
            train_fraction: 0.8,
            classifier: ClassifierSpec::default(),
        }
    }
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Invalid("runs must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Invalid("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    embedder: &'a EmbedderSpec,
    protocol: &'a ProtocolConfig,
}

fn finish(report: EvalReport, spec: &EmbedderSpec, cfg: &ProtocolConfig) -> EvalReport {
    report.model(spec.name(), spec.gamma()).config(&Snapshot {
        embedder: spec,
        protocol: cfg,
    })
}

fn node_embedding(spec: &EmbedderSpec, g: &WeightedGraph, seed: u64, run: u64) -> Result<(Partition, SparseEmbedding)> {
    spec.embed(g, seed, run)?
        .ok_or_else(|| Error::Invalid(format!("{} has no node representation for this task", spec.name())))
}

fn densify(e: &SparseEmbedding, rows: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(rows.len(), e.cols());
    for (i, &r) in rows.iter().enumerate() {
        for (d, v) in e.row(r) {
            m.set(i, d, v);
        }
    }
    m
}

/// Balanced held-out accuracy of a pair classifier, retraining the embedding
/// on each split's training graph.
pub fn run_link_prediction(g: &WeightedGraph, spec: &EmbedderSpec, cfg: &ProtocolConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let per_run = run_all(cfg.runs, |run| {
        let split = make_linkpred_split(g, cfg.test_fraction, derive(cfg.seed, run, purpose::SPLIT))?;
        let train_pairs: Vec<(usize, usize)> = split.train_pos.iter().chain(&split.train_neg).copied().collect();
        let test_pairs: Vec<(usize, usize)> = split.test_pos.iter().chain(&split.test_neg).copied().collect();
        let y_train: Vec<usize> = (0..train_pairs.len()).map(|i| usize::from(i < split.train_pos.len())).collect();
        let y_test: Vec<usize> = (0..test_pairs.len()).map(|i| usize::from(i < split.test_pos.len())).collect();
        let (x_train, x_test, dims) = match spec.embed(&split.train, cfg.seed, run)? {
            Some((p, e)) => (
                hadamard_matrix(&e, &train_pairs)?,
                hadamard_matrix(&e, &test_pairs)?,
                p.community_count(),
            ),
            None => (
                heuristic_matrix(&split.train, &train_pairs)?,
                heuristic_matrix(&split.train, &test_pairs)?,
                5,
            ),
        };
        let model = Classifier::fit(&cfg.classifier, &x_train, &y_train, 2)?;
        Ok((accuracy(&y_test, &model.predict(&x_test)), dims as f64))
    })?;
    let (acc, dims) = per_run.into_iter().unzip();
    Ok(finish(EvalReport::new("linkpred", "accuracy", acc).extra("dimensions", dims), spec, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTarget {
    Degree,
    ClusteringCoefficient,
    PageRank,
}

impl NodeTarget {
    pub fn task_name(self) -> &'static str {
        match self {
            Self::Degree => "degree",
            Self::ClusteringCoefficient => "clustcoef",
            Self::PageRank => "pagerank",
        }
    }

    pub fn values(self, g: &WeightedGraph) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Degree => g.degrees().into_iter().map(|d| d as f64).collect(),
            Self::ClusteringCoefficient => clustering_coefficients(g),
            Self::PageRank => pagerank(g, 0.85, 1e-10, 10_000)?,
        })
    }
}

/// Held-out R² of a least-squares fit from embedding rows to a per-node
/// structural target.
pub fn run_regression(
    g: &WeightedGraph,
    spec: &EmbedderSpec,
    target: NodeTarget,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let y = target.values(g)?;
    let per_run = run_all(cfg.runs, |run| {
        let (p, e) = node_embedding(spec, g, cfg.seed, run)?;
        let mut rng = stream_rng(derive(cfg.seed, run, purpose::SPLIT), 0);
        let (train, test) = node_split(g.node_count(), cfg.train_fraction, &mut rng);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let model = LinearModel::fit(&densify(&e, &train), &y_train)?;
        let r2 = r_squared(&y_test, &model.predict(&densify(&e, &test)))?;
        Ok((r2, p.community_count() as f64, model.ridge))
    })?;
    let ridge = per_run.iter().filter(|r| r.2).count();
    let mut report = EvalReport::new(target.task_name(), "r2", per_run.iter().map(|r| r.0).collect())
        .extra("dimensions", per_run.iter().map(|r| r.1).collect());
    if ridge > 0 {
        report.note(format!(
            "singular design in {ridge} of {} runs; ridge penalty {} applied",
            cfg.runs,
            crate::learn::ols::RIDGE_FALLBACK
        ));
    }
    Ok(finish(report, spec, cfg))
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

/// NMI between the ground truth and spectral clusters of the embedding,
/// with as many clusters as classes.
pub fn run_spectral_clustering(
    g: &WeightedGraph,
    spec: &EmbedderSpec,
    labels: &[usize],
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    check_label_count(g, labels)?;
    let truth = Partition::from_assignment(labels);
    let k = truth.community_count();
    let per_run = run_all(cfg.runs, |run| {
        let (p, e) = node_embedding(spec, g, cfg.seed, run)?;
        let mut rng = stream_rng(derive(cfg.seed, run, purpose::CLUSTER), 0);
        let sc = spectral_clustering(&e, k, None, &mut rng)?;
        let score = nmi(&truth, &Partition::from_assignment(&sc.labels))?;
        Ok((score, p.community_count() as f64, sc.floor_added, sc.dense))
    })?;
    let mut report = EvalReport::new("spectral", "nmi", per_run.iter().map(|r| r.0).collect())
        .extra("dimensions", per_run.iter().map(|r| r.1).collect());
    if per_run.iter().any(|r| r.2) {
        report.note("disconnected affinity graph; uniform affinity floor added");
    }
    if per_run.iter().any(|r| r.3) {
        report.note("embedding rank below cluster count; dense eigendecomposition used");
    }
    Ok(finish(report, spec, cfg))
}

fn check_label_count(g: &WeightedGraph, labels: &[usize]) -> Result<()> {
    if labels.len() != g.node_count() {
        return Err(Error::SizeMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.node_count()
        )));
    }
    Ok(())
}

/// Held-out accuracy of a node classifier on embedding rows. The embedding
/// is trained once per run on the whole graph.
pub fn run_classification(
    g: &WeightedGraph,
    spec: &EmbedderSpec,
    labels: &[usize],
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    check_label_count(g, labels)?;
    let n_classes = class_count(labels).max(2);
    let per_run = run_all(cfg.runs, |run| {
        let (p, e) = node_embedding(spec, g, cfg.seed, run)?;
        let mut rng = stream_rng(derive(cfg.seed, run, purpose::SPLIT), 0);
        let (train, test) = stratified_enough_split(labels, class_count(labels), cfg.train_fraction, &mut rng)?;
        let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let model = Classifier::fit(&cfg.classifier, &densify(&e, &train), &y_train, n_classes)?;
        Ok((accuracy(&y_test, &model.predict(&densify(&e, &test))), p.community_count() as f64))
    })?;
    let (acc, dims) = per_run.into_iter().unzip();
    Ok(finish(EvalReport::new("classify", "accuracy", acc).extra("dimensions", dims), spec, cfg))
}

/// Community counts of `runs` seeded Louvain runs.
pub fn dimension_counts(g: &WeightedGraph, gamma: f64, runs: usize, seed: u64) -> Result<EvalReport> {
    let spec = EmbedderSpec::nr(gamma);
    let EmbedderSpec::Nr { louvain: base } = spec else { unreachable!() };
    let counts = run_all(runs, |run| {
        let p = crate::community::louvain(g, &base.seeded(derive(seed, run, purpose::COMMUNITY)))?;
        Ok(p.community_count() as f64)
    })?;
    Ok(EvalReport::new("dimensions", "communities", counts)
        .model("louvain", Some(gamma))
        .config(&base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::learn::logreg::LogRegConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Planted partition: `blocks` groups of `size` nodes, dense inside.
    fn planted(blocks: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> (WeightedGraph, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = blocks * size;
        let mut b = GraphBuilder::new(n);
        for u in 0..n {
            for v in u + 1..n {
                let p = if u / size == v / size { p_in } else { p_out };
                if rng.gen_bool(p) {
                    b.add_edge(u, v, 1.0).unwrap();
                }
            }
        }
        let g = b.build();
        let lcc = crate::graph::largest_connected_component(&g).unwrap();
        let labels = lcc.new_to_old.iter().map(|&u| u / size).collect();
        (lcc.graph, labels)
    }

    fn quick(runs: usize) -> ProtocolConfig {
        ProtocolConfig {
            runs,
            seed: 1,
            classifier: ClassifierSpec::Gbdt(crate::learn::gbdt::GbdtConfig {
                rounds: 20,
                ..Default::default()
            }),
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn link_prediction_beats_chance_on_planted_graph() {
        let (g, _) = planted(4, 25, 0.3, 0.01, 2);
        for spec in [EmbedderSpec::nr(1.0), EmbedderSpec::Heuristics] {
            let r = run_link_prediction(&g, &spec, &quick(3)).unwrap();
            assert_eq!(r.values.len(), 3);
            assert!(r.is_consistent());
            assert!(r.mean > 0.7, "{}: {}", spec.name(), r.mean);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let (g, _) = planted(3, 20, 0.3, 0.02, 3);
        let a = run_link_prediction(&g, &EmbedderSpec::nr(1.0), &quick(2)).unwrap();
        let b = run_link_prediction(&g, &EmbedderSpec::nr(1.0), &quick(2)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn regression_targets() {
        let (g, _) = planted(4, 25, 0.3, 0.01, 4);
        for t in [NodeTarget::Degree, NodeTarget::ClusteringCoefficient, NodeTarget::PageRank] {
            let r = run_regression(&g, &EmbedderSpec::nr(1.0), t, &quick(2)).unwrap();
            assert!(r.values.iter().all(|v| v.is_finite()));
            assert!(!r.notes.is_empty(), "row-stochastic design must trigger the ridge note");
        }
        assert!(run_regression(&g, &EmbedderSpec::Heuristics, NodeTarget::Degree, &quick(1)).is_err());
    }

    #[test]
    fn planted_blocks_are_clustered_and_classified() {
        let (g, labels) = planted(4, 30, 0.4, 0.005, 5);
        let spec = EmbedderSpec::nr(1.0);
        let r = run_spectral_clustering(&g, &spec, &labels, &quick(2)).unwrap();
        assert!(r.mean > 0.9, "{}", r.mean);
        let r = run_classification(&g, &spec, &labels, &quick(2)).unwrap();
        assert!(r.mean > 0.9, "{}", r.mean);
        let lr = ProtocolConfig {
            classifier: ClassifierSpec::Logistic(LogRegConfig::default()),
            ..quick(1)
        };
        let r = run_classification(&g, &spec, &labels, &lr).unwrap();
        assert!(r.mean > 0.9, "{}", r.mean);
    }

    #[test]
    fn shuffled_labels_fall_to_chance() {
        let (g, labels) = planted(4, 30, 0.4, 0.005, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut shuffled = labels.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let r = run_classification(&g, &EmbedderSpec::nr(1.0), &shuffled, &quick(4)).unwrap();
        assert!(r.mean < 0.45, "{}", r.mean);
    }

    #[test]
    fn dimension_count_report() {
        let (g, _) = planted(4, 25, 0.4, 0.005, 7);
        let r = dimension_counts(&g, 1.0, 5, 0).unwrap();
        assert_eq!(r.values, vec![4.0; 5]);
    }
}
