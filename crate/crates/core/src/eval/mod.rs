//! Evaluation protocols for graph and word embeddings.

pub mod datasets;
pub mod features;
pub mod graph;
pub mod report;
pub mod split;
pub mod word;

use serde::{Deserialize, Serialize};

use crate::community::{louvain, LouvainConfig, Partition};
use crate::embed::{sinr_mf, sinr_nr, MfConfig, SparseEmbedding};
use crate::error::Result;
use crate::graph::WeightedGraph;

pub use report::EvalReport;

/// Purposes mixed into [`crate::seed::derive`] so each random step of a run
/// draws from its own stream.
pub(crate) mod purpose {
    pub const SPLIT: u64 = 1;
    pub const COMMUNITY: u64 = 2;
    pub const FACTORIZE: u64 = 3;
    pub const CLUSTER: u64 = 4;
}

/// How node representations are produced for a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    /// Louvain partition, then node recall.
    Nr { louvain: LouvainConfig },
    /// Louvain partition, then the factorization.
    Mf { louvain: LouvainConfig, mf: MfConfig },
    /// Closed-form pair scores; only meaningful for link prediction.
    Heuristics,
}

impl EmbedderSpec {
    pub fn nr(gamma: f64) -> Self {
        Self::Nr {
            louvain: LouvainConfig::with_gamma(gamma),
        }
    }

    pub fn mf(gamma: f64, mf: MfConfig) -> Self {
        Self::Mf {
            louvain: LouvainConfig::with_gamma(gamma),
            mf,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nr { .. } => "sinr-nr",
            Self::Mf { .. } => "sinr-mf",
            Self::Heuristics => "heuristics",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Self::Nr { louvain } | Self::Mf { louvain, .. } => Some(louvain.gamma),
            Self::Heuristics => None,
        }
    }

    /// Detects communities and embeds `g`, with all randomness derived from
    /// `(seed, run)`. Heuristics have no embedding and yield `None`.
    pub fn embed(&self, g: &WeightedGraph, seed: u64, run: u64) -> Result<Option<(Partition, SparseEmbedding)>> {
        let community_seed = crate::seed::derive(seed, run, purpose::COMMUNITY);
        match self {
            Self::Nr { louvain: cfg } => {
                let p = louvain(g, &cfg.seeded(community_seed))?;
                let e = sinr_nr(g, &p)?;
                Ok(Some((p, e)))
            }
            Self::Mf { louvain: cfg, mf } => {
                let p = louvain(g, &cfg.seeded(community_seed))?;
                let mf = MfConfig {
                    seed: crate::seed::derive(seed, run, purpose::FACTORIZE),
                    ..*mf
                };
                let e = sinr_mf(g, &p, &mf)?.embedding;
                Ok(Some((p, e)))
            }
            Self::Heuristics => Ok(None),
        }
    }
}

/// Runs `f(run)` for every run, in parallel, keeping run order.
pub(crate) fn run_all<T: Send>(runs: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..runs as u64).into_par_iter().map(|r| f(r)).collect()
}
