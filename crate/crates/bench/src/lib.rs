//! Synthetic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinr_core::WeightedGraph;

/// `blocks` planted communities of `size` nodes; each node draws `degree`
/// neighbors, a share `p_in` of them inside its own block.
pub fn planted_graph(blocks: usize, size: usize, degree: usize, p_in: f64, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks * size;
    let mut edges = Vec::with_capacity(n * degree);
    for u in 0..n {
        for _ in 0..degree {
            let v = if rng.gen_bool(p_in) {
                (u / size) * size + rng.gen_range(0..size)
            } else {
                rng.gen_range(0..n)
            };
            if u != v {
                edges.push((u, v));
            }
        }
    }
    WeightedGraph::from_edges(n, edges)
}

/// Sentences over a Zipf-like vocabulary of `vocab` words, with topical
/// bursts so that co-occurrence is not uniform.
pub fn synthetic_corpus(sentences: usize, length: usize, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i:05}")).collect();
    let topics = 20.max(vocab / 50);
    (0..sentences)
        .map(|_| {
            let topic = rng.gen_range(0..topics);
            (0..length)
                .map(|_| {
                    let r: f64 = rng.gen();
                    let i = if rng.gen_bool(0.5) {
                        ((vocab as f64).powf(r) as usize).saturating_sub(1)
                    } else {
                        (topic * vocab / topics + rng.gen_range(0..vocab / topics)).min(vocab - 1)
                    };
                    words[i].clone()
                })
                .collect()
        })
        .collect()
}
