//! Train/test splits for link prediction and node-level tasks.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::seed;

#[derive(Debug, Clone)]
pub struct LinkPredSplit {
    /// The input graph without the test edges.
    pub train: WeightedGraph,
    /// Edges remaining in `train`, as `(u, v)` with `u < v`.
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Mutable adjacency used while peeling off test edges.
struct Peeler {
    adj: Vec<Vec<usize>>,
    mark: Vec<u32>,
    stamp: u32,
    queue: VecDeque<usize>,
}

impl Peeler {
    fn remove(&mut self, u: usize, v: usize) {
        let i = self.adj[u].iter().position(|&x| x == v).expect("edge present");
        self.adj[u].swap_remove(i);
        let j = self.adj[v].iter().position(|&x| x == u).expect("edge present");
        self.adj[v].swap_remove(j);
    }

    fn connected(&mut self, s: usize, t: usize) -> bool {
        self.stamp += 1;
        self.queue.clear();
        self.queue.push_back(s);
        self.mark[s] = self.stamp;
        while let Some(x) = self.queue.pop_front() {
            for &y in &self.adj[x] {
                if y == t {
                    return true;
                }
                if self.mark[y] != self.stamp {
                    self.mark[y] = self.stamp;
                    self.queue.push_back(y);
                }
            }
        }
        false
    }
}

/// Removes `floor(test_fraction * m)` edges chosen at random among those
/// whose removal keeps their endpoints connected, then draws as many
/// non-edges for each side as there are positives (fewer only if the graph
/// is too dense to supply them).
pub fn make_linkpred_split(g: &WeightedGraph, test_fraction: f64, seed_value: u64) -> Result<LinkPredSplit> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Invalid(format!("test fraction must be in [0, 1), got {test_fraction}")));
    }
    let n = g.node_count();
    let mut edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let wanted = (test_fraction * edges.len() as f64).floor() as usize;
    let mut rng = seed::stream_rng(seed_value, 0);
    edges.shuffle(&mut rng);

    let mut peeler = Peeler {
        adj: (0..n).map(|u| g.neighbors(u).to_vec()).collect(),
        mark: vec![0; n],
        stamp: 0,
        queue: VecDeque::new(),
    };
    let mut is_test = vec![false; edges.len()];
    let mut taken = 0;
    for (i, &(u, v, _)) in edges.iter().enumerate() {
        if taken == wanted {
            break;
        }
        if peeler.adj[u].len() < 2 || peeler.adj[v].len() < 2 {
            continue;
        }
        peeler.remove(u, v);
        if peeler.connected(u, v) {
            is_test[i] = true;
            taken += 1;
        } else {
            peeler.adj[u].push(v);
            peeler.adj[v].push(u);
        }
    }
    if taken < wanted {
        return Err(Error::SplitUnreachable {
            achieved: taken as f64 / edges.len().max(1) as f64,
            wanted: test_fraction,
        });
    }

    let mut b = GraphBuilder::with_capacity(n, edges.len() - taken);
    let mut train_pos = Vec::with_capacity(edges.len() - taken);
    let mut test_pos = Vec::with_capacity(taken);
    for (&(u, v, w), &t) in edges.iter().zip(&is_test) {
        if t {
            test_pos.push((u, v));
        } else {
            b.add_edge(u, v, w)?;
            train_pos.push((u, v));
        }
    }
    let train = b.build();

    // Balanced whenever the graph has enough non-edges; test pairs first.
    let available = n * n.saturating_sub(1) / 2 - g.edge_count();
    let n_test_neg = test_pos.len().min(available);
    let n_train_neg = train_pos.len().min(available - n_test_neg);
    let mut neg_rng = seed::stream_rng(seed_value, 1);
    let mut negatives = sample_non_edges(g, n_train_neg + n_test_neg, &mut neg_rng)?;
    let test_neg = negatives.split_off(n_train_neg);
    Ok(LinkPredSplit {
        train,
        train_pos,
        test_pos,
        train_neg: negatives,
        test_neg,
        seed: seed_value,
    })
}

/// Distinct uniformly drawn pairs `(u, v)`, `u < v`, that are not edges of `g`.
pub fn sample_non_edges(g: &WeightedGraph, count: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let pairs = n * n.saturating_sub(1) / 2;
    let available = pairs - g.edge_count();
    if count > available {
        return Err(Error::NotEnoughData(format!(
            "{count} negative pairs requested, only {available} non-edges exist"
        )));
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if !g.has_edge(pair.0, pair.1) && seen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

/// Random split of `0..n` into a training part of `round(train_fraction * n)`
/// items and the rest.
pub fn node_split(n: usize, train_fraction: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let cut = ((train_fraction * n as f64).round() as usize).min(n);
    let test = idx.split_off(cut);
    (idx, test)
}

/// Like [`node_split`], redrawn until every class occurs in the training part.
pub fn stratified_enough_split(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    for _ in 0..100 {
        let (train, test) = node_split(labels.len(), train_fraction, rng);
        let mut present = vec![false; n_classes];
        for &i in &train {
            present[labels[i]] = true;
        }
        if present.iter().all(|&p| p) {
            return Ok((train, test));
        }
    }
    Err(Error::NotEnoughData(
        "no split with every class in the training part after 100 draws".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn complete(n: usize) -> WeightedGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j));
            }
        }
        WeightedGraph::from_edges(n, e)
    }

    #[test]
    fn tree_cannot_be_split() {
        let g = WeightedGraph::from_edges(11, (0..10).map(|i| (i, i + 1)));
        assert!(matches!(make_linkpred_split(&g, 0.2, 1), Err(Error::SplitUnreachable { .. })));
    }

    #[test]
    fn k5_split() {
        let s = make_linkpred_split(&complete(5), 0.2, 3).unwrap();
        assert_eq!(s.test_pos.len(), 2);
        assert_eq!(s.train.edge_count(), 8);
        assert!(s.train.is_connected());
        assert_eq!(s.train_neg.len(), 0);
    }

    #[test]
    fn random_graph_split_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 120;
        let mut b = GraphBuilder::new(n);
        for u in 1..n {
            b.add_edge(u, rng.gen_range(0..u), 1.0).unwrap();
        }
        for _ in 0..300 {
            let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
            b.add_edge(u, v, 1.0).unwrap();
        }
        let g = b.build();
        let s = make_linkpred_split(&g, 0.2, 5).unwrap();
        assert_eq!(s.test_pos.len(), g.edge_count() / 5);
        assert!(s.train.is_connected());
        assert_eq!(s.train.node_count(), n);
        for &(u, v) in &s.test_pos {
            assert!(g.has_edge(u, v) && !s.train.has_edge(u, v));
        }
        let mut all: HashSet<(usize, usize)> = HashSet::new();
        for &(u, v) in s.train_neg.iter().chain(&s.test_neg) {
            assert!(u < v && !g.has_edge(u, v));
            assert!(all.insert((u, v)));
        }
        assert_eq!(s.train_neg.len(), s.train_pos.len());
        assert_eq!(s.test_neg.len(), s.test_pos.len());

        let again = make_linkpred_split(&g, 0.2, 5).unwrap();
        assert_eq!(again.test_pos, s.test_pos);
        assert_eq!(again.test_neg, s.test_neg);
    }

    #[test]
    fn every_class_in_train() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i == 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (train, test) = stratified_enough_split(&labels, 2, 0.8, &mut rng).unwrap();
        assert_eq!(train.len() + test.len(), 50);
        assert!(train.contains(&0));
    }
}
