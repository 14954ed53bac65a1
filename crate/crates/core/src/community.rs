//! Partitions, generalized modularity, multi-resolution Louvain and NMI.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeLabelMap, WeightedGraph};
use crate::seed;

/// Assignment of every node to exactly one community.
///
/// Community ids are contiguous in `0..community_count()` and no community is
/// empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds from arbitrary labels, renumbering communities in order of first
    /// appearance.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (u, &l) in labels.iter().enumerate() {
            let next = remap.len();
            let c = *remap.entry(l).or_insert(next);
            if c == members.len() {
                members.push(Vec::new());
            }
            members[c].push(u);
            assignment.push(c);
        }
        Self { assignment, members }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_assignment(&(0..n).collect::<Vec<_>>())
    }

    pub fn single(n: usize) -> Self {
        Self::from_assignment(&vec![0; n])
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.members.len()
    }

    pub fn community_of(&self, u: usize) -> usize {
        self.assignment[u]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn communities(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LouvainConfig {
    /// Resolution; larger values favor more, smaller communities.
    pub gamma: f64,
    pub seed: u64,
    pub min_modularity_gain: f64,
    pub max_passes: usize,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            seed: 0,
            min_modularity_gain: 1e-6,
            max_passes: 100,
        }
    }
}

impl LouvainConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.max_passes == 0 {
            return Err(Error::Invalid("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generalized modularity `sum_c [ w_c / W - gamma * (s_c / 2W)^2 ]`.
///
/// `W` is the total edge weight, `w_c` the weight inside community `c` and
/// `s_c` the summed weighted degree of its members.
pub fn modularity(g: &WeightedGraph, p: &Partition, gamma: f64) -> Result<f64> {
    if p.node_count() != g.node_count() {
        return Err(Error::SizeMismatch(format!(
            "partition covers {} nodes, graph has {}",
            p.node_count(),
            g.node_count()
        )));
    }
    let w = g.total_weight();
    if w == 0.0 {
        return Ok(0.0);
    }
    let k = p.community_count();
    let mut inside = vec![0.0; k];
    let mut strength = vec![0.0; k];
    for u in 0..g.node_count() {
        let cu = p.community_of(u);
        strength[cu] += g.strengths()[u];
        for (v, wt) in g.edges_of(u) {
            if u < v && p.community_of(v) == cu {
                inside[cu] += wt;
            }
        }
    }
    Ok((0..k)
        .map(|c| inside[c] / w - gamma * (strength[c] / (2.0 * w)).powi(2))
        .sum())
}

/// Louvain result with the modularity reached after each aggregation level.
#[derive(Debug, Clone)]
pub struct LouvainOutcome {
    pub partition: Partition,
    /// Modularity (at the configured resolution) of the flattened partition
    /// after each pass, starting with the singleton partition.
    pub pass_modularity: Vec<f64>,
}

/// Multi-resolution Louvain: greedy local moving and aggregation, flattened to
/// a node-level partition.
pub fn louvain(g: &WeightedGraph, cfg: &LouvainConfig) -> Result<Partition> {
    Ok(louvain_with_trace(g, cfg)?.partition)
}

pub fn louvain_with_trace(g: &WeightedGraph, cfg: &LouvainConfig) -> Result<LouvainOutcome> {
    cfg.validate()?;
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let n = g.node_count();
    let mut node_comm: Vec<usize> = (0..n).collect();
    let total = g.total_weight();
    let mut level = Level::from_graph(g);
    let mut rng = seed::stream_rng(cfg.seed, 0);
    let mut trace = vec![level.modularity(&(0..n).collect::<Vec<_>>(), total, cfg.gamma)];

    if total == 0.0 {
        return Ok(LouvainOutcome {
            partition: Partition::from_assignment(&node_comm),
            pass_modularity: trace,
        });
    }

    for _ in 0..cfg.max_passes {
        let (comm, moved) = level.local_moving(total, cfg, &mut rng);
        if !moved {
            break;
        }
        let (dense, count) = renumber(&comm);
        for c in node_comm.iter_mut() {
            *c = dense[*c];
        }
        let q = level.modularity(&dense, total, cfg.gamma);
        let prev = *trace.last().expect("trace is seeded");
        trace.push(q);
        if count == level.len() || q - prev < cfg.min_modularity_gain {
            break;
        }
        level = level.aggregate(&dense, count);
    }
    Ok(LouvainOutcome {
        partition: Partition::from_assignment(&node_comm),
        pass_modularity: trace,
    })
}

/// Renumbers labels to `0..count` in order of first appearance.
fn renumber(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (out, next)
}

/// Graph at one aggregation level: self-loop weights carry the weight already
/// folded inside a super-node.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    strength: Vec<f64>,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Self {
        let n = g.node_count();
        Self {
            adj: (0..n).map(|u| g.edges_of(u).collect()).collect(),
            self_loops: vec![0.0; n],
            strength: g.strengths().to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn modularity(&self, comm: &[usize], total: f64, gamma: f64) -> f64 {
        let k = comm.iter().copied().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for u in 0..self.len() {
            let c = comm[u];
            tot[c] += self.strength[u];
            inside[c] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                if u < v && comm[v] == c {
                    inside[c] += w;
                }
            }
        }
        (0..k)
            .map(|c| inside[c] / total - gamma * (tot[c] / (2.0 * total)).powi(2))
            .sum()
    }

    /// Repeated sweeps of single-node moves in a seeded random order. Returns
    /// the community of each level node and whether anything moved.
    fn local_moving(
        &self,
        total: f64,
        cfg: &LouvainConfig,
        rng: &mut impl rand::Rng,
    ) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        let two_w = 2.0 * total;
        let mut q = self.modularity(&comm, total, cfg.gamma);

        loop {
            let mut moves = 0usize;
            for &u in &order {
                let cu = comm[u];
                let ku = self.strength[u];
                for &(v, w) in &self.adj[u] {
                    let cv = comm[v];
                    if link[cv] == 0.0 {
                        touched.push(cv);
                    }
                    link[cv] += w;
                }
                tot[cu] -= ku;
                // Gain of joining c, up to a common positive factor.
                let gain = |c: usize, link_c: f64| link_c - cfg.gamma * tot[c] * ku / two_w;
                let mut best = cu;
                let mut best_gain = gain(cu, link[cu]);
                for &c in &touched {
                    if c == cu {
                        continue;
                    }
                    let g = gain(c, link[c]);
                    let tie = (g - best_gain).abs() <= 1e-12 * (1.0 + best_gain.abs());
                    if (g > best_gain && !tie) || (tie && best != cu && c < best) {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ku;
                if best != cu {
                    comm[u] = best;
                    moves += 1;
                }
                for &c in &touched {
                    link[c] = 0.0;
                }
                touched.clear();
            }
            if moves == 0 {
                break;
            }
            moved_any = true;
            let next_q = self.modularity(&comm, total, cfg.gamma);
            let gained = next_q - q;
            q = next_q;
            if gained < cfg.min_modularity_gain {
                break;
            }
        }
        (comm, moved_any)
    }

    /// Collapses each community to one node.
    fn aggregate(&self, comm: &[usize], count: usize) -> Level {
        let mut self_loops = vec![0.0; count];
        let mut strength = vec![0.0; count];
        let mut maps: Vec<HashMap<usize, f64>> = vec![HashMap::new(); count];
        for u in 0..self.len() {
            let cu = comm[u];
            strength[cu] += self.strength[u];
            self_loops[cu] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                let cv = comm[v];
                if cu == cv {
                    // Seen from both endpoints.
                    self_loops[cu] += w / 2.0;
                } else {
                    *maps[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                let mut v: Vec<(usize, f64)> = m.into_iter().collect();
                v.sort_unstable_by_key(|e| e.0);
                v
            })
            .collect();
        Level {
            adj,
            self_loops,
            strength,
        }
    }
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization,
/// `2 I(A;B) / (H(A) + H(B))`.
///
/// Two single-community partitions are identical and score 1; a single
/// community against anything else scores 0.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.node_count() != b.node_count() {
        return Err(Error::SizeMismatch(format!(
            "partitions cover {} and {} nodes",
            a.node_count(),
            b.node_count()
        )));
    }
    let n = a.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let nf = n as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for u in 0..n {
        *joint.entry((a.community_of(u), b.community_of(u))).or_insert(0) += 1;
    }
    let ha = entropy(a.sizes().into_iter(), nf);
    let hb = entropy(b.sizes().into_iter(), nf);
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let sa = a.sizes();
    let sb = b.sizes();
    let mut keys: Vec<_> = joint.into_iter().collect();
    keys.sort_unstable();
    let mi: f64 = keys
        .into_iter()
        .map(|((ca, cb), c)| {
            let pxy = c as f64 / nf;
            pxy * (pxy * nf * nf / (sa[ca] as f64 * sb[cb] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// Writes `label<TAB>community`, one node per line in id order.
pub fn write_partition(p: &Partition, labels: &NodeLabelMap, mut out: impl Write) -> Result<()> {
    for u in 0..p.node_count() {
        writeln!(out, "{}\t{}", labels.label(u), p.community_of(u))?;
    }
    Ok(())
}

pub fn save_partition(p: &Partition, labels: &NodeLabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_partition(p, labels, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a partition for the nodes of `labels`; every node must be listed.
pub fn parse_partition(reader: impl BufRead, labels: &NodeLabelMap) -> Result<Partition> {
    let mut raw = vec![None; labels.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split('\t');
        let (Some(label), Some(comm), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(lineno, "expected `label<TAB>community`"));
        };
        let comm: usize = comm
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad community id {comm:?}")))?;
        let id = labels
            .id(label)
            .ok_or_else(|| Error::parse(lineno, format!("unknown node {label:?}")))?;
        raw[id] = Some(comm);
    }
    let assignment: Vec<usize> = raw
        .into_iter()
        .enumerate()
        .map(|(u, c)| c.ok_or_else(|| Error::Invalid(format!("node {:?} has no community", labels.label(u)))))
        .collect::<Result<_>>()?;
    Ok(Partition::from_assignment(&assignment))
}

pub fn load_partition(path: impl AsRef<Path>, labels: &NodeLabelMap) -> Result<Partition> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_partition(BufReader::new(file), labels)
}
