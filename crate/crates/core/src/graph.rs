//! Undirected weighted graphs in compressed sparse row form.
//!
//! A [`WeightedGraph`] is immutable once built. Every undirected edge is stored
//! twice (once per endpoint), neighbor lists are sorted by id, and there are no
//! self-loops or zero weights. [`GraphBuilder`] is the only way in: it merges
//! duplicate edges by summing their weights.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    strengths: Vec<f64>,
    total_weight: f64,
}

/// Accumulates undirected edges and produces a [`WeightedGraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, edges: usize) -> Self {
        Self {
            n,
            edges: Vec::with_capacity(edges),
        }
    }

    /// Grows the node count so that `u` is a valid id.
    pub fn ensure_node(&mut self, u: usize) {
        if u >= self.n {
            self.n = u + 1;
        }
    }

    /// Adds weight `w` to the edge `{u, v}`. Self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Invalid(format!(
                "edge ({u}, {v}) has weight {w}; weights must be finite and nonnegative"
            )));
        }
        self.ensure_node(u.max(v));
        if u != v && w > 0.0 {
            self.edges.push((u.min(v), u.max(v), w));
        }
        Ok(())
    }

    pub fn build(mut self) -> WeightedGraph {
        self.edges
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.edges.len());
        for (u, v, w) in self.edges {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }
        WeightedGraph::from_unique_edges(self.n, &merged)
    }
}

impl WeightedGraph {
    /// Builds from `(u, v, w)` triples with `u < v`, sorted and unique.
    fn from_unique_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v, _) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for u in 0..n {
            offsets[u + 1] = offsets[u] + degree[u];
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut weights = vec![0.0f64; offsets[n]];
        // Edges sorted by (u, v) with u < v: pushing v into u's list and u into
        // v's list in this order leaves every list sorted.
        for &(u, v, w) in edges {
            neighbors[cursor[v]] = u;
            weights[cursor[v]] = w;
            cursor[v] += 1;
        }
        for &(u, v, w) in edges {
            neighbors[cursor[u]] = v;
            weights[cursor[u]] = w;
            cursor[u] += 1;
        }
        let strengths: Vec<f64> = (0..n)
            .map(|u| weights[offsets[u]..offsets[u + 1]].iter().sum())
            .collect();
        let total_weight = edges.iter().map(|e| e.2).sum();
        Self {
            offsets,
            neighbors,
            weights,
            strengths,
            total_weight,
        }
    }

    /// Unit-weight graph from an edge list.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut b = GraphBuilder::new(n);
        for (u, v) in edges {
            b.add_edge(u, v, 1.0).expect("unit weight is valid");
        }
        b.build()
    }

    pub fn from_weighted_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut b = GraphBuilder::new(n);
        for (u, v, w) in edges {
            b.add_edge(u, v, w)?;
        }
        Ok(b.build())
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sum of edge weights, each undirected edge counted once.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_empty(&self) -> bool {
        self.node_count() == 0
    }

    /// Sorted neighbor ids of `u`. Panics if `u` is out of range.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Weights aligned with [`Self::neighbors`].
    pub fn neighbor_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn edges_of(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors(u)
            .iter()
            .copied()
            .zip(self.neighbor_weights(u).iter().copied())
    }

    /// Every undirected edge once, as `(u, v, w)` with `u < v`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.edges_of(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let nbrs = self.neighbors(u);
        nbrs.binary_search(&v)
            .ok()
            .map(|i| self.neighbor_weights(u)[i])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && v < self.node_count() && self.neighbors(u).binary_search(&v).is_ok()
    }

    fn check(&self, u: usize) -> Result<()> {
        if u < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: u,
                n: self.node_count(),
            })
        }
    }

    /// Number of neighbors of `u`.
    pub fn degree(&self, u: usize) -> Result<usize> {
        self.check(u)?;
        Ok(self.offsets[u + 1] - self.offsets[u])
    }

    /// Sum of the weights of the edges incident to `u`.
    pub fn weighted_degree(&self, u: usize) -> Result<f64> {
        self.check(u)?;
        Ok(self.strengths[u])
    }

    /// Weighted degrees of all nodes, indexed by id.
    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Induced subgraph on `nodes` (old ids, any order). New id `i` is `nodes[i]`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> WeightedGraph {
        let mut remap = vec![usize::MAX; self.node_count()];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new;
        }
        let mut b = GraphBuilder::new(nodes.len());
        for (new_u, &old_u) in nodes.iter().enumerate() {
            for (old_v, w) in self.edges_of(old_u) {
                let new_v = remap[old_v];
                if new_v != usize::MAX && new_u < new_v {
                    b.edges.push((new_u, new_v, w));
                }
            }
        }
        b.build()
    }

    /// Connected component label of each node, labels assigned in order of the
    /// smallest node id of each component.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn component_count(&self) -> usize {
        self.component_labels().1
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.component_count() == 1
    }
}

/// Result of [`largest_connected_component`].
#[derive(Debug, Clone)]
pub struct Component {
    pub graph: WeightedGraph,
    /// `old_to_new[old]` is the new id, or `None` for dropped nodes.
    pub old_to_new: Vec<Option<usize>>,
    /// `new_to_old[new]` is the original id; increasing.
    pub new_to_old: Vec<usize>,
}

impl Component {
    pub fn is_identity(&self) -> bool {
        self.new_to_old.len() == self.old_to_new.len()
    }
}

/// Extracts the largest connected component. Ties go to the component holding
/// the smallest node id. New ids preserve the relative order of old ids.
pub fn largest_connected_component(g: &WeightedGraph) -> Result<Component> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let (label, count) = g.component_labels();
    let mut sizes = vec![0usize; count];
    for &l in &label {
        sizes[l] += 1;
    }
    // max_by_key returns the last maximum; iterate in reverse to keep the first.
    let best = (0..count)
        .rev()
        .max_by_key(|&c| sizes[c])
        .expect("nonempty graph has a component");
    let new_to_old: Vec<usize> = (0..g.node_count()).filter(|&u| label[u] == best).collect();
    let mut old_to_new = vec![None; g.node_count()];
    for (new, &old) in new_to_old.iter().enumerate() {
        old_to_new[old] = Some(new);
    }
    let graph = if new_to_old.len() == g.node_count() {
        g.clone()
    } else {
        g.induced_subgraph(&new_to_old)
    };
    Ok(Component {
        graph,
        old_to_new,
        new_to_old,
    })
}

/// Local clustering coefficient of `u` on the unweighted skeleton.
///
/// `2 * links among N(u) / (d(u) * (d(u) - 1))`, and 0 when `d(u) < 2`.
pub fn clustering_coefficient(g: &WeightedGraph, u: usize) -> Result<f64> {
    let d = g.degree(u)?;
    if d < 2 {
        return Ok(0.0);
    }
    let nbrs = g.neighbors(u);
    let mut links = 0usize;
    for &v in nbrs {
        links += sorted_intersection_count(nbrs, g.neighbors(v));
    }
    // Each link among neighbors was seen from both ends.
    Ok(links as f64 / (d * (d - 1)) as f64)
}

/// Clustering coefficients of all nodes.
pub fn clustering_coefficients(g: &WeightedGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut mark = vec![false; n];
    let mut out = vec![0.0; n];
    for u in 0..n {
        let nbrs = g.neighbors(u);
        let d = nbrs.len();
        if d < 2 {
            continue;
        }
        for &v in nbrs {
            mark[v] = true;
        }
        let mut links = 0usize;
        for &v in nbrs {
            links += g.neighbors(v).iter().filter(|&&z| mark[z]).count();
        }
        for &v in nbrs {
            mark[v] = false;
        }
        out[u] = links as f64 / (d * (d - 1)) as f64;
    }
    out
}

pub(crate) fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Power-iteration PageRank on the weighted transition matrix.
///
/// Iterates `x' = (1 - d)/n + d * P^T x` (plus uniform redistribution of the
/// mass held by nodes without edges) until the L1 change drops below `tol`.
pub fn pagerank(g: &WeightedGraph, damping: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::Invalid(format!("damping must be in (0, 1), got {damping}")));
    }
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        pagerank_step(g, damping, &x, &mut next);
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            return Ok(x);
        }
    }
    Err(Error::PageRankNotConverged {
        iterations: max_iter,
        residual,
        last_iterate: x,
    })
}

/// One PageRank update from `x` into `out`.
pub fn pagerank_step(g: &WeightedGraph, damping: f64, x: &[f64], out: &mut [f64]) {
    let n = g.node_count();
    let nf = n as f64;
    let strengths = g.strengths();
    let dangling: f64 = (0..n).filter(|&u| strengths[u] == 0.0).map(|u| x[u]).sum();
    let base = (1.0 - damping) / nf + damping * dangling / nf;
    for v in 0..n {
        let mut acc = 0.0;
        for (u, w) in g.edges_of(v) {
            acc += x[u] * w / strengths[u];
        }
        out[v] = base + damping * acc;
    }
}

/// Bijection between node ids `0..n` and external labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeLabelMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeLabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels `"0"`, `"1"`, ... for a graph without external names.
    pub fn numeric(n: usize) -> Self {
        Self::from_labels((0..n).map(|i| i.to_string()).collect()).expect("numeric labels are unique")
    }

    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// Id of `label`, inserting it with the next free id if unseen.
    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Map for a subgraph whose new id `i` was old id `new_to_old[i]`.
    pub fn restrict(&self, new_to_old: &[usize]) -> Self {
        Self::from_labels(new_to_old.iter().map(|&o| self.labels[o].clone()).collect())
            .expect("subset of unique labels is unique")
    }
}

/// Parses a `src dst [weight]` edge list (tab or space separated).
///
/// Labels get contiguous ids in first-seen order. Blank lines and lines
/// starting with `#` or `%` are skipped. With `weighted == false` any third
/// column is ignored and every row counts 1.
pub fn parse_edge_list(reader: impl BufRead, weighted: bool) -> Result<(WeightedGraph, NodeLabelMap)> {
    let mut labels = NodeLabelMap::new();
    let mut b = GraphBuilder::new(0);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                lineno,
                format!("expected `src dst [weight]`, found {} fields", fields.len()),
            ));
        }
        let w = match (weighted, fields.get(2)) {
            (true, Some(raw)) => {
                let w: f64 = raw
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad weight {raw:?}")))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Invalid(format!(
                        "line {lineno}: weight {raw} must be finite and nonnegative"
                    )));
                }
                w
            }
            _ => 1.0,
        };
        let u = labels.intern(fields[0]);
        let v = labels.intern(fields[1]);
        b.add_edge(u, v, w)?;
        b.ensure_node(u.max(v));
    }
    Ok((b.build(), labels))
}

pub fn load_edge_list(path: impl AsRef<Path>, weighted: bool) -> Result<(WeightedGraph, NodeLabelMap)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file), weighted)
}

/// Writes `src<TAB>dst<TAB>weight`, one undirected edge per line.
pub fn write_edge_list(g: &WeightedGraph, labels: &NodeLabelMap, mut out: impl Write) -> Result<()> {
    for (u, v, w) in g.edges() {
        writeln!(out, "{}\t{}\t{}", labels.label(u), labels.label(v), w)?;
    }
    Ok(())
}

pub fn save_edge_list(g: &WeightedGraph, labels: &NodeLabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_edge_list(g, labels, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

const GRAPH_MAGIC: &[u8; 8] = b"SINRGRPH";
const GRAPH_VERSION: u32 = 1;

/// Binary cache: magic, version (u32), node count (u64), adjacency entry count
/// (u64), then `n + 1` offsets (u64), neighbor ids (u64) and weights (f64).
/// Little-endian throughout.
pub fn write_graph_binary(g: &WeightedGraph, mut out: impl Write) -> Result<()> {
    out.write_all(GRAPH_MAGIC)?;
    out.write_all(&GRAPH_VERSION.to_le_bytes())?;
    out.write_all(&(g.node_count() as u64).to_le_bytes())?;
    out.write_all(&(g.neighbors.len() as u64).to_le_bytes())?;
    for &o in &g.offsets {
        out.write_all(&(o as u64).to_le_bytes())?;
    }
    for &v in &g.neighbors {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for &w in &g.weights {
        out.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_graph_binary(mut input: impl Read) -> Result<WeightedGraph> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(Error::Format("not a graph cache (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != GRAPH_VERSION {
        return Err(Error::Format(format!("unsupported graph cache version {version}")));
    }
    let n = read_u64(&mut input)? as usize;
    let nnz = read_u64(&mut input)? as usize;
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(read_u64(&mut input)? as usize);
    }
    if offsets[0] != 0 || offsets[n] != nnz || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format("corrupt offsets".into()));
    }
    let mut edges = Vec::with_capacity(nnz / 2);
    let mut neighbors = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        neighbors.push(read_u64(&mut input)? as usize);
    }
    let mut weights = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        weights.push(f64::from_le_bytes(read_array(&mut input)?));
    }
    for u in 0..n {
        for i in offsets[u]..offsets[u + 1] {
            let v = neighbors[i];
            if v >= n || v == u || !(weights[i] > 0.0) {
                return Err(Error::Format(format!("corrupt adjacency entry at node {u}")));
            }
            if u < v {
                edges.push((u, v, weights[i]));
            }
        }
    }
    let g = WeightedGraph::from_unique_edges(n, &edges);
    if g.neighbors != neighbors || g.weights != weights {
        return Err(Error::Format("adjacency is not symmetric and sorted".into()));
    }
    Ok(g)
}

pub fn save_graph_binary(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_graph_binary(g, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_graph_binary(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph_binary(BufReader::new(file))
}

pub(crate) fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub(crate) fn read_u32(input: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(input)?))
}

pub(crate) fn read_u64(input: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(input)?))
}
