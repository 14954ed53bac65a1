//! Node-recall and matrix-factorization embeddings over a community partition.
//!
//! Both produce a [`SparseEmbedding`] with one row per node and one column
//! per community. Rows are stored sorted by dimension with no explicit zeros.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graph::{read_array, read_u32, read_u64, NodeLabelMap, WeightedGraph};
use crate::seed;

/// Row-sparse nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEmbedding {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    /// Optional per-dimension descriptor, e.g. the strongest members.
    pub dimension_labels: Option<Vec<String>>,
}

impl SparseEmbedding {
    /// Builds from per-row `(dim, value)` lists. Rows are sorted, zeros are
    /// dropped, and every value must be finite, nonnegative and `< cols` in
    /// dimension.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|e| e.0);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Invalid(format!("row {r} repeats dimension {}", w[0].0)));
                }
            }
            for (d, v) in row {
                if d >= cols {
                    return Err(Error::Invalid(format!("row {r}: dimension {d} >= {cols}")));
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Invalid(format!("row {r}: value {v} must be finite and >= 0")));
                }
                if v > 0.0 {
                    indices.push(d);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            cols,
            indptr,
            indices,
            values,
            dimension_labels: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_indices(r)
            .iter()
            .copied()
            .zip(self.row_values(r).iter().copied())
    }

    pub fn get(&self, r: usize, d: usize) -> f64 {
        match self.row_indices(r).binary_search(&d) {
            Ok(i) => self.row_values(r)[i],
            Err(_) => 0.0,
        }
    }

    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (d, v) in self.row(r) {
            out[d] = v;
        }
        out
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row_values(r).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Column-major view: for each dimension, `(row, value)` in row order.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.cols];
        for r in 0..self.rows() {
            for (d, v) in self.row(r) {
                cols[d].push((r, v));
            }
        }
        cols
    }

    /// Writes the text format: header `n k`, then `label dim:value ...` per row.
    pub fn write_text(&self, labels: &NodeLabelMap, mut out: impl Write) -> Result<()> {
        if labels.len() != self.rows() {
            return Err(Error::SizeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                self.rows()
            )));
        }
        writeln!(out, "{} {}", self.rows(), self.cols)?;
        for r in 0..self.rows() {
            write!(out, "{}", labels.label(r))?;
            for (d, v) in self.row(r) {
                write!(out, " {d}:{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_text(reader: impl BufRead) -> Result<(Self, NodeLabelMap)> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `n k` header"))??;
        let mut it = header.split_whitespace();
        let (Some(n), Some(k), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(1, "header must be `n k`"));
        };
        let n: usize = n.parse().map_err(|_| Error::parse(1, "bad row count"))?;
        let k: usize = k.parse().map_err(|_| Error::parse(1, "bad column count"))?;
        let mut labels = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let label = fields.next().unwrap_or_default().to_owned();
            let mut row = Vec::new();
            for f in fields.filter(|f| !f.is_empty()) {
                let (d, v) = f
                    .split_once(':')
                    .ok_or_else(|| Error::parse(lineno, format!("expected dim:value, got {f:?}")))?;
                let d: usize = d.parse().map_err(|_| Error::parse(lineno, format!("bad dimension {d:?}")))?;
                let v: f64 = v.parse().map_err(|_| Error::parse(lineno, format!("bad value {v:?}")))?;
                row.push((d, v));
            }
            labels.push(label);
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Invalid(format!("header announces {n} rows, found {}", rows.len())));
        }
        Ok((Self::from_rows(k, rows)?, NodeLabelMap::from_labels(labels)?))
    }

    /// Binary mirror of the text format: magic, version, rows, cols, nnz
    /// (u64 each), row pointers (u64), dims (u32), values (f64), then each
    /// label as a u32 byte length and UTF-8 bytes. Little-endian.
    pub fn write_binary(&self, labels: &NodeLabelMap, mut out: impl Write) -> Result<()> {
        if labels.len() != self.rows() {
            return Err(Error::SizeMismatch(format!("{} labels for {} rows", labels.len(), self.rows())));
        }
        out.write_all(EMBED_MAGIC)?;
        out.write_all(&EMBED_VERSION.to_le_bytes())?;
        for x in [self.rows(), self.cols, self.nnz()] {
            out.write_all(&(x as u64).to_le_bytes())?;
        }
        for &p in &self.indptr {
            out.write_all(&(p as u64).to_le_bytes())?;
        }
        for &d in &self.indices {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        for l in labels.labels() {
            out.write_all(&(l.len() as u32).to_le_bytes())?;
            out.write_all(l.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<(Self, NodeLabelMap)> {
        let magic: [u8; 8] = read_array(&mut input)?;
        if &magic != EMBED_MAGIC {
            return Err(Error::Format("not an embedding cache (bad magic)".into()));
        }
        let version = read_u32(&mut input)?;
        if version != EMBED_VERSION {
            return Err(Error::Format(format!("unsupported embedding cache version {version}")));
        }
        let rows = read_u64(&mut input)? as usize;
        let cols = read_u64(&mut input)? as usize;
        let nnz = read_u64(&mut input)? as usize;
        let mut indptr = Vec::with_capacity(rows + 1);
        for _ in 0..=rows {
            indptr.push(read_u64(&mut input)? as usize);
        }
        if indptr[0] != 0 || indptr[rows] != nnz || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("corrupt row pointers".into()));
        }
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            indices.push(read_u32(&mut input)? as usize);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            values.push(f64::from_le_bytes(read_array(&mut input)?));
        }
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let len = read_u32(&mut input)? as usize;
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf)?;
            labels.push(String::from_utf8(buf).map_err(|_| Error::Format("label is not UTF-8".into()))?);
        }
        let row_lists = (0..rows)
            .map(|r| {
                (indptr[r]..indptr[r + 1])
                    .map(|i| (indices[i], values[i]))
                    .collect()
            })
            .collect();
        let e = Self::from_rows(cols, row_lists)?;
        if e.nnz() != nnz {
            return Err(Error::Format("explicit zeros in embedding cache".into()));
        }
        Ok((e, NodeLabelMap::from_labels(labels)?))
    }
}

const EMBED_MAGIC: &[u8; 8] = b"SINREMBD";
const EMBED_VERSION: u32 = 1;

/// An embedding together with its row labels (words or vertex names).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding {
    pub embedding: SparseEmbedding,
    pub labels: NodeLabelMap,
}

impl LabeledEmbedding {
    pub fn new(embedding: SparseEmbedding, labels: NodeLabelMap) -> Result<Self> {
        if embedding.rows() != labels.len() {
            return Err(Error::SizeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                embedding.rows()
            )));
        }
        Ok(Self { embedding, labels })
    }

    pub fn row_of(&self, word: &str) -> Result<usize> {
        self.labels
            .id(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.embedding.write_text(&self.labels, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.embedding.write_binary(&self.labels, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads either format, sniffing the binary magic.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let is_binary = reader.fill_buf().map_err(|e| Error::io(path, e))?.starts_with(EMBED_MAGIC);
        let (embedding, labels) = if is_binary {
            SparseEmbedding::read_binary(reader)?
        } else {
            SparseEmbedding::read_text(reader)?
        };
        Ok(Self { embedding, labels })
    }
}

/// Node recall of `u`: for each community touched by `u`, the share of `u`'s
/// weighted degree that lands in it. Sorted by community id.
pub fn node_recall(g: &WeightedGraph, p: &Partition, u: usize) -> Result<Vec<(usize, f64)>> {
    check_partition(g, p)?;
    let strength = g.weighted_degree(u)?;
    if strength == 0.0 {
        return Err(Error::IsolatedNode(u));
    }
    let mut acc = vec![0.0; p.community_count()];
    let mut touched = Vec::new();
    recall_row(g, p, u, strength, &mut acc, &mut touched);
    Ok(touched)
}

fn check_partition(g: &WeightedGraph, p: &Partition) -> Result<()> {
    if g.node_count() != p.node_count() {
        return Err(Error::SizeMismatch(format!(
            "partition covers {} nodes, graph has {}",
            p.node_count(),
            g.node_count()
        )));
    }
    Ok(())
}

/// Fills `out` with the recall row of `u`, using `acc` (all zeros on entry and
/// exit) as scratch.
fn recall_row(
    g: &WeightedGraph,
    p: &Partition,
    u: usize,
    strength: f64,
    acc: &mut [f64],
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let mut seen: Vec<usize> = Vec::new();
    for (v, w) in g.edges_of(u) {
        let c = p.community_of(v);
        if acc[c] == 0.0 {
            seen.push(c);
        }
        acc[c] += w;
    }
    seen.sort_unstable();
    for c in seen {
        out.push((c, acc[c] / strength));
        acc[c] = 0.0;
    }
}

/// Node-recall embedding of every node. Linear in `n + m`.
pub fn sinr_nr(g: &WeightedGraph, p: &Partition) -> Result<SparseEmbedding> {
    check_partition(g, p)?;
    let n = g.node_count();
    let k = p.community_count();
    let mut acc = vec![0.0; k];
    let mut row = Vec::new();
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(2 * g.edge_count());
    let mut values = Vec::with_capacity(2 * g.edge_count());
    for u in 0..n {
        let strength = g.strengths()[u];
        if strength == 0.0 {
            return Err(Error::IsolatedNode(u));
        }
        recall_row(g, p, u, strength, &mut acc, &mut row);
        for &(c, v) in &row {
            indices.push(c);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    Ok(SparseEmbedding {
        cols: k,
        indptr,
        indices,
        values,
        dimension_labels: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Initial entries are drawn uniformly from `[0, init_scale)`.
    pub init_scale: f64,
    /// Graphs with more nodes are rejected.
    pub max_nodes: usize,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            learning_rate: 5e-3,
            seed: 0,
            init_scale: 0.1,
            max_nodes: 20_000,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Invalid("init_scale must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MfOutput {
    pub embedding: SparseEmbedding,
    /// Mean squared reconstruction error after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Per-node nonzero targets grouped by community, in CSR form.
struct BlockTargets {
    /// `row_ptr[u]..row_ptr[u+1]` indexes `blocks`.
    row_ptr: Vec<usize>,
    /// `(community, start, end)` into `weights`.
    blocks: Vec<(usize, usize, usize)>,
    weights: Vec<f64>,
}

impl BlockTargets {
    fn new(g: &WeightedGraph, p: &Partition) -> Self {
        let mut row_ptr = vec![0];
        let mut blocks = Vec::new();
        let mut weights = Vec::with_capacity(2 * g.edge_count());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for u in 0..g.node_count() {
            buf.clear();
            buf.extend(g.edges_of(u).map(|(v, w)| (p.community_of(v), w)));
            buf.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < buf.len() {
                let c = buf[i].0;
                let start = weights.len();
                while i < buf.len() && buf[i].0 == c {
                    weights.push(buf[i].1);
                    i += 1;
                }
                blocks.push((c, start, weights.len()));
            }
            row_ptr.push(blocks.len());
        }
        Self {
            row_ptr,
            blocks,
            weights,
        }
    }
}

/// Factorizes the adjacency `A` as `U C^T`, with `C` the membership indicator
/// of `p`, by stochastic gradient descent on the squared error.
///
/// One epoch is a pass over every off-diagonal entry `(u, v)` of `A` in a
/// fresh random order, each taking the step
/// `U[u, c(v)] -= lr * 2 * (U[u, c(v)] - A[u, v])`. The diagonal is not part
/// of the objective since the graph has no self-loops. An entry only touches
/// the parameter of its `(row, community)` block, so the pass is replayed
/// block by block: runs of zero targets collapse into powers of
/// `1 - 2 lr`, and each epoch costs `O(n k + m)` instead of `O(n^2)`.
pub fn sinr_mf(g: &WeightedGraph, p: &Partition, cfg: &MfConfig) -> Result<MfOutput> {
    cfg.validate()?;
    check_partition(g, p)?;
    let n = g.node_count();
    if n > cfg.max_nodes {
        return Err(Error::TooLarge { n, cap: cfg.max_nodes });
    }
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let k = p.community_count();
    let sizes = p.sizes();
    let targets = BlockTargets::new(g, p);
    let mut rng = seed::stream_rng(cfg.seed, 1);

    let mut u_mat: Vec<f64> = (0..n * k)
        .map(|_| if cfg.init_scale > 0.0 { rng.gen_range(0.0..cfg.init_scale) } else { 0.0 })
        .collect();

    let step = 2.0 * cfg.learning_rate;
    let rho = 1.0 - step;
    let max_block = sizes.iter().copied().max().unwrap_or(0);
    // rho^z for every run length a block can hold.
    let mut rho_pow = Vec::with_capacity(max_block + 1);
    let mut acc = 1.0f64;
    for _ in 0..=max_block {
        rho_pow.push(acc);
        acc *= rho;
    }

    // Constant part of the loss: sum of squared targets.
    let target_sq: f64 = targets.weights.iter().map(|w| w * w).sum();
    let pairs = (n * n.saturating_sub(1)).max(1) as f64;

    let mut positions: Vec<usize> = Vec::new();
    let mut order: Vec<f64> = Vec::new();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        for u in 0..n {
            let cu = p.community_of(u);
            let row = &mut u_mat[u * k..(u + 1) * k];
            let mut next_block = targets.row_ptr[u];
            let end_block = targets.row_ptr[u + 1];
            for (c, x) in row.iter_mut().enumerate() {
                let len = sizes[c] - usize::from(c == cu);
                if next_block < end_block && targets.blocks[next_block].0 == c {
                    let (_, s, e) = targets.blocks[next_block];
                    next_block += 1;
                    let nz = e - s;
                    positions.clear();
                    positions.extend(rand::seq::index::sample(&mut rng, len, nz).into_iter());
                    positions.sort_unstable();
                    order.clear();
                    order.extend_from_slice(&targets.weights[s..e]);
                    order.shuffle(&mut rng);
                    let mut cursor = 0;
                    for (&pos, &w) in positions.iter().zip(&order) {
                        *x *= rho_pow[pos - cursor];
                        *x = rho * *x + step * w;
                        cursor = pos + 1;
                    }
                    *x *= rho_pow[len - cursor];
                } else {
                    *x *= rho_pow[len];
                }
            }
        }

        let loss = mf_loss(&u_mat, n, k, p, &sizes, &targets, target_sq) / pairs;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        loss_trace.push(loss);
    }

    let rows = (0..n)
        .map(|u| {
            (0..k)
                .filter_map(|c| {
                    let v = u_mat[u * k + c];
                    (v > 0.0).then_some((c, v))
                })
                .collect()
        })
        .collect();
    Ok(MfOutput {
        embedding: SparseEmbedding::from_rows(k, rows)?,
        loss_trace,
    })
}

/// Sum over off-diagonal entries of `(U C^T - A)^2`, in closed form per block:
/// `len * x^2 - 2 x * sum(targets) + sum(targets^2)`.
fn mf_loss(
    u_mat: &[f64],
    n: usize,
    k: usize,
    p: &Partition,
    sizes: &[usize],
    targets: &BlockTargets,
    target_sq: f64,
) -> f64 {
    let mut total = target_sq;
    for u in 0..n {
        let cu = p.community_of(u);
        let row = &u_mat[u * k..(u + 1) * k];
        for (c, &x) in row.iter().enumerate() {
            let len = (sizes[c] - usize::from(c == cu)) as f64;
            total += len * x * x;
        }
        for &(c, s, e) in &targets.blocks[targets.row_ptr[u]..targets.row_ptr[u + 1]] {
            let sum: f64 = targets.weights[s..e].iter().sum();
            total -= 2.0 * row[c] * sum;
        }
    }
    total.max(0.0)
}

fn dot_sorted(e: &SparseEmbedding, a: usize, b: usize) -> f64 {
    let (ia, va) = (e.row_indices(a), e.row_values(a));
    let (ib, vb) = (e.row_indices(b), e.row_values(b));
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < ia.len() && j < ib.len() {
        match ia[i].cmp(&ib[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += va[i] * vb[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub fn cosine_similarity(e: &SparseEmbedding, u: usize, v: usize) -> Result<f64> {
    for r in [u, v] {
        if r >= e.rows() {
            return Err(Error::NodeOutOfRange { node: r, n: e.rows() });
        }
    }
    let (nu, nv) = (e.row_norm(u), e.row_norm(v));
    if nu == 0.0 {
        return Err(Error::ZeroRow(u));
    }
    if nv == 0.0 {
        return Err(Error::ZeroRow(v));
    }
    Ok((dot_sorted(e, u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine index over all rows, for repeated neighbor queries.
pub struct NeighborIndex<'a> {
    embedding: &'a SparseEmbedding,
    columns: Vec<Vec<(usize, f64)>>,
    norms: Vec<f64>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(embedding: &'a SparseEmbedding) -> Self {
        Self {
            embedding,
            columns: embedding.columns(),
            norms: (0..embedding.rows()).map(|r| embedding.row_norm(r)).collect(),
        }
    }

    /// Cosine similarity of `u` against every row (0 for zero rows).
    pub fn similarities(&self, u: usize) -> Result<Vec<f64>> {
        let e = self.embedding;
        if u >= e.rows() {
            return Err(Error::NodeOutOfRange { node: u, n: e.rows() });
        }
        if self.norms[u] == 0.0 {
            return Err(Error::ZeroRow(u));
        }
        let mut sims = vec![0.0; e.rows()];
        for (d, x) in e.row(u) {
            for &(r, y) in &self.columns[d] {
                sims[r] += x * y;
            }
        }
        for (r, s) in sims.iter_mut().enumerate() {
            *s = if self.norms[r] == 0.0 {
                0.0
            } else {
                (*s / (self.norms[u] * self.norms[r])).clamp(-1.0, 1.0)
            };
        }
        Ok(sims)
    }

    /// Rows with a nonzero vector, other than `u`.
    pub fn candidate_count(&self, u: usize) -> usize {
        self.norms
            .iter()
            .enumerate()
            .filter(|&(r, &n)| r != u && n > 0.0)
            .count()
    }

    /// The `k` most similar nonzero rows to `u` (excluding `u`), by descending
    /// cosine with ties broken by ascending id.
    pub fn top_k(&self, u: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        let sims = self.similarities(u)?;
        let mut cand: Vec<(usize, f64)> = sims
            .into_iter()
            .enumerate()
            .filter(|&(r, _)| r != u && self.norms[r] > 0.0)
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < cand.len() {
            cand.select_nth_unstable_by(k, cmp);
            cand.truncate(k);
        }
        cand.sort_unstable_by(cmp);
        Ok(cand)
    }
}

/// The `k` nearest rows to `u` by cosine. See [`NeighborIndex::top_k`].
pub fn top_k_neighbors(e: &SparseEmbedding, u: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    NeighborIndex::new(e).top_k(u, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The 8-node, 12-edge example: a 4-clique {0,1,2,3}, bridge 3-4, and
    /// 4-5, 4-7, 5-6, 5-7, 6-7.
    pub(crate) fn example_graph() -> (WeightedGraph, Partition) {
        let g = WeightedGraph::from_edges(
            8,
            [
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 2),
                (1, 3),
                (2, 3),
                (3, 4),
                (4, 5),
                (4, 7),
                (5, 6),
                (5, 7),
                (6, 7),
            ],
        );
        let p = Partition::from_assignment(&[0, 0, 0, 0, 1, 1, 1, 1]);
        (g, p)
    }

    #[test]
    fn example_rows() {
        let (g, p) = example_graph();
        assert_eq!(g.edge_count(), 12);
        assert_eq!(node_recall(&g, &p, 0).unwrap(), vec![(0, 1.0)]);
        assert_eq!(node_recall(&g, &p, 3).unwrap(), vec![(0, 0.75), (1, 0.25)]);
        let r4 = node_recall(&g, &p, 4).unwrap();
        assert_abs_diff_eq!(r4[0].1, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r4[1].1, 2.0 / 3.0, epsilon = 1e-15);

        let e = sinr_nr(&g, &p).unwrap();
        let expected = [
            [1.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [0.75, 0.25],
            [1.0 / 3.0, 2.0 / 3.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.0, 1.0],
        ];
        assert_eq!((e.rows(), e.cols()), (8, 2));
        for (u, row) in expected.iter().enumerate() {
            assert_eq!(e.dense_row(u), row.to_vec());
        }
    }

    #[test]
    fn isolated_node_is_an_error() {
        let g = WeightedGraph::from_edges(3, [(0, 1)]);
        let p = Partition::single(3);
        assert!(matches!(node_recall(&g, &p, 2), Err(Error::IsolatedNode(2))));
        assert!(sinr_nr(&g, &p).is_err());
        assert!(sinr_nr(&g, &Partition::single(2)).is_err());
    }

    #[test]
    fn single_community_gives_unit_rows() {
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((i, j));
            }
        }
        let g = WeightedGraph::from_edges(5, edges);
        let e = sinr_nr(&g, &Partition::single(5)).unwrap();
        for u in 0..5 {
            assert_eq!(e.row(u).collect::<Vec<_>>(), vec![(0, 1.0)]);
        }
    }

    #[test]
    fn recall_matches_per_community_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let n = 20;
            let mut b = crate::graph::GraphBuilder::new(n);
            for u in 0..n {
                b.add_edge(u, (u + 1) % n, rng.gen_range(0.1..4.0)).unwrap();
                for _ in 0..2 {
                    b.add_edge(u, rng.gen_range(0..n), rng.gen_range(0.1..4.0)).unwrap();
                }
            }
            let g = b.build();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let p = Partition::from_assignment(&labels);
            let e = sinr_nr(&g, &p).unwrap();
            for u in 0..n {
                let total: f64 = (0..n).map(|v| g.weight(u, v).unwrap_or(0.0)).sum();
                for c in 0..p.community_count() {
                    let into: f64 = p.members(c).iter().map(|&v| g.weight(u, v).unwrap_or(0.0)).sum();
                    assert_abs_diff_eq!(e.get(u, c), into / total, epsilon = 1e-12);
                }
            }
        }
    }

    fn two_cliques(size: usize) -> (WeightedGraph, Partition) {
        let mut edges = Vec::new();
        for block in 0..2 {
            for i in 0..size {
                for j in i + 1..size {
                    edges.push((block * size + i, block * size + j));
                }
            }
        }
        let g = WeightedGraph::from_edges(2 * size, edges);
        let p = Partition::from_assignment(&(0..2 * size).map(|u| u / size).collect::<Vec<_>>());
        (g, p)
    }

    #[test]
    fn mf_exact_factorization() {
        let (g, p) = two_cliques(5);
        let out = sinr_mf(&g, &p, &MfConfig::default()).unwrap();
        assert!(*out.loss_trace.last().unwrap() < 1e-4, "{:?}", out.loss_trace.last());
        assert_eq!(out.loss_trace.len(), 3000);
        for u in 0..10 {
            assert_abs_diff_eq!(out.embedding.get(u, u / 5), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn mf_loss_matches_dense_evaluation() {
        let (g, p) = example_graph();
        let cfg = MfConfig { epochs: 7, ..MfConfig::default() };
        let out = sinr_mf(&g, &p, &cfg).unwrap();
        let e = &out.embedding;
        let mut sq = 0.0;
        for u in 0..8 {
            for v in 0..8 {
                if u != v {
                    let pred = e.get(u, p.community_of(v));
                    let a = g.weight(u, v).unwrap_or(0.0);
                    sq += (pred - a).powi(2);
                }
            }
        }
        assert_abs_diff_eq!(sq / 56.0, *out.loss_trace.last().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn mf_rejects_bad_configs() {
        let (g, p) = example_graph();
        let zero = MfConfig { epochs: 0, ..MfConfig::default() };
        assert!(sinr_mf(&g, &p, &zero).is_err());
        let cap = MfConfig { max_nodes: 4, ..MfConfig::default() };
        assert!(matches!(sinr_mf(&g, &p, &cap), Err(Error::TooLarge { n: 8, cap: 4 })));
        let wild = MfConfig { learning_rate: 50.0, epochs: 200, ..MfConfig::default() };
        assert!(matches!(sinr_mf(&g, &p, &wild), Err(Error::Diverged { .. })));
    }

    #[test]
    fn mf_is_seed_deterministic() {
        let (g, p) = example_graph();
        let cfg = MfConfig { epochs: 50, seed: 4, ..MfConfig::default() };
        let a = sinr_mf(&g, &p, &cfg).unwrap();
        let b = sinr_mf(&g, &p, &cfg).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn cosine_values() {
        let e = SparseEmbedding::from_rows(
            3,
            vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 1.0), (1, 2.0)], vec![(2, 5.0)], vec![]],
        )
        .unwrap();
        assert_abs_diff_eq!(cosine_similarity(&e, 0, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_similarity(&e, 0, 2).unwrap(), 0.0);
        assert!(matches!(cosine_similarity(&e, 0, 3), Err(Error::ZeroRow(3))));
    }

    #[test]
    fn cosine_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<(usize, f64)>> = (0..5)
            .map(|_| {
                let mut dims: Vec<usize> = (0..12).filter(|_| rng.gen_bool(0.4)).collect();
                if dims.is_empty() {
                    dims.push(0);
                }
                dims.into_iter().map(|d| (d, rng.gen_range(0.01..1.0))).collect()
            })
            .collect();
        let e = SparseEmbedding::from_rows(12, rows).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let (x, y) = (e.dense_row(a), e.dense_row(b));
                let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
                let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                let ny = y.iter().map(|p| p * p).sum::<f64>().sqrt();
                assert_abs_diff_eq!(cosine_similarity(&e, a, b).unwrap(), dot / (nx * ny), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn neighbors_ranked_with_id_ties() {
        let e = SparseEmbedding::from_rows(
            2,
            vec![
                vec![(0, 1.0)],
                vec![(0, 2.0)],
                vec![(0, 1.0), (1, 1.0)],
                vec![(0, 3.0)],
                vec![(1, 1.0)],
            ],
        )
        .unwrap();
        let nn = top_k_neighbors(&e, 0, 3).unwrap();
        let ids: Vec<usize> = nn.iter().map(|x| x.0).collect();
        assert_eq!(ids, vec![1, 3, 2]);
        let all = top_k_neighbors(&e, 0, 10).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all.last().unwrap().0, 4);
    }

    #[test]
    fn text_and_binary_round_trip() {
        let (g, p) = example_graph();
        let e = sinr_nr(&g, &p).unwrap();
        let labels = NodeLabelMap::numeric(8);
        let mut text = Vec::new();
        e.write_text(&labels, &mut text).unwrap();
        let s = String::from_utf8(text.clone()).unwrap();
        assert!(s.starts_with("8 2\n0 0:1\n"));
        assert!(s.contains("\n3 0:0.75 1:0.25\n"));
        let (back, labels_back) = SparseEmbedding::read_text(text.as_slice()).unwrap();
        assert_eq!(back, e);
        assert_eq!(labels_back, labels);

        let mut bin = Vec::new();
        e.write_binary(&labels, &mut bin).unwrap();
        let (back, labels_back) = SparseEmbedding::read_binary(bin.as_slice()).unwrap();
        assert_eq!(back, e);
        assert_eq!(labels_back, labels);
    }

    #[test]
    fn from_rows_validates() {
        assert!(SparseEmbedding::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(SparseEmbedding::from_rows(2, vec![vec![(0, -1.0)]]).is_err());
        assert!(SparseEmbedding::from_rows(2, vec![vec![(0, 1.0), (0, 1.0)]]).is_err());
        let e = SparseEmbedding::from_rows(2, vec![vec![(1, 0.0), (0, 2.0)]]).unwrap();
        assert_eq!(e.nnz(), 1);
    }
}
