//! Reading dimensions: top words, a word's strongest dimensions, dimensions
//! shared by several words, and word-intrusion tasks with their scoring.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{LabeledEmbedding, SparseEmbedding};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Words of a dimension by decreasing value, ties by ascending row id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionDescriptor {
    pub dim: usize,
    pub words: Vec<(String, f64)>,
    /// Rows with a nonzero value on this dimension.
    pub member_count: usize,
    /// Fewer than the requested number of words were available.
    pub short: bool,
}

impl DimensionDescriptor {
    pub fn label(&self) -> String {
        self.words.iter().map(|w| w.0.as_str()).collect::<Vec<_>>().join(" ")
    }
}

/// Nonzero `(row, value)` entries of column `dim`, ranked.
fn ranked_column(e: &SparseEmbedding, dim: usize) -> Vec<(usize, f64)> {
    let mut col: Vec<(usize, f64)> = (0..e.rows())
        .filter_map(|r| {
            let v = e.get(r, dim);
            (v > 0.0).then_some((r, v))
        })
        .collect();
    col.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    col
}

pub fn top_words(model: &LabeledEmbedding, dim: usize, k: usize) -> Result<DimensionDescriptor> {
    let e = &model.embedding;
    if dim >= e.cols() {
        return Err(Error::Invalid(format!("dimension {dim} >= {}", e.cols())));
    }
    let col = ranked_column(e, dim);
    Ok(DimensionDescriptor {
        dim,
        member_count: col.len(),
        short: col.len() < k,
        words: col
            .into_iter()
            .take(k)
            .map(|(r, v)| (model.labels.label(r).to_owned(), v))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongDimension {
    pub dim: usize,
    pub value: f64,
    pub descriptor: DimensionDescriptor,
}

/// The `k` largest coordinates of `word` (ties by ascending dimension), each
/// with the top `describe` words of that dimension. The flag is set when the
/// row has fewer than `k` nonzeros.
pub fn strongest_dimensions(
    model: &LabeledEmbedding,
    word: &str,
    k: usize,
    describe: usize,
) -> Result<(Vec<StrongDimension>, bool)> {
    let r = model.row_of(word)?;
    let mut row: Vec<(usize, f64)> = model.embedding.row(r).collect();
    row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let short = row.len() < k;
    let out = row
        .into_iter()
        .take(k)
        .map(|(dim, value)| {
            Ok(StrongDimension {
                dim,
                value,
                descriptor: top_words(model, dim, describe)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((out, short))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedDimension {
    pub dim: usize,
    /// One value per queried word, in query order.
    pub values: Vec<f64>,
    pub descriptor: DimensionDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedDimensions {
    pub words: Vec<String>,
    pub dims: Vec<SharedDimension>,
}

impl SharedDimensions {
    /// Tab-separated grid: a header with the words, then one row per
    /// dimension. With `presence`, cells are 0/1 instead of values.
    pub fn write_grid(&self, mut out: impl Write, presence: bool) -> Result<()> {
        writeln!(out, "dim\tdescriptor\t{}", self.words.join("\t"))?;
        for d in &self.dims {
            write!(out, "{}\t{}", d.dim, d.descriptor.label())?;
            for &v in &d.values {
                if presence {
                    write!(out, "\t{}", u8::from(v > 0.0))?;
                } else {
                    write!(out, "\t{v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Dimensions on which at least two of `words` are nonzero.
pub fn shared_dimensions(model: &LabeledEmbedding, words: &[&str], describe: usize) -> Result<SharedDimensions> {
    let missing: Vec<&str> = words.iter().copied().filter(|w| model.labels.id(w).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::OutOfVocabulary(missing.join(", ")));
    }
    let rows: Vec<usize> = words.iter().map(|w| model.labels.id(w).expect("checked")).collect();
    let mut support: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &rows {
        for &d in model.embedding.row_indices(r) {
            *support.entry(d).or_insert(0) += 1;
        }
    }
    let dims = support
        .into_iter()
        .filter(|&(_, c)| c >= 2)
        .map(|(dim, _)| {
            Ok(SharedDimension {
                dim,
                values: rows.iter().map(|&r| model.embedding.get(r, dim)).collect(),
                descriptor: top_words(model, dim, describe)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SharedDimensions {
        words: words.iter().map(|w| w.to_string()).collect(),
        dims,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionTask {
    pub id: usize,
    pub dim: usize,
    pub top: [String; 3],
    pub intruder: String,
    /// The four words in presentation order.
    pub shown: [String; 4],
    pub model: String,
    pub seed: u64,
}

/// Share of a dimension's words used by the two intruder clauses.
pub const BOTTOM_SHARE: f64 = 0.3;
pub const TOP_SHARE: f64 = 0.1;
const MAX_FAILURES: usize = 100;

/// Precomputed column ranks for the intruder rule.
struct IntruderRule<'a> {
    e: &'a SparseEmbedding,
    /// Per dimension: nonzero values sorted ascending.
    sorted: Vec<Vec<f64>>,
    /// Per row: dimensions where the row is in the top share.
    top_dims: Vec<Vec<usize>>,
}

impl<'a> IntruderRule<'a> {
    fn new(e: &'a SparseEmbedding) -> Self {
        let n = e.rows() as f64;
        let mut sorted: Vec<Vec<f64>> = e
            .columns()
            .into_iter()
            .map(|c| c.into_iter().map(|x| x.1).collect())
            .collect();
        for s in &mut sorted {
            s.sort_by(f64::total_cmp);
        }
        let mut top_dims = vec![Vec::new(); e.rows()];
        for (r, dims) in top_dims.iter_mut().enumerate() {
            for (d, v) in e.row(r) {
                let s = &sorted[d];
                let above = s.len() - s.partition_point(|&x| x <= v);
                if (above as f64) < TOP_SHARE * n {
                    dims.push(d);
                }
            }
        }
        Self { e, sorted, top_dims }
    }

    /// Fewer than 30% of all rows (zeros included) are strictly below.
    fn in_bottom(&self, r: usize, d: usize) -> bool {
        let v = self.e.get(r, d);
        let zeros = self.e.rows() - self.sorted[d].len();
        let below = if v > 0.0 {
            zeros + self.sorted[d].partition_point(|&x| x < v)
        } else {
            0
        };
        (below as f64) < BOTTOM_SHARE * self.e.rows() as f64
    }

    fn qualifies(&self, r: usize, d: usize) -> bool {
        self.in_bottom(r, d) && self.top_dims[r].iter().any(|&j| j != d)
    }
}

/// Draws `count` tasks on distinct random dimensions. Each task shows the
/// three strongest words of the dimension plus an intruder drawn uniformly
/// among words in the bottom 30% of that dimension and the top 10% of some
/// other one. Dimensions without three nonzero words or without a qualifying
/// intruder are replaced; after 100 replacements the draw fails.
pub fn sample_intrusion_tasks(
    model: &LabeledEmbedding,
    count: usize,
    seed: u64,
    model_id: &str,
) -> Result<Vec<IntrusionTask>> {
    let e = &model.embedding;
    if e.cols() < 2 {
        return Err(Error::Invalid("intrusion tasks need at least 2 dimensions".into()));
    }
    if count > e.cols() {
        return Err(Error::NotEnoughData(format!("{count} tasks requested from {} dimensions", e.cols())));
    }
    let rule = IntruderRule::new(e);
    let mut rng = stream_rng(seed, 0);
    let mut dims: Vec<usize> = (0..e.cols()).collect();
    dims.shuffle(&mut rng);
    let mut tasks = Vec::with_capacity(count);
    let mut failures = 0;
    for d in dims {
        if tasks.len() == count {
            break;
        }
        let col = ranked_column(e, d);
        let candidates: Vec<usize> = if col.len() < 3 {
            Vec::new()
        } else {
            let top: [usize; 3] = [col[0].0, col[1].0, col[2].0];
            (0..e.rows())
                .filter(|r| !top.contains(r) && rule.qualifies(*r, d))
                .collect()
        };
        if candidates.is_empty() {
            failures += 1;
            if failures >= MAX_FAILURES {
                return Err(Error::NotEnoughData(format!(
                    "{MAX_FAILURES} dimensions without a valid intrusion task"
                )));
            }
            continue;
        }
        let intruder = candidates[rng.gen_range(0..candidates.len())];
        let top = [0, 1, 2].map(|i| model.labels.label(col[i].0).to_owned());
        let intruder = model.labels.label(intruder).to_owned();
        let mut shown = [top[0].clone(), top[1].clone(), top[2].clone(), intruder.clone()];
        shown.shuffle(&mut rng);
        tasks.push(IntrusionTask {
            id: tasks.len(),
            dim: d,
            top,
            intruder,
            shown,
            model: model_id.to_owned(),
            seed,
        });
    }
    if tasks.len() < count {
        return Err(Error::NotEnoughData(format!(
            "only {} of {count} dimensions admit an intrusion task",
            tasks.len()
        )));
    }
    Ok(tasks)
}

/// Annotator-facing file: `task_id<TAB>w1<TAB>w2<TAB>w3<TAB>w4`.
pub fn write_tasks(tasks: &[IntrusionTask], mut out: impl Write) -> Result<()> {
    for t in tasks {
        writeln!(out, "{}\t{}", t.id, t.shown.join("\t"))?;
    }
    Ok(())
}

/// Answer key: `task_id<TAB>dim<TAB>intruder<TAB>model<TAB>seed`.
pub fn write_key(tasks: &[IntrusionTask], mut out: impl Write) -> Result<()> {
    for t in tasks {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", t.id, t.dim, t.intruder, t.model, t.seed)?;
    }
    Ok(())
}

/// task id -> intruder, from a key file.
pub fn read_key(reader: impl BufRead) -> Result<HashMap<usize, String>> {
    let mut key = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 3 {
            return Err(Error::parse(i + 1, "expected task_id, dim, intruder"));
        }
        let id = f[0].parse().map_err(|_| Error::parse(i + 1, "bad task id"))?;
        key.insert(id, f[2].to_owned());
    }
    Ok(key)
}

/// What an annotator answered for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Judgement {
    /// Picked this word as the intruder.
    Pick(String),
    /// Hesitated between two words.
    Hesitate(String, String),
    /// Found no intruder: the four words looked consistent.
    Consistent,
}

impl Judgement {
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let tag = it.next().ok_or_else(|| Error::Format("empty judgement".into()))?;
        let rest: Vec<&str> = it.collect();
        match (tag, rest.as_slice()) {
            ("+", [w]) => Ok(Self::Pick((*w).to_owned())),
            ("±" | "+-", [a, b]) => Ok(Self::Hesitate((*a).to_owned(), (*b).to_owned())),
            ("-", []) => Ok(Self::Consistent),
            _ => Err(Error::Format(format!("unrecognized judgement {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Found,
    WrongWord,
    HesitationWithIntruder,
    HesitationWithout,
    Consistent,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Found,
        Outcome::WrongWord,
        Outcome::HesitationWithIntruder,
        Outcome::HesitationWithout,
        Outcome::Consistent,
    ];

    pub fn of(j: &Judgement, intruder: &str) -> Self {
        match j {
            Judgement::Pick(w) if w == intruder => Self::Found,
            Judgement::Pick(_) => Self::WrongWord,
            Judgement::Hesitate(a, b) if a == intruder || b == intruder => Self::HesitationWithIntruder,
            Judgement::Hesitate(..) => Self::HesitationWithout,
            Judgement::Consistent => Self::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionScores {
    pub annotations: usize,
    pub counts: BTreeMap<Outcome, usize>,
    pub shares: BTreeMap<Outcome, f64>,
    /// Agreement on outcome categories across annotators; `None` when no
    /// task has two annotations.
    pub fleiss_kappa: Option<f64>,
}

/// Scores `task_id<TAB>annotator<TAB>judgement` lines against the key.
pub fn score_annotations(reader: impl BufRead, key: &HashMap<usize, String>) -> Result<IntrusionScores> {
    let mut per_task: BTreeMap<usize, Vec<Outcome>> = BTreeMap::new();
    let mut counts: BTreeMap<Outcome, usize> = Outcome::ALL.iter().map(|&o| (o, 0)).collect();
    let mut total = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        if f.len() < 3 {
            return Err(Error::parse(i + 1, "expected task_id, annotator, judgement"));
        }
        let id: usize = f[0].trim().parse().map_err(|_| Error::parse(i + 1, "bad task id"))?;
        let intruder = key
            .get(&id)
            .ok_or_else(|| Error::parse(i + 1, format!("task {id} is not in the key")))?;
        let j = Judgement::parse(f[2]).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let o = Outcome::of(&j, intruder);
        *counts.get_mut(&o).expect("all outcomes present") += 1;
        per_task.entry(id).or_default().push(o);
        total += 1;
    }
    let shares = counts
        .iter()
        .map(|(&o, &c)| (o, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect();
    let table: Vec<Vec<usize>> = per_task
        .values()
        .map(|os| Outcome::ALL.iter().map(|o| os.iter().filter(|x| *x == o).count()).collect())
        .collect();
    Ok(IntrusionScores {
        annotations: total,
        counts,
        shares,
        fleiss_kappa: fleiss_kappa(&table),
    })
}

/// Fleiss' kappa for subjects rated by varying numbers of raters. Rows are
/// per-subject category counts; subjects with fewer than two ratings are
/// ignored.
pub fn fleiss_kappa(table: &[Vec<usize>]) -> Option<f64> {
    let rows: Vec<&Vec<usize>> = table.iter().filter(|r| r.iter().sum::<usize>() >= 2).collect();
    if rows.is_empty() {
        return None;
    }
    let k = rows[0].len();
    let mut agreement = 0.0;
    let mut totals = vec![0usize; k];
    let mut ratings = 0usize;
    for r in &rows {
        let n: usize = r.iter().sum();
        let same: usize = r.iter().map(|&c| c * c).sum::<usize>() - n;
        agreement += same as f64 / (n * (n - 1)) as f64;
        for (t, &c) in totals.iter_mut().zip(r.iter()) {
            *t += c;
        }
        ratings += n;
    }
    let p_bar = agreement / rows.len() as f64;
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / ratings as f64).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Some(if (p_bar - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}
