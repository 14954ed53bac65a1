//! Loaders for labeled graphs and word benchmark files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{largest_connected_component, load_edge_list, NodeLabelMap, WeightedGraph};

/// A graph restricted to its largest connected component, with optional
/// per-node classes.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graph: WeightedGraph,
    pub labels: NodeLabelMap,
    /// Class id per node, when a label file was given.
    pub classes: Option<Vec<usize>>,
    pub class_names: Vec<String>,
}

/// Loads an edge list, drops weights unless `weighted`, keeps the largest
/// component and attaches classes from `labels_path`.
///
/// Label lines hold the node first and its class last, separated by
/// whitespace, which also covers files with feature columns in between.
pub fn load_graph_dataset(
    name: &str,
    edges_path: impl AsRef<Path>,
    labels_path: Option<&Path>,
    weighted: bool,
) -> Result<GraphDataset> {
    let (g, labels) = load_edge_list(edges_path, weighted)?;
    let g = if weighted { g } else { binarize(&g) };
    let lcc = largest_connected_component(&g)?;
    let labels = labels.restrict(&lcc.new_to_old);
    let (classes, class_names) = match labels_path {
        Some(p) => {
            let (c, names) = load_node_classes(p, &labels)?;
            (Some(c), names)
        }
        None => (None, Vec::new()),
    };
    Ok(GraphDataset {
        name: name.to_owned(),
        graph: lcc.graph,
        labels,
        classes,
        class_names,
    })
}

/// Same edges with unit weights.
pub fn binarize(g: &WeightedGraph) -> WeightedGraph {
    WeightedGraph::from_edges(g.node_count(), g.edges().map(|(u, v, _)| (u, v)))
}

/// Class ids (in order of first appearance) for every node of `nodes`.
pub fn load_node_classes(path: &Path, nodes: &NodeLabelMap) -> Result<(Vec<usize>, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut by_node: HashMap<String, String> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::parse(i + 1, "expected `node<TAB>label`"));
        }
        by_node.insert(fields[0].to_owned(), fields[fields.len() - 1].to_owned());
    }
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut classes = Vec::with_capacity(nodes.len());
    for label in nodes.labels() {
        let class = by_node
            .get(label)
            .ok_or_else(|| Error::Invalid(format!("node {label:?} has no class in {}", path.display())))?;
        let next = class_ids.len();
        let id = *class_ids.entry(class.clone()).or_insert_with(|| {
            names.push(class.clone());
            next
        });
        classes.push(id);
    }
    Ok((classes, names))
}

/// Word pairs with a human relatedness score.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

/// Words with a category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorizationDataset {
    pub name: String,
    pub items: Vec<(String, String)>,
}

impl CategorizationDataset {
    pub fn category_count(&self) -> usize {
        let mut c: Vec<&str> = self.items.iter().map(|i| i.1.as_str()).collect();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityFormat {
    /// `word1<TAB>word2<TAB>score`.
    Tsv,
    /// Space separated `word1 word2 score`; `-n`/`-v`/`-j` tags are removed.
    Men,
    /// Comma or tab separated with a header row.
    Ws353,
    /// Tab separated: id, word1, pos1, word2, pos2, context1, context2, mean.
    Scws,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategorizationFormat {
    /// `word<TAB>category`.
    Tsv,
    /// `concept-pos<TAB>class<TAB>relation<TAB>relatum`; concepts only.
    Bless,
}

fn strip_pos(w: &str) -> &str {
    match w.rsplit_once('-') {
        Some((head, tag)) if matches!(tag, "n" | "v" | "j" | "a" | "r") => head,
        _ => w,
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}

/// Parses similarity lines; repeated pairs have their scores averaged.
pub fn parse_similarity(name: &str, lines: &[String], format: SimilarityFormat) -> Result<SimilarityDataset> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut acc: HashMap<(String, String), (f64, usize)> = HashMap::new();
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            SimilarityFormat::Tsv | SimilarityFormat::Scws => t.split('\t').collect(),
            SimilarityFormat::Men => t.split_whitespace().collect(),
            SimilarityFormat::Ws353 => t.split(|c| c == ',' || c == '\t').collect(),
        };
        let (a, b, s) = match format {
            SimilarityFormat::Tsv | SimilarityFormat::Ws353 => {
                if fields.len() < 3 {
                    return Err(Error::parse(i + 1, "expected word1, word2, score"));
                }
                (fields[0], fields[1], fields[2])
            }
            SimilarityFormat::Men => {
                if fields.len() < 3 {
                    return Err(Error::parse(i + 1, "expected word1 word2 score"));
                }
                (strip_pos(fields[0]), strip_pos(fields[1]), fields[2])
            }
            SimilarityFormat::Scws => {
                if fields.len() < 8 {
                    return Err(Error::parse(i + 1, "expected at least 8 tab-separated fields"));
                }
                (fields[1], fields[3], fields[7])
            }
        };
        let score: f64 = match s.trim().parse() {
            Ok(v) => v,
            // header row of the comma-separated layout
            Err(_) if format == SimilarityFormat::Ws353 && i == 0 => continue,
            Err(_) => return Err(Error::parse(i + 1, format!("bad score {s:?}"))),
        };
        if !score.is_finite() {
            return Err(Error::parse(i + 1, "score must be finite"));
        }
        let key = (a.trim().to_lowercase(), b.trim().to_lowercase());
        let e = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0.0, 0)
        });
        e.0 += score;
        e.1 += 1;
    }
    let pairs = order
        .into_iter()
        .map(|k| {
            let (s, c) = acc[&k];
            (k.0, k.1, s / c as f64)
        })
        .collect();
    Ok(SimilarityDataset {
        name: name.to_owned(),
        pairs,
    })
}

pub fn load_similarity(path: impl AsRef<Path>, format: SimilarityFormat) -> Result<SimilarityDataset> {
    let path = path.as_ref();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_similarity(&name, &read_lines(path)?, format)
}

/// Parses categorization lines; a word keeps its first category.
pub fn parse_categorization(
    name: &str,
    lines: &[String],
    format: CategorizationFormat,
) -> Result<CategorizationDataset> {
    let mut seen = HashMap::new();
    let mut items = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::parse(i + 1, "expected word<TAB>category"));
        }
        let word = match format {
            CategorizationFormat::Tsv => fields[0].trim(),
            CategorizationFormat::Bless => strip_pos(fields[0].trim()),
        }
        .to_lowercase();
        let cat = fields[1].trim().to_owned();
        if seen.insert(word.clone(), cat.clone()).is_none() {
            items.push((word, cat));
        }
    }
    let ds = CategorizationDataset {
        name: name.to_owned(),
        items,
    };
    if ds.category_count() < 2 {
        return Err(Error::NotEnoughData(format!("{name}: need at least 2 categories")));
    }
    Ok(ds)
}

pub fn load_categorization(path: impl AsRef<Path>, format: CategorizationFormat) -> Result<CategorizationDataset> {
    let path = path.as_ref();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_categorization(&name, &read_lines(path)?, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn lines(s: &str) -> Vec<String> {
        s.lines().map(str::to_owned).collect()
    }

    #[test]
    fn similarity_layouts() {
        let tsv = parse_similarity("t", &lines("cat\tdog\t7.5\nCar\tbus\t3"), SimilarityFormat::Tsv).unwrap();
        assert_eq!(tsv.pairs[1], ("car".into(), "bus".into(), 3.0));
        let men = parse_similarity("m", &lines("sun-n sunlight-n 50.000000\nrun-v walk-v 40"), SimilarityFormat::Men).unwrap();
        assert_eq!(men.pairs[0], ("sun".into(), "sunlight".into(), 50.0));
        let ws = parse_similarity("w", &lines("Word 1,Word 2,Human (mean)\nlove,sex,6.77"), SimilarityFormat::Ws353).unwrap();
        assert_eq!(ws.pairs, vec![("love".into(), "sex".into(), 6.77)]);
        let scws = parse_similarity(
            "s",
            &lines("1\tBrazil\tn\tnut\tn\tctx\tctx\t3.0\t1\n2\tbrazil\tn\tnut\tn\tctx\tctx\t5.0\t1"),
            SimilarityFormat::Scws,
        )
        .unwrap();
        assert_eq!(scws.pairs, vec![("brazil".into(), "nut".into(), 4.0)]);
        assert!(parse_similarity("t", &lines("a\tb\tx"), SimilarityFormat::Tsv).is_err());
    }

    #[test]
    fn categorization_layouts() {
        let ds = parse_categorization("c", &lines("dog\tanimal\ncat\tanimal\ncar\tvehicle"), CategorizationFormat::Tsv).unwrap();
        assert_eq!(ds.category_count(), 2);
        let bless = parse_categorization(
            "b",
            &lines("alligator-n\tamphibian_reptile\tattri\taquatic-j\nalligator-n\tamphibian_reptile\tcoord\tfrog-n\naxe-n\ttool\tmero\tblade-n"),
            CategorizationFormat::Bless,
        )
        .unwrap();
        assert_eq!(bless.items, vec![("alligator".into(), "amphibian_reptile".into()), ("axe".into(), "tool".into())]);
        assert!(parse_categorization("c", &lines("a\tx\nb\tx"), CategorizationFormat::Tsv).is_err());
    }

    #[test]
    fn graph_dataset_with_classes() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("g.edges");
        let labels = dir.path().join("g.labels");
        let mut f = File::create(&edges).unwrap();
        writeln!(f, "a b\nb a\nb c\nc a\nx y").unwrap();
        let mut f = File::create(&labels).unwrap();
        writeln!(f, "a\t1 0 red\nb\tred\nc\tblue\nx\tblue").unwrap();
        let ds = load_graph_dataset("g", &edges, Some(&labels), false).unwrap();
        assert_eq!(ds.graph.node_count(), 3);
        assert_eq!(ds.graph.weight(0, 1), Some(1.0));
        assert_eq!(ds.classes.as_deref(), Some(&[0, 0, 1][..]));
        assert_eq!(ds.class_names, vec!["red", "blue"]);
        let weighted = load_graph_dataset("g", &edges, None, true).unwrap();
        assert_eq!(weighted.graph.weight(0, 1), Some(2.0));
    }
}
