//! Histogram gradient-boosted decision trees with second-order leaf weights,
//! for binary (logistic) and multiclass (softmax) objectives.

use serde::{Deserialize, Serialize};

use super::{check_labels, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub max_depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    /// Upper bound on histogram bins per feature, at most 256.
    pub max_bins: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            rounds: 100,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_bins: 256,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if self.rounds == 0 || !(2..=256).contains(&self.max_bins) {
            return Err(Error::Invalid("rounds must be positive and max_bins in 2..=256".into()));
        }
        if !(self.learning_rate > 0.0) || self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::Invalid("learning_rate must be positive, lambda and min_child_weight nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] < threshold { left } else { right },
            }
        }
    }
}

/// Per-feature cut points; a value's bin is the number of cuts `<=` it.
struct Binned {
    cuts: Vec<Vec<f64>>,
    /// Column-major bin codes.
    codes: Vec<Vec<u8>>,
}

fn bin_features(x: &Matrix, max_bins: usize) -> Binned {
    let mut cuts = Vec::with_capacity(x.cols());
    let mut codes = Vec::with_capacity(x.cols());
    let mut col = Vec::with_capacity(x.rows());
    for f in 0..x.cols() {
        col.clear();
        col.extend((0..x.rows()).map(|r| x.get(r, f)));
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let c: Vec<f64> = if sorted.len() <= max_bins {
            sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
        } else {
            // quantiles of the distinct values
            let mut c: Vec<f64> = (1..max_bins)
                .map(|q| {
                    let i = q * sorted.len() / max_bins;
                    0.5 * (sorted[i - 1] + sorted[i])
                })
                .collect();
            c.dedup();
            c
        };
        codes.push(col.iter().map(|&v| c.partition_point(|&t| t <= v) as u8).collect());
        cuts.push(c);
    }
    Binned { cuts, codes }
}

struct Grower<'a> {
    cfg: &'a GbdtConfig,
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    nodes: Vec<Node>,
    hist: Vec<(f64, f64)>,
}

impl Grower<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.lambda) * self.cfg.learning_rate
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    /// Grows the subtree over `idx` and returns its node index.
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let (g, h) = idx
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_weight(g, h)));
        if depth >= self.cfg.max_depth || idx.len() < 2 {
            return me;
        }
        let parent = self.score(g, h);
        let mut best: Option<(f64, usize, usize)> = None;
        for f in 0..self.binned.cuts.len() {
            let n_bins = self.binned.cuts[f].len() + 1;
            if n_bins < 2 {
                continue;
            }
            self.hist.clear();
            self.hist.resize(n_bins, (0.0, 0.0));
            let codes = &self.binned.codes[f];
            for &i in idx.iter() {
                let e = &mut self.hist[codes[i] as usize];
                e.0 += self.grad[i];
                e.1 += self.hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..n_bins - 1 {
                gl += self.hist[b].0;
                hl += self.hist[b].1;
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
                if gain > 1e-12 && best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b));
                }
            }
        }
        let Some((_, f, b)) = best else { return me };
        let codes = &self.binned.codes[f];
        let mut split = 0;
        for k in 0..idx.len() {
            if codes[idx[k]] as usize <= b {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: f,
            threshold: self.binned.cuts[f][b],
            left,
            right,
        };
        me
    }
}

/// Fitted ensemble. Binary models keep one tree per round, multiclass models
/// one per class per round.
#[derive(Debug, Clone)]
pub struct Gbdt {
    n_classes: usize,
    trees: Vec<Vec<Tree>>,
}

impl Gbdt {
    pub fn fit(cfg: &GbdtConfig, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Self> {
        cfg.validate()?;
        check_labels(x, y, n_classes)?;
        let n = x.rows();
        let binned = bin_features(x, cfg.max_bins);
        let outputs = if n_classes == 2 { 1 } else { n_classes };
        let mut margin = vec![0.0; n * outputs];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees: Vec<Vec<Tree>> = vec![Vec::with_capacity(cfg.rounds); outputs];
        let mut idx: Vec<usize> = Vec::with_capacity(n);
        let mut probs = vec![0.0; n * outputs];
        for _ in 0..cfg.rounds {
            if outputs == 1 {
                for i in 0..n {
                    probs[i] = sigmoid(margin[i]);
                }
            } else {
                for i in 0..n {
                    softmax(&margin[i * outputs..(i + 1) * outputs], &mut probs[i * outputs..(i + 1) * outputs]);
                }
            }
            for (k, class_trees) in trees.iter_mut().enumerate() {
                for i in 0..n {
                    let p = probs[i * outputs + k];
                    let target = if outputs == 1 { y[i] == 1 } else { y[i] == k };
                    grad[i] = p - f64::from(u8::from(target));
                    hess[i] = if outputs == 1 { p * (1.0 - p) } else { 2.0 * p * (1.0 - p) }.max(1e-16);
                }
                idx.clear();
                idx.extend(0..n);
                let mut grower = Grower {
                    cfg,
                    binned: &binned,
                    grad: &grad,
                    hess: &hess,
                    nodes: Vec::new(),
                    hist: Vec::new(),
                };
                grower.grow(&mut idx, 0);
                let tree = Tree { nodes: grower.nodes };
                for i in 0..n {
                    margin[i * outputs + k] += tree.predict(x.row(i));
                }
                class_trees.push(tree);
            }
        }
        Ok(Self { n_classes, trees })
    }

    /// Raw margins, one per output.
    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        self.trees
            .iter()
            .map(|ts| ts.iter().map(|t| t.predict(row)).sum())
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows())
            .map(|r| {
                let m = self.margins(x.row(r));
                if self.n_classes == 2 {
                    usize::from(m[0] > 0.0)
                } else {
                    argmax(&m)
                }
            })
            .collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::accuracy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leaked_label_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400;
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let rows: Vec<Vec<f64>> = y.iter().map(|&c| vec![rng.gen::<f64>(), c as f64, rng.gen()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = Gbdt::fit(&GbdtConfig::default(), &x, &y, 2).unwrap();
        assert_eq!(accuracy(&y, &m.predict(&x)), 1.0);
    }

    #[test]
    fn xor_needs_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..600).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = Gbdt::fit(&GbdtConfig::default(), &x, &y, 2).unwrap();
        let test: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let yt: Vec<usize> = test.iter().map(|r| usize::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
        let acc = accuracy(&yt, &m.predict(&Matrix::from_rows(&test).unwrap()));
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn multiclass_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..400 {
            let c = rng.gen_range(0..4);
            rows.push(vec![centers[c][0] + rng.gen_range(-1.0..1.0), centers[c][1] + rng.gen_range(-1.0..1.0)]);
            y.push(c);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = Gbdt::fit(&GbdtConfig::default(), &x, &y, 4).unwrap();
        assert_eq!(accuracy(&y, &m.predict(&x)), 1.0);
    }

    #[test]
    fn one_stump_matches_closed_form() {
        // Single split, single round: leaf weights are -G/(H+lambda)*eta.
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let y = [0, 0, 1, 1, 0];
        let cfg = GbdtConfig {
            rounds: 1,
            max_depth: 1,
            min_child_weight: 0.0,
            ..GbdtConfig::default()
        };
        let m = Gbdt::fit(&cfg, &x, &y, 2).unwrap();
        // p = 0.5 everywhere: g = p - y, h = 0.25.
        let left = -(0.5 + 0.5) / (0.5 + 1.0) * 0.3;
        let right = -(-0.5 - 0.5 + 0.5) / (0.75 + 1.0) * 0.3;
        assert!((m.margins(&[0.0])[0] - left).abs() < 1e-12);
        assert!((m.margins(&[1.0])[0] - right).abs() < 1e-12);
    }

    #[test]
    fn many_distinct_values_are_quantized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.gen::<f64>()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let b = bin_features(&x, 256);
        assert!(b.cuts[0].len() <= 255);
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.5)).collect();
        let m = Gbdt::fit(&GbdtConfig::default(), &x, &y, 2).unwrap();
        assert!(accuracy(&y, &m.predict(&x)) > 0.99);
    }

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(Gbdt::fit(&GbdtConfig::default(), &x, &[0, 2], 2).is_err());
        assert!(Gbdt::fit(&GbdtConfig::default(), &x, &[0], 2).is_err());
    }
}
