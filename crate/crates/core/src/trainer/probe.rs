//! Linear probing of frozen embeddings with multinomial logistic regression.
//!
//! Fitting sees only train and validation labels; test labels enter through
//! a separate [`FittedProbes::score`] call.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AdamState;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Node ids with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledNodes {
    pub nodes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl LabeledNodes {
    pub fn new(nodes: Vec<usize>, labels: Vec<usize>) -> Result<Self> {
        if nodes.len() != labels.len() {
            return Err(Error::dim(format!(
                "{} nodes but {} labels",
                nodes.len(),
                labels.len()
            )));
        }
        Ok(Self { nodes, labels })
    }

    /// The given nodes of `g` with their labels.
    pub fn from_graph(g: &Graph, nodes: &[usize]) -> Self {
        Self {
            nodes: nodes.to_vec(),
            labels: nodes.iter().map(|&v| g.labels()[v]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seeds: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            learning_rate: 0.01,
            l2: 1e-4,
            seeds: 10,
        }
    }
}

/// Per-seed accuracies in `[0, 1]` with their mean and population standard
/// deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl ProbeResult {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Self {
        let n = accuracies.len().max(1) as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        Self {
            accuracies,
            mean,
            std: var.sqrt(),
        }
    }

    /// Percent form with two decimals, e.g. `83.60±0.10`.
    pub fn display_percent(&self) -> String {
        format!("{:.2}±{:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

/// One softmax classifier: `d x c` weights plus `c` biases, applied to
/// embeddings standardized with the training-set column statistics.
#[derive(Debug, Clone)]
struct Classifier {
    weights: Tensor,
    bias: Tensor,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Classifier {
    fn inputs(&self, embeddings: &Tensor, nodes: &[usize]) -> Result<Tensor> {
        standardize(&embeddings.gather_rows(nodes)?, &self.center, &self.scale)
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = x.matmul(&self.weights)?;
        let c = self.bias.numel();
        Ok(logits
            .data()
            .chunks(c)
            .map(|row| {
                let mut best = 0;
                for j in 1..c {
                    if row[j] + self.bias.data()[j] > row[best] + self.bias.data()[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::contract("accuracy over an empty node set"));
        }
        let hits = self
            .predict(x)?
            .iter()
            .zip(labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows() as f64, x.cols());
    let mut center = vec![0.0; d];
    for r in 0..x.rows() {
        for (c, v) in center.iter_mut().zip(x.row(r)) {
            *c += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in 0..x.rows() {
        for ((s, v), c) in var.iter_mut().zip(x.row(r)).zip(&center) {
            *s += (v - c).powi(2) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
        .collect();
    (center, scale)
}

fn standardize(x: &Tensor, center: &[f64], scale: &[f64]) -> Result<Tensor> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for ((v, c), s) in out.row_mut(r).iter_mut().zip(center).zip(scale) {
            *v = (*v - c) / s;
        }
    }
    Ok(out)
}

/// Probes fitted for several seeds, waiting to be scored.
#[derive(Debug, Clone)]
pub struct FittedProbes {
    probes: Vec<Classifier>,
    /// Validation accuracy of each probe at its selected step.
    pub val_accuracies: Vec<f64>,
}

impl FittedProbes {
    /// Accuracy of every probe on `nodes`.
    pub fn score(&self, embeddings: &Tensor, nodes: &LabeledNodes) -> Result<ProbeResult> {
        let accuracies = self
            .probes
            .iter()
            .map(|p| p.accuracy(&p.inputs(embeddings, &nodes.nodes)?, &nodes.labels))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProbeResult::from_accuracies(accuracies))
    }
}

fn check_labels(set: &LabeledNodes, name: &str, classes: usize, rows: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::contract(format!("{name} split is empty")));
    }
    if let Some(&bad) = set.nodes.iter().find(|&&v| v >= rows) {
        return Err(Error::Index {
            index: bad,
            limit: rows,
        });
    }
    if let Some(&bad) = set.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Index {
            index: bad,
            limit: classes,
        });
    }
    Ok(())
}

/// Fits one softmax-regression probe per seed on `train`, keeping for each
/// the step with the best `val` accuracy (earliest on ties). Full-batch
/// gradients with an L2 penalty are applied with Adam.
pub fn fit_probe(
    embeddings: &Tensor,
    train: &LabeledNodes,
    val: &LabeledNodes,
    num_classes: usize,
    cfg: &ProbeConfig,
) -> Result<FittedProbes> {
    let (rows, d) = embeddings.dims2("probe embeddings")?;
    check_labels(train, "train", num_classes, rows)?;
    check_labels(val, "validation", num_classes, rows)?;
    let mut seen = train.labels.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(Error::contract(
            "the train split must contain at least two classes",
        ));
    }
    if cfg.seeds == 0 {
        return Err(Error::contract("linear probe needs at least one seed"));
    }
    if let Some(bad) = embeddings.data().iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite embedding value {bad}")));
    }

    let raw_train = embeddings.gather_rows(&train.nodes)?;
    let (center, scale) = column_stats(&raw_train);
    let x = standardize(&raw_train, &center, &scale)?;
    let xt = x.transpose()?;
    let n = train.len() as f64;
    let c = num_classes;

    let mut probes = Vec::with_capacity(cfg.seeds);
    let mut val_accuracies = Vec::with_capacity(cfg.seeds);
    for seed in 0..cfg.seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = Normal::new(0.0, 0.01).expect("valid normal");
        let mut clf = Classifier {
            weights: Tensor::matrix(d, c, (0..d * c).map(|_| init.sample(&mut rng)).collect())?,
            bias: Tensor::zeros(&[1, c]),
            center: center.clone(),
            scale: scale.clone(),
        };
        let xv = clf.inputs(embeddings, &val.nodes)?;
        let mut adam = AdamState::new([&clf.weights, &clf.bias]);
        let mut best = (clf.accuracy(&xv, &val.labels)?, clf.clone());
        for _ in 0..cfg.steps {
            let mut residual = x.matmul(&clf.weights)?;
            for (r, &label) in train.labels.iter().enumerate() {
                let row = residual.row_mut(r);
                for (v, b) in row.iter_mut().zip(clf.bias.data()) {
                    *v += b;
                }
                let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let total: f64 = row.iter().map(|v| (v - m).exp()).sum();
                for v in row.iter_mut() {
                    *v = (*v - m).exp() / total / n;
                }
                row[label] -= 1.0 / n;
            }
            let mut grad_w = xt.matmul(&residual)?;
            for (g, w) in grad_w.data_mut().iter_mut().zip(clf.weights.data()) {
                *g += cfg.l2 * w;
            }
            let mut grad_b = Tensor::zeros(&[1, c]);
            for r in 0..residual.rows() {
                for (g, v) in grad_b.data_mut().iter_mut().zip(residual.row(r)) {
                    *g += v;
                }
            }
            adam.update(
                &mut [&mut clf.weights, &mut clf.bias],
                &[&grad_w, &grad_b],
                &["probe.weights", "probe.bias"],
                cfg.learning_rate,
            )?;
            let acc = clf.accuracy(&xv, &val.labels)?;
            if acc > best.0 {
                best = (acc, clf.clone());
            }
        }
        val_accuracies.push(best.0);
        probes.push(best.1);
    }
    Ok(FittedProbes {
        probes,
        val_accuracies,
    })
}

/// Fits on the graph's train split, selects on validation, scores on test.
pub fn evaluate_probe(g: &Graph, embeddings: &Tensor, cfg: &ProbeConfig) -> Result<ProbeResult> {
    if embeddings.rows() != g.num_nodes() {
        return Err(Error::dim(format!(
            "{} embedding rows for {} nodes",
            embeddings.rows(),
            g.num_nodes()
        )));
    }
    let s = g.splits();
    let fitted = fit_probe(
        embeddings,
        &LabeledNodes::from_graph(g, &s.train),
        &LabeledNodes::from_graph(g, &s.val),
        g.num_classes(),
        cfg,
    )?;
    fitted.score(embeddings, &LabeledNodes::from_graph(g, &s.test))
}
