//! Generated graphs for tests, timing runs and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Splits};
use crate::tensor::Tensor;

/// Planted-partition graph with class-dependent Gaussian features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub classes: usize,
    pub features: usize,
    pub avg_degree: f64,
    /// Probability that an edge endpoint is drawn from its source's class.
    pub homophily: f64,
    /// Standard deviation of the per-class feature means; the per-node
    /// noise has unit variance.
    pub signal: f64,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            nodes: 200,
            classes: 4,
            features: 16,
            avg_degree: 4.0,
            homophily: 0.8,
            signal: 1.0,
            seed: 0,
        }
    }
}

impl PlantedPartition {
    /// Draws the graph. Nodes are shuffled into classes of near-equal size
    /// and split 20% / 20% / 60% into train, validation and test.
    pub fn generate(&self) -> Result<Graph> {
        let n = self.nodes;
        if n < 2 || self.classes == 0 || self.features == 0 {
            return Err(Error::contract(format!(
                "planted partition needs >= 2 nodes, >= 1 class and >= 1 feature, got {n}, {}, {}",
                self.classes, self.features
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(self.avg_degree >= 0.0) {
            return Err(Error::contract(
                "homophily must lie in [0, 1] and avg_degree be non-negative",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut labels = vec![0; n];
        let mut members = vec![Vec::new(); self.classes];
        for (rank, &v) in order.iter().enumerate() {
            labels[v] = rank % self.classes;
            members[rank % self.classes].push(v);
        }

        let target = (n as f64 * self.avg_degree / 2.0).round() as usize;
        let mut edges = Vec::with_capacity(target);
        while edges.len() < target {
            let u = rng.random_range(0..n);
            let pool = if rng.random_bool(self.homophily) {
                &members[labels[u]]
            } else {
                &order
            };
            let v = pool[rng.random_range(0..pool.len())];
            if u != v {
                edges.push((u, v));
            }
        }

        let means: Vec<f64> = (0..self.classes * self.features)
            .map(|_| self.signal * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut data = Vec::with_capacity(n * self.features);
        for &c in &labels {
            for f in 0..self.features {
                let noise: f64 = StandardNormal.sample(&mut rng);
                data.push(means[c * self.features + f] + noise);
            }
        }
        let features = Tensor::matrix(n, self.features, data)?;

        let (train_end, val_end) = (n / 5, 2 * n / 5);
        let splits = Splits {
            train: sorted(&order[..train_end]),
            val: sorted(&order[train_end..val_end]),
            test: sorted(&order[val_end..]),
        };
        Ok(Graph::from_edges(n, &edges, features, labels, self.classes, splits)?.0)
    }
}

fn sorted(ids: &[usize]) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

/// Fixed 12-node, 5-feature, 2-class graph: two six-node rings with chords,
/// joined by two bridges.
pub fn toy_graph() -> Graph {
    let mut edges = Vec::new();
    for base in [0, 6] {
        for i in 0..6 {
            edges.push((base + i, base + (i + 1) % 6));
        }
        edges.push((base, base + 3));
        edges.push((base + 1, base + 4));
    }
    edges.push((5, 6));
    edges.push((0, 11));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let labels: Vec<usize> = (0..12).map(|i| i / 6).collect();
    let data = labels
        .iter()
        .flat_map(|&c| {
            let sign = if c == 0 { 1.0 } else { -1.0 };
            (0..5)
                .map(
                    |f| if f < 2 { sign } else { 0.0 } + 0.5 * rng.sample::<f64, _>(StandardNormal),
                )
                .collect::<Vec<_>>()
        })
        .collect();
    let features = Tensor::matrix(12, 5, data).expect("12 x 5 features");
    let splits = Splits {
        train: vec![0, 3, 6, 9],
        val: vec![1, 4, 7, 10],
        test: vec![2, 5, 8, 11],
    };
    Graph::from_edges(12, &edges, features, labels, 2, splits)
        .expect("valid toy graph")
        .0
}
