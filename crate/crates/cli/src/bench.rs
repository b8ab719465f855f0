//! Wall-clock timing of one full loss evaluation on generated graphs.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subgec::gnn::{self, GraphOperators, ModelParams};
use subgec::graph::{bfs_subgraph, sample_anchors_with};
use subgec::synthetic::PlantedPartition;
use subgec::trainer::{loss_forward, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nodes: usize,
    pub k: usize,
    pub seconds: Vec<f64>,
}

impl BenchRow {
    pub fn mean(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len() as f64
    }
}

/// Times `trials` evaluations of encoder forward pass plus the combined
/// loss for a fresh anchor batch each time. Subgraph extraction is not
/// timed.
pub fn time_loss(
    graph: &PlantedPartition,
    base: &TrainConfig,
    k: usize,
    trials: usize,
) -> Result<BenchRow> {
    let g = graph.generate()?;
    let cfg = TrainConfig {
        subgraph_size: k,
        anchors_per_iter: base.anchors_per_iter.min(g.num_nodes()),
        ..base.clone()
    };
    cfg.validate()?;
    let ops = GraphOperators::new(&g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = ModelParams::init(cfg.dims(g.num_features()), &mut rng);
    let mut seconds = Vec::with_capacity(trials);
    for _ in 0..trials {
        let anchors = sample_anchors_with(&mut rng, g.num_nodes(), cfg.anchors_per_iter)?;
        let subgraphs = anchors
            .iter()
            .map(|&a| bfs_subgraph(&g, a, k))
            .collect::<Result<Vec<_>, _>>()?;
        let noise = gnn::standard_normal(&mut rng, g.num_nodes(), cfg.embed_dim);
        let start = Instant::now();
        let parts = loss_forward(&ops, &params, anchors, subgraphs, noise, &cfg)?;
        seconds.push(start.elapsed().as_secs_f64());
        log::debug!(
            "N={} k={k}: loss {} in {:.4}s",
            g.num_nodes(),
            parts.total,
            seconds[seconds.len() - 1]
        );
    }
    Ok(BenchRow {
        nodes: g.num_nodes(),
        k,
        seconds,
    })
}

pub fn write_bench_tsv(rows: &[BenchRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "nodes\tk\ttrials\tmean_seconds\tmin_seconds\tmax_seconds"
    )?;
    for r in rows {
        let min = r.seconds.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.seconds.iter().copied().fold(0.0, f64::max);
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.nodes,
            r.k,
            r.seconds.len(),
            r.mean(),
            min,
            max
        )?;
    }
    Ok(())
}
