//! Self-supervised training, linear-probe evaluation, sensitivity sweeps and
//! random search.

mod probe;
mod search;

pub use probe::{evaluate_probe, fit_probe, FittedProbes, LabeledNodes, ProbeConfig, ProbeResult};
pub use search::{
    random_search, sensitivity_sweep, write_sweep_tsv, SearchOutcome, SearchSpace, SweepParam,
    SweepRow, Trial,
};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{self, GraphOperators, ModelDims, ModelParams, NUM_PARAMS, PARAM_NAMES};
use crate::graph::{bfs_subgraph, sample_anchors_with, Graph, Subgraph};
use crate::losses::{batch_loss, ContrastBatch, LossConfig, LossParts, OtSettings};
use crate::tensor::{Tape, Tensor};

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Nodes per BFS subgraph (`k`).
    pub subgraph_size: usize,
    /// Anchors sampled per iteration (`|S|`).
    pub anchors_per_iter: usize,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub learning_rate: f64,
    /// L2 penalty added to every parameter gradient.
    pub weight_decay: f64,
    /// Optimization steps; each step draws a fresh anchor batch.
    pub epochs: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub sage_dim: usize,
    pub seed: u64,
    pub ot: OtSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        Self {
            subgraph_size: 15,
            anchors_per_iter: 100,
            alpha: loss.alpha,
            beta: loss.beta,
            tau: loss.tau,
            learning_rate: 5e-3,
            weight_decay: 0.0,
            epochs: 100,
            hidden_dim: 256,
            embed_dim: 64,
            sage_dim: 64,
            seed: 0,
            ot: OtSettings::default(),
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
        }
    }

    pub fn dims(&self, input: usize) -> ModelDims {
        ModelDims {
            input,
            hidden: self.hidden_dim,
            embed: self.embed_dim,
            sage: self.sage_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss().validate()?;
        if self.subgraph_size == 0 {
            return Err(Error::contract("subgraph_size must be at least 1"));
        }
        if self.anchors_per_iter < 2 {
            return Err(Error::contract(format!(
                "anchors_per_iter must be at least 2, got {}",
                self.anchors_per_iter
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::contract(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 || self.sage_dim == 0 {
            return Err(Error::contract(
                "hidden, embed and sage dimensions must be positive",
            ));
        }
        Ok(())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for a list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let first: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. A non-finite gradient aborts before
    /// any parameter is touched, naming the offending parameter.
    pub fn update(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[&Tensor],
        names: &[&str],
        lr: f64,
    ) -> Result<()> {
        if params.len() != self.first.len()
            || grads.len() != params.len()
            || names.len() != params.len()
        {
            return Err(Error::dim(format!(
                "adam state for {} tensors given {} params, {} grads, {} names",
                self.first.len(),
                params.len(),
                grads.len(),
                names.len()
            )));
        }
        for ((p, g), name) in params.iter().zip(grads).zip(names) {
            if p.shape() != g.shape() {
                return Err(Error::dim(format!(
                    "gradient of {name} has shape {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if let Some(bad) = g.data().iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "non-finite gradient {bad} for parameter {name}"
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (((x, &gi), mi), vi) in p
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                *x -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

/// Adam step on every model parameter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Tensor; NUM_PARAMS],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let grads: Vec<&Tensor> = grads.iter().collect();
    state.update(&mut params.tensors_mut(), &grads, &PARAM_NAMES, lr)
}

/// Per-iteration loss values. Skipped terms are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub total: f64,
    pub wasserstein: Option<f64>,
    pub gromov: Option<f64>,
    pub kl: f64,
}

/// Output of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Encoder output for every node under the final parameters.
    pub embeddings: Tensor,
    pub trace: Vec<IterationLog>,
}

fn anchors_and_subgraphs(
    g: &Graph,
    rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) -> Result<(Vec<usize>, Vec<Subgraph>)> {
    let anchors = sample_anchors_with(rng, g.num_nodes(), cfg.anchors_per_iter)?;
    let subgraphs = anchors
        .iter()
        .map(|&a| bfs_subgraph(g, a, cfg.subgraph_size))
        .collect::<Result<Vec<_>>>()?;
    Ok((anchors, subgraphs))
}

/// One forward and backward pass of the combined objective for a fixed
/// anchor batch and reparameterization noise (`N x F`). Gradients are in
/// [`PARAM_NAMES`] order.
pub fn loss_and_gradients(
    ops: &GraphOperators,
    params: &ModelParams,
    anchors: Vec<usize>,
    subgraphs: Vec<Subgraph>,
    noise: Tensor,
    cfg: &TrainConfig,
) -> Result<(LossParts, [Tensor; NUM_PARAMS])> {
    let tape = Tape::new();
    let vars = params.track(&tape);
    let h = gnn::encode(ops, &vars)?;
    let emb = gnn::sge_with_noise(ops, h, &vars, noise)?;
    let batch = ContrastBatch::new(anchors, subgraphs, h, emb.sample)?;
    let (loss, parts) = batch_loss(&batch, emb.mu, emb.log_sigma, &cfg.loss(), &cfg.ot)?;
    let grads = tape.backward(loss)?;
    Ok((parts, vars.all().map(|v| grads.get_or_zeros(v))))
}

/// `cfg` with the anchor count capped at the node count.
fn batch_config(g: &Graph, cfg: &TrainConfig) -> Result<TrainConfig> {
    let anchors = cfg.anchors_per_iter.min(g.num_nodes());
    if anchors < 2 {
        return Err(Error::contract(format!(
            "a contrastive batch needs two anchors but the graph has {} nodes",
            g.num_nodes()
        )));
    }
    if anchors < cfg.anchors_per_iter {
        log::warn!(
            "anchors_per_iter {} capped at the {anchors} graph nodes",
            cfg.anchors_per_iter
        );
    }
    Ok(TrainConfig {
        anchors_per_iter: anchors,
        ..cfg.clone()
    })
}

/// Forward-only evaluation of the combined objective, as timed by OT
/// benchmarks.
pub fn loss_forward(
    ops: &GraphOperators,
    params: &ModelParams,
    anchors: Vec<usize>,
    subgraphs: Vec<Subgraph>,
    noise: Tensor,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    let tape = Tape::new();
    let vars = params.freeze(&tape);
    let h = gnn::encode(ops, &vars)?;
    let emb = gnn::sge_with_noise(ops, h, &vars, noise)?;
    let batch = ContrastBatch::new(anchors, subgraphs, h, emb.sample)?;
    Ok(batch_loss(&batch, emb.mu, emb.log_sigma, &cfg.loss(), &cfg.ot)?.1)
}

/// Trains encoder and embedding head from a seeded initialization. An
/// `anchors_per_iter` above the node count is capped at it.
pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(g, cfg, |_| {})
}

/// As [`train`], calling `progress` after every iteration.
pub fn train_with_progress(
    g: &Graph,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&IterationLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cfg = &batch_config(g, cfg)?;
    let ops = GraphOperators::new(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg.dims(g.num_features()), &mut rng);
    let mut adam = AdamState::new(params.tensors());
    let mut trace = Vec::with_capacity(cfg.epochs);

    for iteration in 0..cfg.epochs {
        let diverged = |message: String| Error::Divergence {
            iteration,
            message: format!(
                "{message}; config: {}",
                serde_json::to_string(cfg).unwrap_or_else(|_| format!("{cfg:?}"))
            ),
        };
        let (anchors, subgraphs) = anchors_and_subgraphs(g, &mut rng, cfg)?;
        let noise = gnn::standard_normal(&mut rng, g.num_nodes(), cfg.embed_dim);
        let (parts, mut grads) =
            match loss_and_gradients(&ops, &params, anchors, subgraphs, noise, cfg) {
                Ok(r) => r,
                Err(Error::Domain(m)) => return Err(diverged(m)),
                Err(e) => return Err(e),
            };
        if !parts.total.is_finite() {
            return Err(diverged(format!("loss is {}", parts.total)));
        }
        if cfg.weight_decay > 0.0 {
            for (g, p) in grads.iter_mut().zip(params.tensors()) {
                for (gi, pi) in g.data_mut().iter_mut().zip(p.data()) {
                    *gi += cfg.weight_decay * pi;
                }
            }
        }
        adam_step(&mut params, &grads, &mut adam, cfg.learning_rate).map_err(|e| match e {
            Error::Domain(m) => diverged(m),
            e => e,
        })?;
        let log = IterationLog {
            iteration,
            total: parts.total,
            wasserstein: parts.wasserstein,
            gromov: parts.gromov,
            kl: parts.kl,
        };
        log::debug!("iteration {iteration}: loss {}", parts.total);
        progress(&log);
        trace.push(log);
    }
    let embeddings = gnn::embed(&ops, &params)?;
    Ok(TrainOutcome {
        params,
        embeddings,
        trace,
    })
}

/// Writes the loss trace as TSV; skipped terms are written as `NA`.
pub fn write_trace_tsv(trace: &[IterationLog], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iteration\ttotal\twasserstein\tgromov\tkl")?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in trace {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.iteration,
            r.total,
            opt(r.wasserstein),
            opt(r.gromov),
            r.kl
        )?;
    }
    Ok(())
}

/// Mean `|μ|` and mean `|σ - 1|` over `nodes` under frozen parameters.
pub fn posterior_stats(g: &Graph, params: &ModelParams, nodes: &[usize]) -> Result<(f64, f64)> {
    if nodes.is_empty() {
        return Err(Error::contract("posterior statistics over no nodes"));
    }
    let ops = GraphOperators::new(g)?;
    let tape = Tape::new();
    let vars = params.freeze(&tape);
    let h = gnn::encode(&ops, &vars)?;
    let width = params.dims().embed;
    let emb = gnn::sge_with_noise(&ops, h, &vars, Tensor::zeros(&[g.num_nodes(), width]))?;
    let (mu, ls) = (emb.mu.value(), emb.log_sigma.value());
    let count = (nodes.len() * width) as f64;
    let mut abs_mu = 0.0;
    let mut sigma_gap = 0.0;
    for &v in nodes {
        abs_mu += mu.row(v).iter().map(|x| x.abs()).sum::<f64>();
        sigma_gap += ls.row(v).iter().map(|l| (l.exp() - 1.0).abs()).sum::<f64>();
    }
    Ok((abs_mu / count, sigma_gap / count))
}
