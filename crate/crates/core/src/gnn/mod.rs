//! Two-layer GCN encoder and the subgraph Gaussian embedding head
//! (GraphSAGE followed by two single-head GAT layers for the mean and the
//! log standard deviation).

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::tensor::{CsrMatrix, Tape, Tensor, Var};

/// Negative slope of the attention-score leaky ReLU.
pub const ATTENTION_SLOPE: f64 = 0.2;
/// Bounds applied to the log standard deviation before exponentiation.
pub const LOG_SIGMA_RANGE: (f64, f64) = (-10.0, 10.0);
const PRELU_INIT: f64 = 0.25;

/// Layer widths: input features `C`, first hidden layer `F1`, embedding
/// `F`, GraphSAGE output `Fs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub embed: usize,
    pub sage: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    /// `Fs x F` projection.
    pub weight: Tensor,
    /// `2F x 1` attention vector; the first half scores the receiving node,
    /// the second half the neighbor.
    pub attention: Tensor,
}

/// All trainable weights. Slopes are one-element tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub theta1: Tensor,
    pub theta2: Tensor,
    pub slope1: Tensor,
    pub slope2: Tensor,
    pub sage_self: Tensor,
    pub sage_neighbor: Tensor,
    pub sage_slope: Tensor,
    pub gat_mu: GatParams,
    pub gat_sigma: GatParams,
}

/// Number of parameter tensors in [`ModelParams`].
pub const NUM_PARAMS: usize = 11;

/// Parameter names in the order used by [`ModelParams::tensors`].
pub const PARAM_NAMES: [&str; NUM_PARAMS] = [
    "encoder.theta1",
    "encoder.theta2",
    "encoder.slope1",
    "encoder.slope2",
    "sage.self",
    "sage.neighbor",
    "sage.slope",
    "gat_mu.weight",
    "gat_mu.attention",
    "gat_sigma.weight",
    "gat_sigma.attention",
];

fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite glorot bound");
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Tensor::matrix(fan_in, fan_out, data).expect("glorot shape")
}

impl ModelParams {
    /// Glorot-uniform weights and PReLU slopes of 0.25.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let ModelDims {
            input,
            hidden,
            embed,
            sage,
        } = dims;
        let gat = |rng: &mut R| GatParams {
            weight: glorot(rng, sage, embed),
            attention: glorot(rng, 2 * embed, 1),
        };
        Self {
            theta1: glorot(rng, input, hidden),
            theta2: glorot(rng, hidden, embed),
            slope1: Tensor::full(&[1], PRELU_INIT),
            slope2: Tensor::full(&[1], PRELU_INIT),
            sage_self: glorot(rng, embed, sage),
            sage_neighbor: glorot(rng, embed, sage),
            sage_slope: Tensor::full(&[1], PRELU_INIT),
            gat_mu: gat(rng),
            gat_sigma: gat(rng),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.theta1.shape()[0],
            hidden: self.theta1.shape()[1],
            embed: self.theta2.shape()[1],
            sage: self.sage_self.shape()[1],
        }
    }

    pub fn tensors(&self) -> [&Tensor; NUM_PARAMS] {
        [
            &self.theta1,
            &self.theta2,
            &self.slope1,
            &self.slope2,
            &self.sage_self,
            &self.sage_neighbor,
            &self.sage_slope,
            &self.gat_mu.weight,
            &self.gat_mu.attention,
            &self.gat_sigma.weight,
            &self.gat_sigma.attention,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; NUM_PARAMS] {
        [
            &mut self.theta1,
            &mut self.theta2,
            &mut self.slope1,
            &mut self.slope2,
            &mut self.sage_self,
            &mut self.sage_neighbor,
            &mut self.sage_slope,
            &mut self.gat_mu.weight,
            &mut self.gat_mu.attention,
            &mut self.gat_sigma.weight,
            &mut self.gat_sigma.attention,
        ]
    }

    /// Rebuilds parameters from tensors in [`PARAM_NAMES`] order, checking
    /// that the shapes chain.
    pub fn from_tensors(t: [Tensor; NUM_PARAMS]) -> Result<Self> {
        let [theta1, theta2, slope1, slope2, sage_self, sage_neighbor, sage_slope, mu_w, mu_a, sigma_w, sigma_a] =
            t;
        let params = Self {
            theta1,
            theta2,
            slope1,
            slope2,
            sage_self,
            sage_neighbor,
            sage_slope,
            gat_mu: GatParams {
                weight: mu_w,
                attention: mu_a,
            },
            gat_sigma: GatParams {
                weight: sigma_w,
                attention: sigma_a,
            },
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in PARAM_NAMES.iter().zip(self.tensors()) {
            let scalar = name.contains("slope");
            let ok = if scalar {
                t.numel() == 1
            } else {
                t.rank() == 2
            };
            if !ok {
                return Err(Error::dim(format!("{name} has shape {:?}", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::Domain(format!("{name} has non-finite entries")));
            }
        }
        let d = self.dims();
        let expect = [
            ("encoder.theta2", &self.theta2, [d.hidden, d.embed]),
            ("sage.self", &self.sage_self, [d.embed, d.sage]),
            ("sage.neighbor", &self.sage_neighbor, [d.embed, d.sage]),
            ("gat_mu.weight", &self.gat_mu.weight, [d.sage, d.embed]),
            ("gat_mu.attention", &self.gat_mu.attention, [2 * d.embed, 1]),
            (
                "gat_sigma.weight",
                &self.gat_sigma.weight,
                [d.sage, d.embed],
            ),
            (
                "gat_sigma.attention",
                &self.gat_sigma.attention,
                [2 * d.embed, 1],
            ),
        ];
        for (name, t, shape) in expect {
            if t.shape() != shape {
                return Err(Error::dim(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    /// Records every parameter as a trainable leaf.
    pub fn track<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        self.record(tape, true)
    }

    /// Records every parameter as a constant.
    pub fn freeze<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        self.record(tape, false)
    }

    fn record<'t>(&self, tape: &'t Tape, tracked: bool) -> ParamVars<'t> {
        let put = |t: &Tensor| {
            if tracked {
                tape.leaf(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        ParamVars {
            theta1: put(&self.theta1),
            theta2: put(&self.theta2),
            slope1: put(&self.slope1),
            slope2: put(&self.slope2),
            sage_self: put(&self.sage_self),
            sage_neighbor: put(&self.sage_neighbor),
            sage_slope: put(&self.sage_slope),
            gat_mu: GatVars {
                weight: put(&self.gat_mu.weight),
                attention: put(&self.gat_mu.attention),
            },
            gat_sigma: GatVars {
                weight: put(&self.gat_sigma.weight),
                attention: put(&self.gat_sigma.attention),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GatVars<'t> {
    pub weight: Var<'t>,
    pub attention: Var<'t>,
}

/// Parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars<'t> {
    pub theta1: Var<'t>,
    pub theta2: Var<'t>,
    pub slope1: Var<'t>,
    pub slope2: Var<'t>,
    pub sage_self: Var<'t>,
    pub sage_neighbor: Var<'t>,
    pub sage_slope: Var<'t>,
    pub gat_mu: GatVars<'t>,
    pub gat_sigma: GatVars<'t>,
}

impl<'t> ParamVars<'t> {
    pub fn all(&self) -> [Var<'t>; NUM_PARAMS] {
        [
            self.theta1,
            self.theta2,
            self.slope1,
            self.slope2,
            self.sage_self,
            self.sage_neighbor,
            self.sage_slope,
            self.gat_mu.weight,
            self.gat_mu.attention,
            self.gat_sigma.weight,
            self.gat_sigma.attention,
        ]
    }
}

/// Constant per-graph operators shared by every forward pass.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    features: Rc<CsrMatrix>,
    adjacency: Rc<CsrMatrix>,
    neighbor_mean: Rc<CsrMatrix>,
    edge_src: Rc<[usize]>,
    edge_dst: Rc<[usize]>,
    edge_ptr: Rc<[usize]>,
    incidence: Rc<CsrMatrix>,
}

impl GraphOperators {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        let features = CsrMatrix::from_dense(g.features())?;

        let mut mean_ptr = vec![0];
        let mut mean_idx = Vec::new();
        let mut mean_val = Vec::new();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut ptr = vec![0];
        for i in 0..n {
            let nbrs = g.neighbors(i);
            let w = 1.0 / nbrs.len().max(1) as f64;
            mean_idx.extend_from_slice(nbrs);
            mean_val.extend(std::iter::repeat_n(w, nbrs.len()));
            mean_ptr.push(mean_idx.len());

            let pos = nbrs.partition_point(|&j| j < i);
            for &j in nbrs[..pos]
                .iter()
                .chain(std::iter::once(&i))
                .chain(&nbrs[pos..])
            {
                src.push(i);
                dst.push(j);
            }
            ptr.push(src.len());
        }
        let neighbor_mean = CsrMatrix::new(n, n, mean_ptr, mean_idx, mean_val)?;
        let e = src.len();
        let incidence = CsrMatrix::new(n, e, ptr.clone(), (0..e).collect(), vec![1.0; e])?;
        Ok(Self {
            features: Rc::new(features),
            adjacency: Rc::new(normalize_adjacency(g)),
            neighbor_mean: Rc::new(neighbor_mean),
            edge_src: src.into(),
            edge_dst: dst.into(),
            edge_ptr: ptr.into(),
            incidence: Rc::new(incidence),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Attention edges `(receiver, sender)` including one self-loop per
    /// node, grouped by receiver.
    pub fn attention_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edge_src
            .iter()
            .copied()
            .zip(self.edge_dst.iter().copied())
    }
}

/// `H1 = prelu(Â X Θ1)`, `H = prelu(Â H1 Θ2)`.
pub fn encode<'t>(ops: &GraphOperators, p: &ParamVars<'t>) -> Result<Var<'t>> {
    let h1 = p
        .theta1
        .spmm(Rc::clone(&ops.features))?
        .spmm(Rc::clone(&ops.adjacency))?
        .prelu(p.slope1)?;
    h1.matmul(p.theta2)?
        .spmm(Rc::clone(&ops.adjacency))?
        .prelu(p.slope2)
}

/// `prelu(H W_self + mean_{j ∈ N(i)} h_j W_neighbor)`.
pub fn sage_layer<'t>(ops: &GraphOperators, h: Var<'t>, p: &ParamVars<'t>) -> Result<Var<'t>> {
    let own = h.matmul(p.sage_self)?;
    let nbr = h
        .spmm(Rc::clone(&ops.neighbor_mean))?
        .matmul(p.sage_neighbor)?;
    own.add(nbr)?.prelu(p.sage_slope)
}

/// Attention coefficients, one per [`GraphOperators::attention_edges`]
/// entry, together with the projected features `W h`.
pub fn gat_attention<'t>(
    ops: &GraphOperators,
    h: Var<'t>,
    gat: &GatVars<'t>,
) -> Result<(Var<'t>, Var<'t>)> {
    let wh = h.matmul(gat.weight)?;
    let f = wh.shape()[1];
    let a_self = gat.attention.gather_rows((0..f).collect())?;
    let a_nbr = gat.attention.gather_rows((f..2 * f).collect())?;
    let score_self = wh.matmul(a_self)?.gather_rows(Rc::clone(&ops.edge_src))?;
    let score_nbr = wh.matmul(a_nbr)?.gather_rows(Rc::clone(&ops.edge_dst))?;
    let alpha = score_self
        .add(score_nbr)?
        .leaky_relu(ATTENTION_SLOPE)?
        .segment_softmax(Rc::clone(&ops.edge_ptr))?;
    Ok((alpha, wh))
}

/// `out_i = Σ_j α_ij W h_j` over neighbors and self; no output activation.
pub fn gat_layer<'t>(ops: &GraphOperators, h: Var<'t>, gat: &GatVars<'t>) -> Result<Var<'t>> {
    let (alpha, wh) = gat_attention(ops, h, gat)?;
    wh.gather_rows(Rc::clone(&ops.edge_dst))?
        .scale_rows(alpha)?
        .spmm(Rc::clone(&ops.incidence))
}

/// Outputs of the Gaussian embedding head.
#[derive(Debug, Clone)]
pub struct GaussianEmbedding<'t> {
    pub mu: Var<'t>,
    /// Clamped to [`LOG_SIGMA_RANGE`].
    pub log_sigma: Var<'t>,
    pub sample: Var<'t>,
    /// The standard-normal draw used for `sample`.
    pub noise: Tensor,
}

/// `ε` with i.i.d. standard-normal entries.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Tensor::matrix(rows, cols, data).expect("noise shape")
}

/// Runs SAGE and both GAT heads on `h`, drawing fresh noise from `rng`.
pub fn sge_forward<'t, R: Rng + ?Sized>(
    ops: &GraphOperators,
    h: Var<'t>,
    p: &ParamVars<'t>,
    rng: &mut R,
) -> Result<GaussianEmbedding<'t>> {
    let shape = p.gat_mu.weight.shape();
    let noise = standard_normal(rng, ops.num_nodes(), shape[1]);
    sge_with_noise(ops, h, p, noise)
}

/// As [`sge_forward`] with a caller-supplied noise matrix.
pub fn sge_with_noise<'t>(
    ops: &GraphOperators,
    h: Var<'t>,
    p: &ParamVars<'t>,
    noise: Tensor,
) -> Result<GaussianEmbedding<'t>> {
    let hs = sage_layer(ops, h, p)?;
    let mu = gat_layer(ops, hs, &p.gat_mu)?;
    let log_sigma =
        gat_layer(ops, hs, &p.gat_sigma)?.clamp(LOG_SIGMA_RANGE.0, LOG_SIGMA_RANGE.1)?;
    let sample = reparameterize(mu, log_sigma, &noise)?;
    Ok(GaussianEmbedding {
        mu,
        log_sigma,
        sample,
        noise,
    })
}

/// `μ + exp(log σ) ⊙ ε`.
pub fn reparameterize<'t>(mu: Var<'t>, log_sigma: Var<'t>, noise: &Tensor) -> Result<Var<'t>> {
    let eps = mu.tape().constant(noise.clone());
    mu.add(log_sigma.exp()?.mul(eps)?)
}

/// Encoder output for evaluation, computed without tracking gradients.
pub fn embed(ops: &GraphOperators, params: &ModelParams) -> Result<Tensor> {
    let tape = Tape::new();
    let vars = params.freeze(&tape);
    Ok((*encode(ops, &vars)?.value()).clone())
}
