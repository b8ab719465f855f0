//! Contrastive objectives over a batch of BFS subgraphs.
//!
//! Every anchor `i` contributes one InfoNCE term whose positive is the
//! distance between its encoder view `X^i` and its Gaussian view `X̃^i`, and
//! whose negatives are the distances from `X^i` to every other anchor's
//! `X̃^j` and `X^j`:
//!
//! ```text
//! l_i = D(X^i, X̃^i) / τ + log Σ_{j≠i} [exp(-D(X^i, X̃^j) / τ) + exp(-D(X^i, X^j) / τ)]
//! ```
//!
//! `D` is either the Wasserstein or the Gromov-Wasserstein distance under the
//! cosine ground cost. Transport plans are solved off the tape (in parallel)
//! and then held fixed, so each distance is a linear functional of cost
//! entries; the functionals are stacked into one constant sparse matrix and
//! applied to the taped cost matrices, which carries gradients back into the
//! features.

use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Subgraph;
use crate::ot::{self, FwConfig, Solver, Support, NORM_EPS};
use crate::tensor::{CsrMatrix, Tensor, Var};

/// Largest value of `-log(numerator)` before it is floored.
pub const LOG_NUMERATOR_FLOOR: f64 = 700.0;

/// Weights of the combined objective and the shared temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Balance between the Wasserstein (`alpha`) and Gromov-Wasserstein
    /// (`1 - alpha`) terms.
    pub alpha: f64,
    /// Weight of the KL regularizer.
    pub beta: f64,
    /// Temperature of both the ground cost and the InfoNCE logits.
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1e-3,
            tau: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::contract(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::contract(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::contract(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Solver choices for the pairwise distances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OtSettings {
    /// Solver for the Wasserstein terms.
    #[serde(default)]
    pub solver: Solver,
    /// Frank-Wolfe limits for the Gromov-Wasserstein terms.
    #[serde(default)]
    pub frank_wolfe: FwConfig,
}

/// Anchors, their subgraphs, and the two feature views of every subgraph
/// node, stacked subgraph after subgraph.
pub struct ContrastBatch<'t> {
    anchors: Vec<usize>,
    subgraphs: Vec<Subgraph>,
    offsets: Vec<usize>,
    orig: Var<'t>,
    emb: Var<'t>,
}

impl<'t> ContrastBatch<'t> {
    /// Slices the rows of `orig` (encoder output) and `emb` (Gaussian
    /// embedding) belonging to each subgraph, in subgraph node order.
    pub fn new(
        anchors: Vec<usize>,
        subgraphs: Vec<Subgraph>,
        orig: Var<'t>,
        emb: Var<'t>,
    ) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::contract(format!(
                "a contrastive batch needs at least 2 anchors, got {}",
                anchors.len()
            )));
        }
        if subgraphs.len() != anchors.len() {
            return Err(Error::contract(format!(
                "{} anchors but {} subgraphs",
                anchors.len(),
                subgraphs.len()
            )));
        }
        let (orig_shape, emb_shape) = (orig.shape(), emb.shape());
        if orig_shape.len() != 2 || orig_shape != emb_shape {
            return Err(Error::dim(format!(
                "feature views must be matrices of equal shape, got {orig_shape:?} and {emb_shape:?}"
            )));
        }
        let n = orig_shape[0];
        let mut offsets = vec![0];
        let mut rows = Vec::new();
        for (a, sg) in anchors.iter().zip(&subgraphs) {
            let k = sg.len();
            if k == 0 {
                return Err(Error::contract(format!("subgraph of anchor {a} is empty")));
            }
            if sg.adj.shape() != [k, k] {
                return Err(Error::dim(format!(
                    "subgraph of anchor {a} has {k} nodes but adjacency {:?}",
                    sg.adj.shape()
                )));
            }
            if let Some(&bad) = sg.nodes.iter().find(|&&v| v >= n) {
                return Err(Error::Index {
                    index: bad,
                    limit: n,
                });
            }
            rows.extend_from_slice(&sg.nodes);
            offsets.push(rows.len());
        }
        let rows: Rc<[usize]> = rows.into();
        Ok(Self {
            anchors,
            subgraphs,
            offsets,
            orig: orig.gather_rows(rows.clone())?,
            emb: emb.gather_rows(rows)?,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn subgraphs(&self) -> &[Subgraph] {
        &self.subgraphs
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn slice(view: &Tensor, range: std::ops::Range<usize>) -> Tensor {
        let cols = view.cols();
        Tensor::matrix(
            range.len(),
            cols,
            view.data()[range.start * cols..range.end * cols].to_vec(),
        )
        .expect("slice of a stacked view")
    }

    /// Encoder features of subgraph `i` (`k^i x F`).
    pub fn orig_feats(&self, i: usize) -> Tensor {
        Self::slice(&self.orig.value(), self.range(i))
    }

    /// Gaussian-embedded features of subgraph `i` (`k^i x F`).
    pub fn emb_feats(&self, i: usize) -> Tensor {
        Self::slice(&self.emb.value(), self.range(i))
    }

    /// Sorted, de-duplicated ids of every node in any subgraph.
    pub fn member_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .subgraphs
            .iter()
            .flat_map(|s| s.nodes.iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// Closed-form `KL(N(μ, σ²) || N(0, I))` averaged over the rows `members`:
/// `(1 / 2|P|) Σ (μ² + σ² - 1 - 2 log σ)`.
pub fn kl_regularizer<'t>(mu: Var<'t>, log_sigma: Var<'t>, members: &[usize]) -> Result<Var<'t>> {
    if members.is_empty() {
        return Err(Error::contract("KL regularizer over an empty node set"));
    }
    if mu.shape() != log_sigma.shape() || mu.shape().len() != 2 {
        return Err(Error::dim(format!(
            "mu {:?} and log_sigma {:?} must be matrices of equal shape",
            mu.shape(),
            log_sigma.shape()
        )));
    }
    let index: Rc<[usize]> = members.into();
    let mu = mu.gather_rows(index.clone())?;
    let ls = log_sigma.gather_rows(index)?;
    let width = mu.shape()[1];
    let tape = mu.tape();
    let squares = mu.mul(mu)?.sum()?;
    let variances = ls.scale(2.0)?.exp()?.sum()?;
    let logs = ls.sum()?.scale(2.0)?;
    let ones = tape.constant(Tensor::scalar((members.len() * width) as f64));
    squares
        .add(variances)?
        .sub(ones)?
        .sub(logs)?
        .scale(0.5 / members.len() as f64)
}

/// `alpha L_W + (1 - alpha) L_GW + beta KL`.
pub fn total_loss<'t>(
    l_w: Var<'t>,
    l_gw: Var<'t>,
    kl: Var<'t>,
    cfg: &LossConfig,
) -> Result<Var<'t>> {
    cfg.validate()?;
    l_w.scale(cfg.alpha)?
        .add(l_gw.scale(1.0 - cfg.alpha)?)?
        .add(kl.scale(cfg.beta)?)
}

/// InfoNCE over Wasserstein distances.
pub fn infonce_w<'t>(
    batch: &ContrastBatch<'t>,
    tau: f64,
    settings: &OtSettings,
) -> Result<Var<'t>> {
    let costs = BatchCosts::build(batch, tau, Need::Wasserstein)?;
    infonce(batch, &costs, tau, Distance::Wasserstein, settings)
}

/// InfoNCE over Gromov-Wasserstein distances. The intra-subgraph metrics are
/// the feature costs; adjacencies are validated by [`ContrastBatch::new`]
/// but do not enter the metric.
pub fn infonce_gw<'t>(
    batch: &ContrastBatch<'t>,
    tau: f64,
    settings: &OtSettings,
) -> Result<Var<'t>> {
    let costs = BatchCosts::build(batch, tau, Need::Gromov)?;
    infonce(batch, &costs, tau, Distance::Gromov, settings)
}

/// Values of the terms that went into a [`batch_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// `None` when its weight is zero and it was skipped.
    pub wasserstein: Option<f64>,
    pub gromov: Option<f64>,
    pub kl: f64,
}

/// The combined objective for one batch. Terms with zero weight are not
/// computed; the KL value is always reported.
pub fn batch_loss<'t>(
    batch: &ContrastBatch<'t>,
    mu: Var<'t>,
    log_sigma: Var<'t>,
    cfg: &LossConfig,
    settings: &OtSettings,
) -> Result<(Var<'t>, LossParts)> {
    cfg.validate()?;
    let tape = mu.tape();
    let need = match (cfg.alpha > 0.0, cfg.alpha < 1.0) {
        (true, true) => Need::Both,
        (true, false) => Need::Wasserstein,
        _ => Need::Gromov,
    };
    let costs = BatchCosts::build(batch, cfg.tau, need)?;
    let l_w = match cfg.alpha > 0.0 {
        true => Some(infonce(
            batch,
            &costs,
            cfg.tau,
            Distance::Wasserstein,
            settings,
        )?),
        false => None,
    };
    let l_gw = match cfg.alpha < 1.0 {
        true => Some(infonce(batch, &costs, cfg.tau, Distance::Gromov, settings)?),
        false => None,
    };
    let kl = kl_regularizer(mu, log_sigma, &batch.member_nodes())?;
    let zero = || tape.constant(Tensor::scalar(0.0));
    let kl_term = if cfg.beta > 0.0 { kl } else { zero() };
    let total = total_loss(
        l_w.unwrap_or_else(zero),
        l_gw.unwrap_or_else(zero),
        kl_term,
        cfg,
    )?;
    let scalar = |v: Var<'_>| v.value().data()[0];
    let parts = LossParts {
        total: scalar(total),
        wasserstein: l_w.map(scalar),
        gromov: l_gw.map(scalar),
        kl: scalar(kl),
    };
    Ok((total, parts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distance {
    Wasserstein,
    Gromov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Need {
    Wasserstein,
    Gromov,
    Both,
}

/// Cost matrices on the tape, flattened into one column:
/// `[vec(C_oe); vec(C_oo); vec(C_ee^0); vec(C_ee^1); ...]` where `C_oe`
/// pairs every encoder row with every embedded row (`R x R`), `C_oo` pairs
/// encoder rows, and `C_ee^i` is subgraph `i`'s own embedded block. `C_oe`
/// is omitted when only Gromov-Wasserstein is needed and the `C_ee` blocks
/// when only Wasserstein is.
///
/// Gromov-Wasserstein plans are solved on per-subgraph costs rebuilt with
/// [`ot::cost_matrix`], so they agree bit for bit with standalone solves;
/// the taped blocks carry the gradients.
struct BatchCosts<'t> {
    flat: Var<'t>,
    rows: usize,
    oe: Option<(usize, Rc<Tensor>)>,
    oo: (usize, Rc<Tensor>),
    ee: Vec<(usize, Tensor)>,
    intra: Vec<(ot::Metric, ot::Metric)>,
}

fn cosine_cost<'t>(a: Var<'t>, b: Var<'t>, tau: f64) -> Result<Var<'t>> {
    a.matmul(b.transpose()?)?.scale(-1.0 / tau)?.exp()
}

impl<'t> BatchCosts<'t> {
    fn build(batch: &ContrastBatch<'t>, tau: f64, need: Need) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::contract(format!("tau must be positive, got {tau}")));
        }
        let rows = *batch.offsets.last().expect("offsets start at 0");
        let orig = batch.orig.l2_row_normalize(NORM_EPS)?;
        let emb = batch.emb.l2_row_normalize(NORM_EPS)?;
        let mut parts = Vec::new();
        let mut cursor = 0;
        let mut push = |m: Var<'t>, parts: &mut Vec<Var<'t>>| -> Result<usize> {
            let n = m.value().numel();
            parts.push(m.reshape(&[n, 1])?);
            let at = cursor;
            cursor += n;
            Ok(at)
        };
        let oe = match need {
            Need::Gromov => None,
            _ => {
                let c = cosine_cost(orig, emb, tau)?;
                Some((push(c, &mut parts)?, c.value()))
            }
        };
        let c_oo = cosine_cost(orig, orig, tau)?;
        let oo = (push(c_oo, &mut parts)?, c_oo.value());
        let mut ee = Vec::new();
        let mut intra = Vec::new();
        if need != Need::Wasserstein {
            for i in 0..batch.len() {
                let (xo, xe) = (batch.orig_feats(i), batch.emb_feats(i));
                let k = xo.rows();
                let metric = |x: &Tensor| -> Result<ot::Metric> {
                    Ok(ot::Metric::new(
                        ot::cost_matrix(x, x, tau)?.data().to_vec(),
                        k,
                    ))
                };
                intra.push((metric(&xo)?, metric(&xe)?));
                let r = batch.range(i);
                let block = emb.gather_rows(r.collect::<Vec<_>>().into())?;
                let c = cosine_cost(block, block, tau)?;
                ee.push((push(c, &mut parts)?, (*c.value()).clone()));
            }
        }
        Ok(Self {
            flat: Var::concat_rows(&parts)?,
            rows,
            oe,
            oo,
            ee,
            intra,
        })
    }

    fn view<'a>(&'a self, offsets: &'a [usize]) -> CostView<'a> {
        CostView {
            offsets,
            rows: self.rows,
            oe: self.oe.as_ref().map(|(b, t)| (*b, &**t)),
            oo: (self.oo.0, &*self.oo.1),
            ee: self.ee.iter().map(|(b, t)| (*b, t)).collect(),
            intra: &self.intra,
        }
    }
}

/// Tape-free view of [`BatchCosts`] shared with the solver threads.
struct CostView<'a> {
    offsets: &'a [usize],
    rows: usize,
    oe: Option<(usize, &'a Tensor)>,
    oo: (usize, &'a Tensor),
    ee: Vec<(usize, &'a Tensor)>,
    intra: &'a [(ot::Metric, ot::Metric)],
}

impl CostView<'_> {
    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Copies block `(ri, rj)` of a stacked `R x R` cost.
    fn block(
        &self,
        full: &Tensor,
        ri: std::ops::Range<usize>,
        rj: std::ops::Range<usize>,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(ri.len() * rj.len());
        for r in ri {
            out.extend_from_slice(&full.data()[r * self.rows + rj.start..r * self.rows + rj.end]);
        }
        out
    }
}

/// Which two views a distance compares: `(anchor i, encoder)` against
/// `(anchor j, embedded)` or `(anchor j, encoder)`.
#[derive(Debug, Clone, Copy)]
enum Pair {
    Emb(usize, usize),
    Orig(usize, usize),
}

/// Linear functional over the flattened costs: `(column, coefficient)`.
type Functional = Vec<(usize, f64)>;

fn solve_w(problem: (&[f64], usize, usize), solver: Solver) -> Result<Support> {
    let (cost, ka, kb) = problem;
    match solver {
        Solver::Exact => Ok(ot::exact_support(cost, ka, kb)),
        Solver::Auto if ka.max(kb) <= ot::AUTO_EXACT_LIMIT => Ok(ot::exact_support(cost, ka, kb)),
        s => {
            let c = Tensor::matrix(ka, kb, cost.to_vec())?;
            Ok(ot::transport(&c, s)?.1.support())
        }
    }
}

fn infonce<'t>(
    batch: &ContrastBatch<'t>,
    costs: &BatchCosts<'t>,
    tau: f64,
    kind: Distance,
    settings: &OtSettings,
) -> Result<Var<'t>> {
    let s = batch.len();
    // Orig-orig pairs are symmetric, so each unordered pair is solved once.
    let mut pairs = Vec::with_capacity(s * s + s * (s - 1) / 2);
    for i in 0..s {
        for j in 0..s {
            pairs.push(Pair::Emb(i, j));
        }
        for j in (i + 1)..s {
            pairs.push(Pair::Orig(i, j));
        }
    }
    let view = costs.view(&batch.offsets);
    let functionals: Vec<Functional> = ot::thread_pool().install(|| {
        pairs
            .par_iter()
            .map(|&p| match kind {
                Distance::Wasserstein => wasserstein_functional(&view, p, settings.solver),
                Distance::Gromov => Ok(gromov_functional(&view, p, settings.frank_wolfe)),
            })
            .collect::<Result<Vec<_>>>()
    })?;

    // Row layout: anchor i's positive at row i of the first block; its
    // negatives at rows s + i (2s - 2) + slot, embedded views first.
    let negs = 2 * (s - 1);
    let mut rows: Vec<Option<&Functional>> = vec![None; s + s * negs];
    let slot = |i: usize, j: usize| if j < i { j } else { j - 1 };
    for (p, f) in pairs.iter().zip(&functionals) {
        match *p {
            Pair::Emb(i, j) if i == j => rows[i] = Some(f),
            Pair::Emb(i, j) => rows[s + i * negs + slot(i, j)] = Some(f),
            Pair::Orig(i, j) => {
                rows[s + i * negs + (s - 1) + slot(i, j)] = Some(f);
                rows[s + j * negs + (s - 1) + slot(j, i)] = Some(f);
            }
        }
    }
    let filled: Vec<&Functional> = rows
        .into_iter()
        .map(|r| r.expect("every row is filled"))
        .collect();
    let nnz = filled.iter().map(|f| f.len()).sum();
    let mut indptr = Vec::with_capacity(filled.len() + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for f in &filled {
        if f.windows(2).all(|w| w[0].0 < w[1].0) {
            indices.extend(f.iter().map(|e| e.0));
            values.extend(f.iter().map(|e| e.1));
        } else {
            let mut f = f.to_vec();
            f.sort_unstable_by_key(|e| e.0);
            let start = indices.len();
            for (c, v) in f {
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
        }
        indptr.push(indices.len());
    }
    let width = costs.flat.value().numel();
    let m = Rc::new(CsrMatrix::new(
        filled.len(),
        width,
        indptr,
        indices,
        values,
    )?);
    let distances = costs.flat.spmm(m)?;
    let positive_index: Rc<[usize]> = (0..s).collect::<Vec<_>>().into();
    let negative_index: Rc<[usize]> = (s..s + s * negs).collect::<Vec<_>>().into();
    let positive = distances.gather_rows(positive_index)?;
    let negatives = distances.gather_rows(negative_index)?.reshape(&[s, negs])?;
    infonce_from_distances(positive, negatives, tau)
}

/// The InfoNCE reduction given distances: `positive` is `s x 1`, row `i` of
/// `negatives` holds anchor `i`'s negative distances. Returns
/// `Σ_i [min(p_i / τ, 700) + log Σ_j exp(-n_ij / τ)]`, with the
/// log-sum-exp shifted by each row's maximum.
pub fn infonce_from_distances<'t>(
    positive: Var<'t>,
    negatives: Var<'t>,
    tau: f64,
) -> Result<Var<'t>> {
    let shape = negatives.shape();
    if shape.len() != 2 || shape[1] == 0 || positive.shape() != [shape[0], 1] {
        return Err(Error::dim(format!(
            "InfoNCE needs s x 1 positives and non-empty s x m negatives, got {:?} and {shape:?}",
            positive.shape()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::contract(format!("tau must be positive, got {tau}")));
    }
    let (s, negs) = (shape[0], shape[1]);
    let tape = positive.tape();
    let logits = negatives.scale(-1.0 / tau)?;
    let maxima: Vec<f64> = logits
        .value()
        .data()
        .chunks(negs)
        .map(|r| r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect();
    let shift = tape.constant(Tensor::matrix(
        s,
        negs,
        maxima
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m, negs))
            .collect(),
    )?);
    let log_denominator = logits
        .sub(shift)?
        .exp()?
        .sum_rows()?
        .log()?
        .add(tape.constant(Tensor::column(maxima)))?;
    positive
        .scale(1.0 / tau)?
        .clamp(f64::NEG_INFINITY, LOG_NUMERATOR_FLOOR)?
        .add(log_denominator)?
        .sum()
}

fn wasserstein_functional(costs: &CostView<'_>, pair: Pair, solver: Solver) -> Result<Functional> {
    let (i, j, (base, full)) = match pair {
        Pair::Emb(i, j) => (i, j, costs.oe.expect("Wasserstein costs present")),
        Pair::Orig(i, j) => (i, j, costs.oo),
    };
    let (ri, rj) = (costs.range(i), costs.range(j));
    let block = costs.block(full, ri.clone(), rj.clone());
    let support = solve_w((&block, ri.len(), rj.len()), solver)?;
    Ok(support
        .into_iter()
        .map(|(m, n, w)| (base + (ri.start + m) * costs.rows + rj.start + n, w))
        .collect())
}

fn gromov_functional(costs: &CostView<'_>, pair: Pair, fw: FwConfig) -> Functional {
    let (i, j) = match pair {
        Pair::Emb(i, j) | Pair::Orig(i, j) => (i, j),
    };
    let da = &costs.intra[i].0;
    let db = match pair {
        Pair::Emb(..) => &costs.intra[j].1,
        Pair::Orig(..) => &costs.intra[j].0,
    };
    let (ka, kb) = (da.size(), db.size());
    let (_, support, _) = ot::gw_between(da, db, fw);
    let (ga, gb) = ot::gw_support_gradients(da.data(), db.data(), ka, kb, &support);
    let mut functional = Vec::with_capacity(ga.len() + gb.len());
    let orig_start = |i: usize| costs.oo.0 + costs.offsets[i] * (costs.rows + 1);
    push_nonzero(&mut functional, (orig_start(i), costs.rows), ka, &ga);
    match pair {
        Pair::Emb(..) => push_nonzero(&mut functional, (costs.ee[j].0, kb), kb, &gb),
        Pair::Orig(..) => push_nonzero(&mut functional, (orig_start(j), costs.rows), kb, &gb),
    }
    functional
}

/// Appends the nonzero entries of a `k x k` block whose row `a` starts at
/// flat column `start + a * stride`.
fn push_nonzero(out: &mut Functional, (start, stride): (usize, usize), k: usize, block: &[f64]) {
    for (a, row) in block.chunks_exact(k).enumerate() {
        let first = start + a * stride;
        for (b, &g) in row.iter().enumerate() {
            if g != 0.0 {
                out.push((first + b, g));
            }
        }
    }
}

/// Value of a rank-0 variable.
pub fn value_of(v: Var<'_>) -> f64 {
    v.value().data()[0]
}
