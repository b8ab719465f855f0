//! Optimal transport between small point clouds: the cosine ground cost,
//! exact and entropic Wasserstein solvers, and Gromov-Wasserstein by
//! Frank-Wolfe. All marginals are uniform.
//!
//! Distances are returned together with their optimal plans; at a fixed plan
//! the Wasserstein distance is `<T, C>` and the Gromov-Wasserstein distance is
//! `<Ga, Da> + <Gb, Db>` (see [`gw_cost_gradients`]), which is how gradients
//! reach the cost matrices.

mod exact;
mod gw;
mod sinkhorn;

pub use exact::Support;
pub use gw::{FwConfig, Metric, Start};

use std::cmp::Ordering;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Norm floor used when normalizing feature rows.
pub const NORM_EPS: f64 = 1e-12;

/// Largest subgraph size for which [`Solver::Auto`] uses the exact solver.
pub const AUTO_EXACT_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Sinkhorn {
        epsilon: f64,
        max_iters: usize,
    },
    /// Exact up to [`AUTO_EXACT_LIMIT`] points per side, Sinkhorn beyond.
    #[default]
    Auto,
}

/// Nonnegative coupling with uniform marginals `1/rows` and `1/cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    coupling: Tensor,
}

impl TransportPlan {
    fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self {
            coupling: Tensor::matrix(rows, cols, data).expect("plan shape"),
        }
    }

    fn from_support(rows: usize, cols: usize, s: &Support) -> Self {
        let mut data = vec![0.0; rows * cols];
        for &(i, j, w) in s {
            data[i * cols + j] += w;
        }
        Self::from_dense(rows, cols, data)
    }

    pub fn coupling(&self) -> &Tensor {
        &self.coupling
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.coupling.rows())
            .map(|i| self.coupling.row(i).iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.coupling.cols()];
        for i in 0..self.coupling.rows() {
            for (o, v) in out.iter_mut().zip(self.coupling.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Nonzero entries `(row, col, mass)`.
    pub fn support(&self) -> Support {
        gw::support_of(self.coupling.data(), self.coupling.cols())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "temperature must be positive, got {tau}"
        )))
    }
}

fn normalized_rows(x: &Tensor) -> Result<Tensor> {
    let (r, c) = x.dims2("cost_matrix features")?;
    let mut out = x.clone();
    for i in 0..r {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
        row.iter_mut().for_each(|v| *v /= norm);
    }
    debug_assert_eq!(out.cols(), c);
    Ok(out)
}

/// `C[m][n] = exp(-cos(xa_m, xb_n) / tau)`.
pub fn cost_matrix(xa: &Tensor, xb: &Tensor, tau: f64) -> Result<Tensor> {
    check_tau(tau)?;
    let (_, fa) = xa.dims2("cost_matrix lhs")?;
    let (_, fb) = xb.dims2("cost_matrix rhs")?;
    if fa != fb {
        return Err(Error::dim(format!(
            "cost_matrix feature widths differ: {fa} vs {fb}"
        )));
    }
    let na = normalized_rows(xa)?;
    let nb = normalized_rows(xb)?.transpose()?;
    let scale = -1.0 / tau;
    Ok(na.matmul(&nb)?.map(|c| (c * scale).exp()))
}

fn nonempty(c: &Tensor) -> Result<(usize, usize)> {
    let (ka, kb) = c.dims2("transport cost")?;
    if ka == 0 || kb == 0 {
        return Err(Error::contract(
            "optimal transport needs non-empty point sets",
        ));
    }
    Ok((ka, kb))
}

/// Optimal plan and value `<T, C>` for a given cost matrix.
pub fn transport(cost: &Tensor, solver: Solver) -> Result<(f64, TransportPlan)> {
    let (ka, kb) = nonempty(cost)?;
    let plan = match resolve(solver, ka, kb) {
        Solver::Sinkhorn { epsilon, max_iters } => {
            if !(epsilon > 0.0) {
                return Err(Error::contract(format!(
                    "sinkhorn epsilon must be positive, got {epsilon}"
                )));
            }
            let (p, converged) = sinkhorn::solve(cost.data(), ka, kb, epsilon, max_iters);
            if !converged {
                log::warn!(
                    "sinkhorn did not converge in {max_iters} iterations at epsilon {epsilon}; using the last iterate"
                );
            }
            TransportPlan::from_dense(ka, kb, p)
        }
        _ => TransportPlan::from_support(ka, kb, &exact::solve(cost.data(), ka, kb)),
    };
    let value = plan
        .coupling
        .data()
        .iter()
        .zip(cost.data())
        .map(|(t, c)| t * c)
        .sum();
    Ok((value, plan))
}

/// Exact optimal support for a row-major cost; the fast path used by the
/// batched losses.
pub fn exact_support(cost: &[f64], ka: usize, kb: usize) -> Support {
    exact::solve(cost, ka, kb)
}

fn resolve(solver: Solver, ka: usize, kb: usize) -> Solver {
    match solver {
        Solver::Auto if ka.max(kb) <= AUTO_EXACT_LIMIT => Solver::Exact,
        Solver::Auto => Solver::Sinkhorn {
            epsilon: 1e-2,
            max_iters: 2000,
        },
        s => s,
    }
}

/// Wasserstein-1 distance between the uniform distributions on the rows of
/// `xa` and `xb` under the cosine ground cost.
pub fn wasserstein(
    xa: &Tensor,
    xb: &Tensor,
    tau: f64,
    solver: Solver,
) -> Result<(f64, TransportPlan)> {
    transport(&cost_matrix(xa, xb, tau)?, solver)
}

/// Result of a Gromov-Wasserstein solve.
#[derive(Debug, Clone)]
pub struct GwSolution {
    pub distance: f64,
    pub plan: TransportPlan,
    /// Frank-Wolfe objective per iteration of the winning start.
    pub trace: Vec<f64>,
}

fn check_square(name: &str, m: &Tensor) -> Result<usize> {
    let (r, c) = m.dims2(name)?;
    if r != c {
        return Err(Error::contract(format!(
            "{name} must be square, got {r}x{c}"
        )));
    }
    if r == 0 {
        return Err(Error::contract(format!("{name} is empty")));
    }
    Ok(r)
}

fn check_symmetric(name: &str, m: &Tensor) -> Result<()> {
    let k = m.rows();
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::contract(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Gromov-Wasserstein between intra-set distance matrices, best of the
/// product and staircase starts.
pub fn gromov_wasserstein_costs(da: &Tensor, db: &Tensor, cfg: FwConfig) -> Result<GwSolution> {
    let ka = check_square("Da", da)?;
    let kb = check_square("Db", db)?;
    check_symmetric("Da", da)?;
    check_symmetric("Db", db)?;
    let (distance, support, trace) = gw_best(da.data(), db.data(), ka, kb, cfg);
    Ok(GwSolution {
        distance,
        plan: TransportPlan::from_support(ka, kb, &support),
        trace,
    })
}

/// Multi-start Frank-Wolfe on raw row-major symmetric matrices; returns the
/// exact objective at the best plan, that plan's support, and its trace.
pub fn gw_best(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    cfg: FwConfig,
) -> (f64, Support, Vec<f64>) {
    gw_between(
        &Metric::new(da.to_vec(), ka),
        &Metric::new(db.to_vec(), kb),
        cfg,
    )
}

/// [`gw_best`] on prepared metrics, for callers that reuse one matrix in
/// many pairs.
///
/// The pair is solved in a canonical orientation (smaller side first, ties
/// broken by content), so swapping the arguments transposes the plan and
/// leaves the distance bit-identical.
pub fn gw_between(a: &Metric, b: &Metric, cfg: FwConfig) -> (f64, Support, Vec<f64>) {
    if canonical_order(a, b) == Ordering::Greater {
        let (value, support, trace) = gw_best_oriented(b, a, cfg);
        let mut support: Support = support.into_iter().map(|(j, i, w)| (i, j, w)).collect();
        support.sort_by_key(|&(i, j, _)| (i, j));
        return (value, support, trace);
    }
    gw_best_oriented(a, b, cfg)
}

fn canonical_order(a: &Metric, b: &Metric) -> Ordering {
    a.size().cmp(&b.size()).then_with(|| {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn gw_best_oriented(a: &Metric, b: &Metric, cfg: FwConfig) -> (f64, Support, Vec<f64>) {
    let product = gw::run(a, b, Start::Product, cfg);
    let staircase = gw::run(a, b, Start::Staircase, cfg);
    let last = |r: &gw::FwRun| *r.trace.last().expect("trace starts with the initial value");
    let best = if last(&staircase) < last(&product) {
        staircase
    } else {
        product
    };
    let (ka, kb) = (a.size(), b.size());
    let support = gw::support_of(&best.plan, kb);
    (
        gw::objective(a.data(), b.data(), ka, kb, &support),
        support,
        best.trace,
    )
}

/// A single Frank-Wolfe run from the given start, for diagnostics.
pub fn gw_run(da: &Tensor, db: &Tensor, start: Start, cfg: FwConfig) -> Result<GwSolution> {
    let ka = check_square("Da", da)?;
    let kb = check_square("Db", db)?;
    let run = gw::run(
        &Metric::new(da.data().to_vec(), ka),
        &Metric::new(db.data().to_vec(), kb),
        start,
        cfg,
    );
    let support = gw::support_of(&run.plan, kb);
    Ok(GwSolution {
        distance: gw::objective(da.data(), db.data(), ka, kb, &support),
        plan: TransportPlan::from_dense(ka, kb, run.plan),
        trace: run.trace,
    })
}

/// Objective `Σ T_mn T_m'n' |Da_mm' - Db_nn'|` at a given plan.
pub fn gw_objective(da: &Tensor, db: &Tensor, plan: &TransportPlan) -> Result<f64> {
    let ka = check_square("Da", da)?;
    let kb = check_square("Db", db)?;
    if plan.coupling.shape() != [ka, kb] {
        return Err(Error::dim(format!(
            "plan {:?} for {ka}x{kb} problem",
            plan.coupling.shape()
        )));
    }
    Ok(gw::objective(da.data(), db.data(), ka, kb, &plan.support()))
}

/// Gromov-Wasserstein distance between two subgraphs. The intra-graph
/// distances are the feature costs `cost_matrix(x, x, tau)`; the adjacency
/// matrices are only checked for consistency with the feature rows.
pub fn gromov_wasserstein(
    adj_a: &Tensor,
    xa: &Tensor,
    adj_b: &Tensor,
    xb: &Tensor,
    tau: f64,
    cfg: FwConfig,
) -> Result<GwSolution> {
    let ka = check_square("Aa", adj_a)?;
    let kb = check_square("Ab", adj_b)?;
    if xa.dims2("Xa")?.0 != ka || xb.dims2("Xb")?.0 != kb {
        return Err(Error::dim(format!(
            "adjacency sizes {ka}, {kb} do not match feature rows {:?}, {:?}",
            xa.shape(),
            xb.shape()
        )));
    }
    let da = cost_matrix(xa, xa, tau)?;
    let db = cost_matrix(xb, xb, tau)?;
    gromov_wasserstein_costs(&da, &db, cfg)
}

/// `(dGW/dDa, dGW/dDb)` at a fixed plan.
pub fn gw_cost_gradients(
    da: &Tensor,
    db: &Tensor,
    plan: &TransportPlan,
) -> Result<(Tensor, Tensor)> {
    let ka = check_square("Da", da)?;
    let kb = check_square("Db", db)?;
    let (ga, gb) = gw::cost_gradients(da.data(), db.data(), ka, kb, &plan.support());
    Ok((Tensor::matrix(ka, ka, ga)?, Tensor::matrix(kb, kb, gb)?))
}

/// Raw-slice form of [`gw_cost_gradients`].
pub fn gw_support_gradients(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    s: &Support,
) -> (Vec<f64>, Vec<f64>) {
    gw::cost_gradients(da, db, ka, kb, s)
}

/// Worker pool for batches of independent solves. Its size comes from the
/// `SUBGEC_THREADS` environment variable, defaulting to the logical core
/// count.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("SUBGEC_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}
