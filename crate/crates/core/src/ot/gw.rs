//! Gromov-Wasserstein coupling with the absolute-difference loss, by
//! Frank-Wolfe with exact line search.
//!
//! With `L[m,n,m',n'] = |Da[m,m'] - Db[n,n']|` and `G(T) = L ⊗ T`, the
//! objective is `f(T) = <G(T), T>` and its gradient is `2 G(T)` (both
//! distance matrices are symmetric). Each step solves the exact linear
//! subproblem, so the iterate moves toward a vertex `S`; `G(S)` costs
//! `O(k^2 nnz(S))` and `G` is then updated incrementally.

use serde::{Deserialize, Serialize};

use super::exact::{self, Support};

const STATIONARY_TOL: f64 = 1e-12;

/// Frank-Wolfe limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwConfig {
    pub max_iters: usize,
    /// Stop once `(f_prev - f) <= rel_tol * f_prev`.
    pub rel_tol: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-7,
        }
    }
}

/// One Frank-Wolfe run: the final dense plan and the objective after every
/// iteration, starting with the objective at the start plan.
pub struct FwRun {
    pub plan: Vec<f64>,
    pub trace: Vec<f64>,
}

/// `out += L ⊗ S` for a sparse `S`.
fn add_tensor_product(da: &[f64], db: &[f64], ka: usize, kb: usize, s: &Support, out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { add_tensor_product_avx2(da, db, ka, kb, s, out) };
    }
    add_tensor_product_lanes(da, db, ka, kb, s, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn add_tensor_product_avx2(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    s: &Support,
    out: &mut [f64],
) {
    add_tensor_product_lanes(da, db, ka, kb, s, out)
}

#[inline(always)]
fn add_tensor_product_lanes(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    s: &Support,
    out: &mut [f64],
) {
    for (da_row, out_row) in da.chunks_exact(ka).zip(out.chunks_exact_mut(kb)) {
        for &(mp, np, w) in s {
            let x = da_row[mp];
            let ys = &db[np * kb..(np + 1) * kb];
            let mut out_lanes = out_row.chunks_exact_mut(4);
            let mut y_lanes = ys.chunks_exact(4);
            for (o, y) in (&mut out_lanes).zip(&mut y_lanes) {
                let o: &mut [f64; 4] = o.try_into().expect("lane width");
                let y: &[f64; 4] = y.try_into().expect("lane width");
                for l in 0..4 {
                    o[l] += w * (x - y[l]).abs();
                }
            }
            for (o, &y) in out_lanes
                .into_remainder()
                .iter_mut()
                .zip(y_lanes.remainder())
            {
                *o += w * (x - y).abs();
            }
        }
    }
}

/// A symmetric `k x k` distance matrix with the sorted views that the
/// product start needs. Building it once per matrix lets many pairs share
/// the sorting work.
#[derive(Debug, Clone)]
pub struct Metric {
    data: Vec<f64>,
    k: usize,
    /// All entries in ascending order, with the row each came from.
    xs: Vec<f64>,
    rows: Vec<usize>,
    /// Each row sorted ascending, and its sum.
    sorted_rows: Vec<f64>,
    totals: Vec<f64>,
}

impl Metric {
    /// Wraps a row-major `k x k` matrix; `data.len()` must be `k * k`.
    pub fn new(data: Vec<f64>, k: usize) -> Self {
        assert_eq!(data.len(), k * k, "metric must be {k}x{k}");
        // Sorting integer keys is much faster than sorting float pairs; the
        // high half orders like `f64::total_cmp` and the low half is the row.
        let mut keys: Vec<u128> = data
            .iter()
            .enumerate()
            .map(|(e, &x)| {
                let bits = x.to_bits();
                let ordered = if bits >> 63 == 1 {
                    !bits
                } else {
                    bits | 1 << 63
                };
                (ordered as u128) << 64 | (e / k) as u128
            })
            .collect();
        keys.sort_unstable();
        let (xs, rows) = keys
            .iter()
            .map(|&key| {
                let ordered = (key >> 64) as u64;
                let bits = if ordered >> 63 == 1 {
                    ordered & !(1 << 63)
                } else {
                    !ordered
                };
                (f64::from_bits(bits), key as u64 as usize)
            })
            .unzip();
        let mut sorted_rows = data.clone();
        let mut totals = Vec::with_capacity(k);
        for row in sorted_rows.chunks_exact_mut(k.max(1)) {
            row.sort_unstable_by(f64::total_cmp);
            totals.push(row.iter().fold(0.0, |a, y| a + y));
        }
        Self {
            data,
            k,
            xs,
            rows,
            sorted_rows,
            totals,
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn size(&self) -> usize {
        self.k
    }
}

/// `L ⊗ (u v^T)` in `O(k^3)`: every entry of `Da` is visited in sorted order
/// while a pointer walks each sorted row of `Db`, so
/// `Σ_y |x - y| = x (2c - kb) - 2 P[c] + P[kb]` with `c = #{y <= x}` and `P`
/// the row's prefix sums.
fn product_tensor(a: &Metric, b: &Metric) -> Vec<f64> {
    let (ka, kb) = (a.k, b.k);
    let (xs, rows) = (&a.xs, &a.rows);
    // Column n of the result, `sum_{m', n'} |Da[m, m'] - Db[n, n']|`, is
    // piecewise linear in each Da entry with breakpoints at the sorted
    // Db[n, .]; entries between two breakpoints share slope and offset.
    let mut columns = vec![0.0; kb * ka];
    for ((acc, ys), &total) in columns
        .chunks_exact_mut(ka)
        .zip(b.sorted_rows.chunks_exact(kb))
        .zip(&b.totals)
    {
        let mut prefix = 0.0;
        let mut lo = 0;
        for c in 0..=kb {
            let hi = match ys.get(c) {
                Some(&y) => lo + xs[lo..].partition_point(|&x| x < y),
                None => xs.len(),
            };
            let slope = 2.0 * c as f64 - kb as f64;
            let offset = total - 2.0 * prefix;
            for (&x, &m) in xs[lo..hi].iter().zip(&rows[lo..hi]) {
                acc[m] += x * slope + offset;
            }
            if let Some(&y) = ys.get(c) {
                prefix += y;
            }
            lo = hi;
        }
    }
    let w = 1.0 / (ka * kb) as f64;
    let mut out = vec![0.0; ka * kb];
    for (n, col) in columns.chunks_exact(ka).enumerate() {
        for (m, &v) in col.iter().enumerate() {
            out[m * kb + n] = v * w;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn densify(s: &Support, ka: usize, kb: usize) -> Vec<f64> {
    let mut d = vec![0.0; ka * kb];
    scatter(s, kb, &mut d);
    d
}

fn scatter(s: &Support, kb: usize, d: &mut [f64]) {
    d.fill(0.0);
    for &(i, j, w) in s {
        d[i * kb + j] += w;
    }
}

/// Nonzero entries of a dense plan.
pub fn support_of(plan: &[f64], kb: usize) -> Support {
    plan.iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(e, &w)| (e / kb, e % kb, w))
        .collect()
}

/// Exact objective `Σ T T' |Da - Db|` summed over the plan's support.
pub fn objective(da: &[f64], db: &[f64], ka: usize, kb: usize, s: &Support) -> f64 {
    let mut total = 0.0;
    for &(m, n, w) in s {
        let da_row = &da[m * ka..(m + 1) * ka];
        let db_row = &db[n * kb..(n + 1) * kb];
        let mut inner = 0.0;
        for &(mp, np, wp) in s {
            inner += wp * (da_row[mp] - db_row[np]).abs();
        }
        total += w * inner;
    }
    total
}

/// Start plans used by the multi-start solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// The independent coupling `u v^T`.
    Product,
    /// The northwest-corner staircase (scaled identity for equal sizes).
    Staircase,
}

pub fn run(a: &Metric, b: &Metric, start: Start, cfg: FwConfig) -> FwRun {
    let (da, db, ka, kb) = (a.data(), b.data(), a.k, b.k);
    let (mut plan, mut g) = match start {
        Start::Product => (vec![1.0 / (ka * kb) as f64; ka * kb], product_tensor(a, b)),
        Start::Staircase => {
            let s = exact::northwest_corner(ka, kb);
            let mut g = vec![0.0; ka * kb];
            add_tensor_product(da, db, ka, kb, &s, &mut g);
            (densify(&s, ka, kb), g)
        }
    };
    run_from(da, db, ka, kb, &mut plan, &mut g, cfg)
}

fn run_from(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    plan: &mut Vec<f64>,
    g: &mut [f64],
    cfg: FwConfig,
) -> FwRun {
    let mut f = dot(g, plan);
    let mut trace = Vec::with_capacity(8);
    trace.push(f);
    let mut gs = vec![0.0; ka * kb];
    let mut s = vec![0.0; ka * kb];
    for _ in 0..cfg.max_iters {
        let vertex = exact::solve(g, ka, kb);
        scatter(&vertex, kb, &mut s);
        // b = <2G, S - T>; rounding-level descent is treated as stationary
        // so that ties break the same way for (a, b) and (b, a).
        let b = 2.0 * (dot(g, &s) - f);
        if b >= -STATIONARY_TOL * f {
            break;
        }
        // a = <G(S) - G(T), S - T> = f(S) - 2 <G(T), S> + f(T), since the
        // symmetric tensor gives <G(S), T> = <G(T), S>.
        let a = objective(da, db, ka, kb, &vertex) - (b + 2.0 * f) + f;
        let gamma = if a > 0.0 {
            (-b / (2.0 * a)).min(1.0)
        } else {
            1.0
        };
        let next = f + gamma * b + gamma * gamma * a;
        if next >= f {
            break;
        }
        gs.fill(0.0);
        add_tensor_product(da, db, ka, kb, &vertex, &mut gs);
        for e in 0..ka * kb {
            plan[e] += gamma * (s[e] - plan[e]);
            g[e] += gamma * (gs[e] - g[e]);
        }
        let prev = f;
        f = next.max(0.0);
        trace.push(f);
        if prev - f <= cfg.rel_tol * prev {
            break;
        }
    }
    for v in plan.iter_mut() {
        *v = v.max(0.0);
    }
    FwRun {
        plan: std::mem::take(plan),
        trace,
    }
}

/// Envelope gradients of the objective at a fixed plan with respect to
/// `Da` and `Db`. The objective equals `<Ga, Da> + <Gb, Db>` exactly.
pub fn cost_gradients(
    da: &[f64],
    db: &[f64],
    ka: usize,
    kb: usize,
    s: &Support,
) -> (Vec<f64>, Vec<f64>) {
    let mut ga = vec![0.0; ka * ka];
    let mut gb = vec![0.0; kb * kb];
    for &(m, n, w) in s {
        for &(mp, np, wp) in s {
            let diff = da[m * ka + mp] - db[n * kb + np];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                continue;
            };
            ga[m * ka + mp] += sign * w * wp;
            gb[n * kb + np] -= sign * w * wp;
        }
    }
    (ga, gb)
}
