//! Entropic transport in the log domain with epsilon scaling, followed by a
//! rounding step onto the exact transport polytope.

/// Returns the rounded plan (row-major `ka x kb`) and whether the final
/// stage met the marginal tolerance before `max_iters`.
pub fn solve(
    cost: &[f64],
    ka: usize,
    kb: usize,
    epsilon: f64,
    max_iters: usize,
) -> (Vec<f64>, bool) {
    debug_assert!(epsilon > 0.0 && cost.len() == ka * kb);
    let log_a = -(ka as f64).ln();
    let log_b = -(kb as f64).ln();
    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(epsilon);

    let mut f = vec![0.0; ka];
    let mut g = vec![0.0; kb];
    let mut buf = vec![0.0; ka.max(kb)];
    let mut eps = scale;
    let mut converged;
    loop {
        eps = (eps * 0.5).max(epsilon);
        let last = eps <= epsilon;
        let budget = if last {
            max_iters
        } else {
            max_iters.div_ceil(8).max(10)
        };
        converged = false;
        for _ in 0..budget {
            // f_i = eps log a_i - eps LSE_j((g_j - C_ij) / eps)
            for i in 0..ka {
                let row = &cost[i * kb..(i + 1) * kb];
                for j in 0..kb {
                    buf[j] = (g[j] - row[j]) / eps;
                }
                f[i] = eps * (log_a - log_sum_exp(&buf[..kb]));
            }
            let mut err = 0.0;
            for j in 0..kb {
                for i in 0..ka {
                    buf[i] = (f[i] - cost[i * kb + j]) / eps;
                }
                let new = eps * (log_b - log_sum_exp(&buf[..ka]));
                err += ((new - g[j]) / eps).abs();
                g[j] = new;
            }
            if err < 1e-10 {
                converged = true;
                break;
            }
        }
        if last {
            break;
        }
    }
    if !converged {
        converged = marginal_error(cost, ka, kb, &f, &g, eps) < 1e-8;
    }

    let mut plan: Vec<f64> = (0..ka * kb)
        .map(|e| {
            let (i, j) = (e / kb, e % kb);
            ((f[i] + g[j] - cost[e]) / eps).exp()
        })
        .collect();
    round_to_polytope(&mut plan, ka, kb);
    (plan, converged)
}

fn marginal_error(cost: &[f64], ka: usize, kb: usize, f: &[f64], g: &[f64], eps: f64) -> f64 {
    let mut err = 0.0;
    for i in 0..ka {
        let s: f64 = (0..kb)
            .map(|j| ((f[i] + g[j] - cost[i * kb + j]) / eps).exp())
            .sum();
        err += (s - 1.0 / ka as f64).abs();
    }
    err
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Projects a nonnegative matrix onto the uniform-marginal polytope:
/// scale down over-full rows, then over-full columns, then add the rank-one
/// correction carrying the remaining deficits.
pub fn round_to_polytope(plan: &mut [f64], ka: usize, kb: usize) {
    let a = 1.0 / ka as f64;
    let b = 1.0 / kb as f64;
    for row in plan.chunks_mut(kb) {
        let s: f64 = row.iter().sum();
        if s > a {
            let r = a / s;
            row.iter_mut().for_each(|v| *v *= r);
        }
    }
    for j in 0..kb {
        let s: f64 = (0..ka).map(|i| plan[i * kb + j]).sum();
        if s > b {
            let r = b / s;
            (0..ka).for_each(|i| plan[i * kb + j] *= r);
        }
    }
    let row_def: Vec<f64> = plan
        .chunks(kb)
        .map(|r| (a - r.iter().sum::<f64>()).max(0.0))
        .collect();
    let col_def: Vec<f64> = (0..kb)
        .map(|j| (b - (0..ka).map(|i| plan[i * kb + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = row_def.iter().sum();
    if total > 0.0 {
        for i in 0..ka {
            for j in 0..kb {
                plan[i * kb + j] += row_def[i] * col_def[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_restores_marginals() {
        let mut p = vec![0.5, 0.1, 0.0, 0.05, 0.3, 0.2];
        round_to_polytope(&mut p, 2, 3);
        for r in p.chunks(3) {
            assert!((r.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        }
        for j in 0..3 {
            assert!((p[j] + p[3 + j] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn constant_cost_gives_product_plan() {
        let (p, ok) = solve(&[2.0; 6], 2, 3, 1e-2, 500);
        assert!(ok);
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }
}
