//! Exact transport between uniform marginals.
//!
//! Equal sizes reduce to an assignment problem (the optimum of the Birkhoff
//! polytope sits at a permutation), solved by the Hungarian method. Otherwise
//! the problem is an integer min-cost flow: row `i` supplies `kb / g` units
//! and column `j` demands `ka / g` units, `g = gcd(ka, kb)`, solved by
//! successive shortest augmenting paths with Johnson potentials. Dividing the
//! flow by the total `ka kb / g` gives a plan with marginals `1/ka`, `1/kb`.

/// Nonzero plan entries `(row, col, mass)`.
pub type Support = Vec<(usize, usize, f64)>;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Optimal plan for the row-major `ka x kb` cost under uniform marginals.
/// Both sizes must be positive.
pub fn solve(cost: &[f64], ka: usize, kb: usize) -> Support {
    debug_assert!(ka > 0 && kb > 0 && cost.len() == ka * kb);
    if ka == kb {
        return assignment(cost, ka);
    }
    min_cost_flow(cost, ka, kb)
}

/// Square case: optimal permutation by shortest augmenting paths with
/// row/column potentials, returned as a plan with entries `1/k`.
///
/// Column and row reductions followed by a greedy match on tight entries
/// seed the matching, so only the remaining rows need augmenting paths.
/// Each path search is Dijkstra over the columns not yet reached, and the
/// potentials are corrected once per path rather than once per step.
fn assignment(cost: &[f64], k: usize) -> Support {
    const FREE: usize = usize::MAX;
    let mut u = vec![0.0; k];
    let mut v = vec![0.0; k];
    let mut row_of = vec![FREE; k];
    let mut col_of = vec![FREE; k];
    let mut via = vec![0usize; k];
    v.copy_from_slice(&cost[..k]);
    for (i, row) in cost.chunks_exact(k).enumerate().skip(1) {
        for ((vj, arg), &c) in v.iter_mut().zip(via.iter_mut()).zip(row) {
            if c < *vj {
                *vj = c;
                *arg = i;
            }
        }
    }
    for (j, &arg) in via.iter().enumerate() {
        if col_of[arg] == FREE {
            col_of[arg] = j;
            row_of[j] = arg;
        }
    }
    for i in 0..k {
        if col_of[i] != FREE {
            continue;
        }
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for (j, (&c, &vj)) in cost[i * k..(i + 1) * k].iter().zip(&v).enumerate() {
            if c - vj < best {
                best = c - vj;
                arg = j;
            }
        }
        u[i] = best;
        if row_of[arg] == FREE {
            row_of[arg] = i;
            col_of[i] = arg;
        }
    }

    let mut dist = vec![0.0; k];
    let mut pending: Vec<usize> = Vec::with_capacity(k);
    let mut reached: Vec<usize> = Vec::with_capacity(k);
    let mut scanned: Vec<usize> = Vec::with_capacity(k);
    for start in 0..k {
        if col_of[start] != FREE {
            continue;
        }
        dist.fill(f64::INFINITY);
        pending.clear();
        pending.extend(0..k);
        reached.clear();
        scanned.clear();
        let mut row = start;
        let mut base = 0.0;
        let sink = loop {
            scanned.push(row);
            let offset = base - u[row];
            let costs = &cost[row * k..(row + 1) * k];
            let (mut lowest, mut pick) = (f64::INFINITY, 0);
            for (slot, &j) in pending.iter().enumerate() {
                let d = offset + costs[j] - v[j];
                if d < dist[j] {
                    dist[j] = d;
                    via[j] = row;
                }
                // Ties go to free columns, which ends the search sooner.
                if dist[j] < lowest || (dist[j] == lowest && row_of[j] == FREE) {
                    lowest = dist[j];
                    pick = slot;
                }
            }
            base = lowest;
            let j = pending.swap_remove(pick);
            reached.push(j);
            if row_of[j] == FREE {
                break j;
            }
            row = row_of[j];
        };
        u[start] += base;
        for &i in &scanned[1..] {
            u[i] += base - dist[col_of[i]];
        }
        for &j in &reached {
            v[j] -= base - dist[j];
        }
        let mut j = sink;
        loop {
            let i = via[j];
            row_of[j] = i;
            let previous = std::mem::replace(&mut col_of[i], j);
            if i == start {
                break;
            }
            j = previous;
        }
    }
    let w = 1.0 / k as f64;
    col_of.iter().enumerate().map(|(i, &j)| (i, j, w)).collect()
}

fn min_cost_flow(cost: &[f64], ka: usize, kb: usize) -> Support {
    let g = gcd(ka, kb);
    let supply = kb / g;
    let demand = ka / g;
    let total = (ka * kb / g) as f64;

    let mut flow = vec![0usize; ka * kb];
    let mut rem_s = vec![supply; ka];
    let mut rem_d = vec![demand; kb];
    let mut pot_r = vec![0.0; ka];
    let mut pot_c: Vec<f64> = (0..kb)
        .map(|j| {
            (0..ka)
                .map(|i| cost[i * kb + j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut dist_r = vec![0.0; ka];
    let mut dist_c = vec![0.0; kb];
    let mut done_r = vec![false; ka];
    let mut done_c = vec![false; kb];
    let mut parent_c = vec![usize::MAX; kb];
    let mut parent_r = vec![usize::MAX; ka];
    let mut remaining = ka * supply;

    while remaining > 0 {
        for i in 0..ka {
            dist_r[i] = if rem_s[i] > 0 { 0.0 } else { f64::INFINITY };
            done_r[i] = false;
            parent_r[i] = usize::MAX;
        }
        dist_c.fill(f64::INFINITY);
        done_c.fill(false);

        let (sink, reach) = loop {
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..ka {
                if !done_r[i] && dist_r[i] < best {
                    best = dist_r[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..kb {
                if !done_c[j] && dist_c[j] < best {
                    best = dist_c[j];
                    pick = Some((false, j));
                }
            }
            match pick.expect("a transportation problem always has an augmenting path") {
                (true, i) => {
                    done_r[i] = true;
                    let row = &cost[i * kb..(i + 1) * kb];
                    for j in 0..kb {
                        if done_c[j] {
                            continue;
                        }
                        let nd = best + (row[j] + pot_r[i] - pot_c[j]).max(0.0);
                        if nd < dist_c[j] {
                            dist_c[j] = nd;
                            parent_c[j] = i;
                        }
                    }
                }
                (false, j) => {
                    done_c[j] = true;
                    if rem_d[j] > 0 {
                        break (j, best);
                    }
                    for i in 0..ka {
                        if done_r[i] || flow[i * kb + j] == 0 {
                            continue;
                        }
                        let nd = best + (pot_c[j] - cost[i * kb + j] - pot_r[i]).max(0.0);
                        if nd < dist_r[i] {
                            dist_r[i] = nd;
                            parent_r[i] = j;
                        }
                    }
                }
            }
        };

        for i in 0..ka {
            pot_r[i] += dist_r[i].min(reach);
        }
        for j in 0..kb {
            pot_c[j] += dist_c[j].min(reach);
        }

        let mut amount = rem_d[sink];
        let mut j = sink;
        let source = loop {
            let i = parent_c[j];
            match parent_r[i] {
                usize::MAX => break i,
                prev => {
                    amount = amount.min(flow[i * kb + prev]);
                    j = prev;
                }
            }
        };
        amount = amount.min(rem_s[source]);

        let mut j = sink;
        loop {
            let i = parent_c[j];
            flow[i * kb + j] += amount;
            match parent_r[i] {
                usize::MAX => break,
                prev => {
                    flow[i * kb + prev] -= amount;
                    j = prev;
                }
            }
        }
        rem_s[source] -= amount;
        rem_d[sink] -= amount;
        remaining -= amount;
    }

    let mut support = Vec::with_capacity(ka + kb);
    for i in 0..ka {
        for j in 0..kb {
            let f = flow[i * kb + j];
            if f > 0 {
                support.push((i, j, f as f64 / total));
            }
        }
    }
    support
}

/// Northwest-corner coupling of the uniform marginals (the monotone
/// staircase; the scaled identity when `ka == kb`).
pub fn northwest_corner(ka: usize, kb: usize) -> Support {
    let g = gcd(ka, kb);
    let total = (ka * kb / g) as f64;
    let (mut rem_s, mut rem_d) = (kb / g, ka / g);
    let (mut i, mut j) = (0, 0);
    let mut support = Vec::with_capacity(ka + kb);
    while i < ka && j < kb {
        let amount = rem_s.min(rem_d);
        support.push((i, j, amount as f64 / total));
        rem_s -= amount;
        rem_d -= amount;
        if rem_s == 0 {
            i += 1;
            rem_s = kb / g;
        }
        if rem_d == 0 {
            j += 1;
            rem_d = ka / g;
        }
    }
    support
}
