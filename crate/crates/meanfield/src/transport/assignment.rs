//! Exact solver for the equal-size uniform case: the linear assignment
//! problem, by shortest augmenting paths over reduced costs (the dense
//! O(n^3) Jonker-Volgenant scheme). Row and column duals come out of the
//! algorithm for free and certify optimality via complementary slackness.

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Solve min_sigma sum_i c(i, sigma(i)) for a square cost matrix and
/// return the plan with mass `weights[i]` on each matched pair.
pub(crate) fn solve(cost: &CostMatrix, weights: &[f64]) -> Result<TransportPlan> {
    let n = cost.n;
    debug_assert_eq!(cost.n, cost.m);
    debug_assert_eq!(weights.len(), n);

    let mut u = vec![0.0_f64; n];
    let mut v = vec![0.0_f64; n];
    let mut col4row = vec![usize::MAX; n];
    let mut row4col = vec![usize::MAX; n];
    let mut path = vec![usize::MAX; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut in_rows = vec![false; n];
    let mut in_cols = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        let mut min_val = 0.0_f64;
        let mut num_remaining = n;
        for jp in 0..n {
            remaining[jp] = n - jp - 1;
        }
        in_rows.iter_mut().for_each(|x| *x = false);
        in_cols.iter_mut().for_each(|x| *x = false);
        shortest.iter_mut().for_each(|x| *x = f64::INFINITY);

        let mut sink = usize::MAX;
        let mut i = cur_row;
        while sink == usize::MAX {
            let mut index = usize::MAX;
            let mut lowest = f64::INFINITY;
            in_rows[i] = true;
            for it in 0..num_remaining {
                let jp = remaining[it];
                let r = min_val + cost.at(i, jp) - u[i] - v[jp];
                if r < shortest[jp] {
                    path[jp] = i;
                    shortest[jp] = r;
                }
                // On ties prefer an unassigned column so augmentation ends
                // sooner; scanning order makes the choice deterministic.
                if shortest[jp] < lowest
                    || (shortest[jp] == lowest && row4col[jp] == usize::MAX)
                {
                    lowest = shortest[jp];
                    index = it;
                }
            }
            min_val = lowest;
            if !min_val.is_finite() {
                return Err(Error::Solver("assignment search saturated".into()));
            }
            let jp = remaining[index];
            if row4col[jp] == usize::MAX {
                sink = jp;
            } else {
                i = row4col[jp];
            }
            in_cols[jp] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for ip in 0..n {
            if in_rows[ip] && ip != cur_row {
                u[ip] += min_val - shortest[col4row[ip]];
            }
        }
        for jp in 0..n {
            if in_cols[jp] {
                v[jp] -= min_val - shortest[jp];
            }
        }

        let mut j = sink;
        loop {
            let ip = path[j];
            row4col[j] = ip;
            std::mem::swap(&mut col4row[ip], &mut j);
            if ip == cur_row {
                break;
            }
        }
    }

    // Complementary slackness certificate: reduced costs nonnegative
    // everywhere, zero on the matching.
    let scale = 1.0 + cost.data.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let tol = super::CERT_TOL * scale;
    for i in 0..n {
        for j in 0..n {
            let rc = cost.at(i, j) - u[i] - v[j];
            if rc < -tol {
                return Err(Error::Solver(format!(
                    "assignment dual infeasible: rc({i},{j}) = {rc}"
                )));
            }
        }
        let j = col4row[i];
        let rc = cost.at(i, j) - u[i] - v[j];
        if rc.abs() > tol {
            return Err(Error::Solver(format!(
                "assignment slackness violated on match ({i},{j}): {rc}"
            )));
        }
    }

    let entries: Vec<(usize, usize, f64)> = (0..n)
        .filter(|&i| weights[i] > 0.0)
        .map(|i| (i, col4row[i], weights[i]))
        .collect();
    let cost_total: f64 = entries.iter().map(|&(i, j, m)| m * cost.at(i, j)).sum();
    Ok(TransportPlan {
        entries,
        cost: cost_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(data: Vec<f64>, n: usize) -> CostMatrix {
        CostMatrix { data, n, m: n }
    }

    #[test]
    fn picks_the_cheap_diagonal() {
        let c = matrix(vec![0.0, 5.0, 5.0, 0.0], 2);
        let plan = solve(&c, &[0.5, 0.5]).unwrap();
        assert!(plan.cost.abs() < 1e-15);
    }

    #[test]
    fn picks_the_cheap_antidiagonal() {
        let c = matrix(vec![3.0, 1.0, 1.0, 3.0], 2);
        let plan = solve(&c, &[0.5, 0.5]).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_known_optimum() {
        // Optimal matching 0->1, 1->0, 2->2 with cost 1 + 2 + 2 = 5.
        let c = matrix(vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0], 3);
        let plan = solve(&c, &[1.0 / 3.0; 3]).unwrap();
        assert!((plan.cost - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::Rng;
        let mut r = crate::rng::stream(99, 0);
        for _ in 0..50 {
            let n = r.gen_range(2..7usize);
            let data: Vec<f64> = (0..n * n).map(|_| r.gen_range(0.0..10.0)).collect();
            let c = matrix(data.clone(), n);
            let plan = solve(&c, &vec![1.0 / n as f64; n]).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            heap_permute(&mut perm, n, &mut |p| {
                let t: f64 = p.iter().enumerate().map(|(i, &j)| data[i * n + j]).sum();
                best = best.min(t);
            });
            assert!(
                (plan.cost * n as f64 - best).abs() < 1e-9,
                "n={n}: {} vs {}",
                plan.cost * n as f64,
                best
            );
        }
    }

    fn heap_permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == 1 {
            visit(perm);
            return;
        }
        for i in 0..k {
            heap_permute(perm, k - 1, visit);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
}
