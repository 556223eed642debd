//! Network simplex for the transportation problem with general weights.
//!
//! The bipartite transportation graph is augmented with an artificial
//! root node connected to every source and sink by high-cost arcs, which
//! yields an initial spanning-tree basis that is strongly feasible (all
//! artificial flows are strictly positive). Pivots select the entering
//! arc by a cyclic block search over the real arcs and the leaving arc by
//! the last blocking arc encountered when walking the pivot cycle from
//! the join node along the entering arc's orientation — the rule that
//! preserves strong feasibility and therefore rules out cycling on
//! degenerate pivots.
//!
//! Flows are exact sums and differences of the input weights, so the
//! optimal plan reproduces the marginals to machine precision; potentials
//! accumulate only O(V) rounding and the final solution is certified
//! against complementary slackness before being returned.

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

pub(crate) fn solve(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    // Drop zero-weight atoms; the solver wants strictly positive supplies.
    let src_ids: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let dst_ids: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    if src_ids.is_empty() || dst_ids.is_empty() {
        return Err(Error::invalid("transportation needs positive mass"));
    }
    let supply: Vec<f64> = src_ids.iter().map(|&i| a[i]).collect();
    let demand: Vec<f64> = dst_ids.iter().map(|&j| b[j]).collect();

    let mut net = Simplex::new(&supply, &demand, |i, j| cost.at(src_ids[i], dst_ids[j]));
    net.run()?;

    let mut entries = Vec::new();
    let mut cost_total = 0.0;
    for w in 0..net.nodes - 1 {
        let arc = net.parent_arc[w];
        if arc == NONE || arc >= net.real_arcs {
            continue;
        }
        let f = net.flow[w];
        if f > 0.0 {
            let (i, j) = (arc / net.m, arc % net.m);
            entries.push((src_ids[i], dst_ids[j], f));
            cost_total += f * cost.at(src_ids[i], dst_ids[j]);
        }
    }
    entries.sort_unstable_by_key(|e| (e.0, e.1));

    net.certify(|i, j| cost.at(src_ids[i], dst_ids[j]), &supply, &demand)?;

    Ok(TransportPlan {
        entries,
        cost: cost_total,
    })
}

struct Simplex {
    n: usize,
    m: usize,
    nodes: usize,
    real_arcs: usize,
    big: f64,
    eps: f64,
    cost: Vec<f64>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    /// True if the parent arc is directed child -> parent.
    up: Vec<bool>,
    flow: Vec<f64>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Simplex {
    fn new(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Simplex {
        let n = supply.len();
        let m = demand.len();
        let nodes = n + m + 1;
        let root = n + m;
        let real_arcs = n * m;
        let mut costs = vec![0.0; real_arcs];
        let mut max_c = 0.0_f64;
        for i in 0..n {
            for j in 0..m {
                let c = cost(i, j);
                costs[i * m + j] = c;
                max_c = max_c.max(c.abs());
            }
        }
        let big = 2.0 * (1.0 + max_c);
        let eps = 1e-11 * (1.0 + max_c);

        let mut parent = vec![root; nodes];
        parent[root] = NONE;
        let mut parent_arc = vec![NONE; nodes];
        let mut up = vec![false; nodes];
        let mut flow = vec![0.0; nodes];
        let mut pi = vec![0.0; nodes];
        let mut children = vec![Vec::new(); nodes];
        for i in 0..n {
            parent_arc[i] = real_arcs + i;
            up[i] = true; // source -> root
            flow[i] = supply[i];
            pi[i] = big;
            children[root].push(i);
        }
        for j in 0..m {
            let nj = n + j;
            parent_arc[nj] = real_arcs + n + j;
            up[nj] = false; // root -> sink
            flow[nj] = demand[j];
            pi[nj] = -big;
            children[root].push(nj);
        }
        Simplex {
            n,
            m,
            nodes,
            real_arcs,
            big,
            eps,
            cost: costs,
            parent,
            parent_arc,
            up,
            flow,
            pi,
            children,
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.real_arcs {
            self.cost[arc]
        } else {
            self.big
        }
    }

    fn run(&mut self) -> Result<()> {
        let arc_count = self.real_arcs;
        let block = (arc_count as f64).sqrt().ceil() as usize;
        let block = block.clamp(64, arc_count.max(64));
        let mut next_arc = 0usize;
        let max_pivots = 400 * self.nodes + 20_000;
        let mut pivots = 0usize;
        loop {
            let mut best_rc = -self.eps;
            let mut best_arc = NONE;
            let mut scanned = 0usize;
            while scanned < arc_count {
                let take = block.min(arc_count - scanned);
                for _ in 0..take {
                    let e = next_arc;
                    next_arc += 1;
                    if next_arc == arc_count {
                        next_arc = 0;
                    }
                    let i = e / self.m;
                    let j = e % self.m;
                    let rc = self.cost[e] - self.pi[i] + self.pi[self.n + j];
                    if rc < best_rc {
                        best_rc = rc;
                        best_arc = e;
                    }
                }
                scanned += take;
                if best_arc != NONE {
                    break;
                }
            }
            if best_arc == NONE {
                break;
            }
            self.pivot(best_arc)?;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Solver(format!(
                    "pivot limit {max_pivots} exceeded"
                )));
            }
        }
        // Any surviving artificial arc must be degenerate.
        for w in 0..self.nodes - 1 {
            if self.parent_arc[w] >= self.real_arcs && self.flow[w] > 1e-9 {
                return Err(Error::Solver(
                    "artificial flow remained positive at optimum".into(),
                ));
            }
        }
        Ok(())
    }

    fn pivot(&mut self, arc: usize) -> Result<()> {
        let tail = arc / self.m;
        let head = self.n + arc % self.m;

        // Walk both endpoints to the join (lowest common ancestor).
        let depth = |s: &Simplex, mut v: usize| {
            let mut d = 0;
            while s.parent[v] != NONE {
                v = s.parent[v];
                d += 1;
            }
            d
        };
        let mut x = tail;
        let mut y = head;
        let mut dx = depth(self, x);
        let mut dy = depth(self, y);
        let mut tail_path = Vec::new(); // nodes from tail upward, excluding join
        let mut head_path = Vec::new();
        while dx > dy {
            tail_path.push(x);
            x = self.parent[x];
            dx -= 1;
        }
        while dy > dx {
            head_path.push(y);
            y = self.parent[y];
            dy -= 1;
        }
        while x != y {
            tail_path.push(x);
            head_path.push(y);
            x = self.parent[x];
            y = self.parent[y];
        }

        // Cycle traversal from the join along the entering arc's direction:
        // join -> (down the tail side) -> tail -> head -> (up) -> join.
        // A tail-side link is crossed downward (parent to child), so it
        // loses flow when the arc points child -> parent; a head-side link
        // is crossed upward and loses flow when the arc points parent ->
        // child.
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        let consider = |node: usize, decreasing: bool, theta: &mut f64, leaving: &mut usize, s: &Simplex| {
            if decreasing {
                let f = s.flow[node];
                if f <= *theta {
                    *theta = f;
                    *leaving = node;
                }
            }
        };
        for &nx in tail_path.iter().rev() {
            consider(nx, self.up[nx], &mut theta, &mut leaving, self);
        }
        for &ny in head_path.iter() {
            consider(ny, !self.up[ny], &mut theta, &mut leaving, self);
        }
        if leaving == NONE {
            return Err(Error::Solver("unbounded pivot cycle".into()));
        }

        // Apply the flow change around the cycle.
        for &nx in tail_path.iter() {
            if self.up[nx] {
                self.flow[nx] -= theta;
            } else {
                self.flow[nx] += theta;
            }
        }
        for &ny in head_path.iter() {
            if self.up[ny] {
                self.flow[ny] += theta;
            } else {
                self.flow[ny] -= theta;
            }
        }

        // Splice the tree: remove the leaving link, re-root the detached
        // subtree at the entering arc's endpoint inside it.
        let q = if in_subtree_of(self, tail, leaving) {
            tail
        } else {
            head
        };
        let p = if q == tail { head } else { tail };

        // Reverse the parent chain from q up to `leaving`.
        let mut chain = Vec::new();
        let mut w = q;
        loop {
            chain.push(w);
            if w == leaving {
                break;
            }
            w = self.parent[w];
        }
        // Saved (parent, arc, up, flow) of each chain node before rewiring.
        let saved: Vec<(usize, usize, bool, f64)> = chain
            .iter()
            .map(|&v| (self.parent[v], self.parent_arc[v], self.up[v], self.flow[v]))
            .collect();
        // Detach `leaving` from its old parent.
        let old_parent_of_leaving = saved[chain.len() - 1].0;
        remove_child(&mut self.children[old_parent_of_leaving], leaving);
        // Reverse links: old (v -> parent v_next) becomes (v_next -> v).
        for k in (1..chain.len()).rev() {
            let upper = chain[k];
            let lower = chain[k - 1];
            let (_, arc_k, up_k, flow_k) = saved[k - 1];
            remove_child(&mut self.children[upper], lower);
            self.parent[upper] = lower;
            self.parent_arc[upper] = arc_k;
            self.up[upper] = !up_k;
            self.flow[upper] = flow_k;
            self.children[lower].push(upper);
        }
        // Attach q under p with the entering arc.
        self.parent[q] = p;
        self.parent_arc[q] = arc;
        self.up[q] = q == tail;
        self.flow[q] = theta;
        self.children[p].push(q);

        // Refresh potentials in the re-rooted subtree.
        let mut stack = vec![q];
        while let Some(v) = stack.pop() {
            let par = self.parent[v];
            let c = self.arc_cost(self.parent_arc[v]);
            self.pi[v] = if self.up[v] {
                // arc v -> par: c = pi[v] - pi[par]
                c + self.pi[par]
            } else {
                // arc par -> v: c = pi[par] - pi[v]
                self.pi[par] - c
            };
            stack.extend_from_slice(&self.children[v]);
        }
        Ok(())
    }

    /// Recompute the potentials from the final tree (removing any drift
    /// accumulated by incremental subtree updates), then check dual
    /// feasibility, slackness on the support, and the primal-dual gap.
    ///
    /// The artificial big-cost offsets stay in the potentials: they are
    /// small by construction (big = 2 (1 + max cost)) and they cancel in
    /// the duality gap because total supply equals total demand.
    fn certify(&mut self, cost: impl Fn(usize, usize) -> f64, a: &[f64], b: &[f64]) -> Result<()> {
        let root = self.nodes - 1;
        let mut pot = vec![0.0_f64; self.nodes];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &self.children[v] {
                let c = self.arc_cost(self.parent_arc[w]);
                pot[w] = if self.up[w] { c + pot[v] } else { pot[v] - c };
                stack.push(w);
            }
        }
        let scale = 1.0 + self.cost.iter().fold(0.0_f64, |mx, c| mx.max(c.abs()));
        let tol = super::CERT_TOL * scale;
        let mut primal = 0.0;
        for w in 0..self.nodes - 1 {
            let arc = self.parent_arc[w];
            if arc < self.real_arcs && self.flow[w] > 0.0 {
                let (i, j) = (arc / self.m, arc % self.m);
                primal += self.flow[w] * cost(i, j);
                let rc = cost(i, j) - pot[i] + pot[self.n + j];
                if rc.abs() > tol {
                    return Err(Error::Solver(format!(
                        "slackness violated on basic arc ({i},{j}): {rc}"
                    )));
                }
            }
        }
        for i in 0..self.n {
            for j in 0..self.m {
                let rc = cost(i, j) - pot[i] + pot[self.n + j];
                if rc < -tol {
                    return Err(Error::Solver(format!(
                        "dual infeasibility rc({i},{j}) = {rc}"
                    )));
                }
            }
        }
        let dual: f64 = (0..self.n).map(|i| a[i] * pot[i]).sum::<f64>()
            - (0..self.m).map(|j| b[j] * pot[self.n + j]).sum::<f64>();
        if (dual - primal).abs() > tol * (1.0 + primal.abs()) {
            return Err(Error::Solver(format!(
                "duality gap {} at cost {primal}",
                dual - primal
            )));
        }
        self.pi = pot;
        Ok(())
    }
}

fn in_subtree_of(s: &Simplex, mut v: usize, root: usize) -> bool {
    loop {
        if v == root {
            return true;
        }
        if s.parent[v] == NONE {
            return false;
        }
        v = s.parent[v];
    }
}

fn remove_child(children: &mut Vec<usize>, child: usize) {
    if let Some(pos) = children.iter().position(|&c| c == child) {
        children.remove(pos);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cm(data: Vec<f64>, n: usize, m: usize) -> CostMatrix {
        CostMatrix { data, n, m }
    }

    #[test]
    fn two_by_two_balanced() {
        // Optimal: route everything on the zero-cost diagonal.
        let c = cm(vec![0.0, 1.0, 1.0, 0.0], 2, 2);
        let plan = solve(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert!(plan.cost.abs() < 1e-15);
    }

    #[test]
    fn splits_a_dirac() {
        let c = cm(vec![1.0, 1.0], 1, 2);
        let plan = solve(&[1.0], &[0.5, 0.5], &c).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-15);
        assert_eq!(plan.entries.len(), 2);
    }

    #[test]
    fn degenerate_duplicate_points_terminate() {
        // All costs zero: heavily degenerate, must not cycle.
        let c = cm(vec![0.0; 36], 6, 6);
        let plan = solve(&[1.0 / 6.0; 6], &[1.0 / 6.0; 6], &c).unwrap();
        assert!(plan.cost.abs() < 1e-15);
    }

    #[test]
    fn skips_zero_weight_atoms() {
        let c = cm(vec![5.0, 0.0, 7.0, 9.0, 1.0, 9.0], 2, 3);
        let plan = solve(&[0.0, 1.0], &[0.0, 1.0, 0.0], &c).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-15);
        assert_eq!(plan.entries, vec![(1, 1, 1.0)]);
    }

    #[test]
    fn random_instances_match_onedimensional_oracle() {
        // 1-D ground costs |x_i - y_j| let the quantile formula act as an
        // independent check of the LP optimum.
        let mut r = crate::rng::stream(4242, 0);
        for _ in 0..40 {
            let n = r.gen_range(2..12usize);
            let m = r.gen_range(2..12usize);
            let xs: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..m).map(|_| r.gen_range(-3.0..3.0)).collect();
            let mut a: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
            let mut b: Vec<f64> = (0..m).map(|_| r.gen_range(0.05..1.0)).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|w| *w /= sa);
            b.iter_mut().for_each(|w| *w /= sb);
            // Fix rounding so both sum to exactly the same value.
            let drift: f64 = a.iter().sum::<f64>() - b.iter().sum::<f64>();
            b[0] += drift;

            let data: Vec<f64> = xs
                .iter()
                .flat_map(|x| ys.iter().map(move |y| (x - y).abs()))
                .collect();
            let c = cm(data, n, m);
            let plan = solve(&a, &b, &c).unwrap();

            let mu = crate::transport::DiscreteMeasure::new(xs.clone(), 1, a.clone()).unwrap();
            let nu = crate::transport::DiscreteMeasure::new(ys.clone(), 1, b.clone()).unwrap();
            let oracle = crate::transport::w1_sorted_1d(&mu, &nu).unwrap();
            assert!(
                (plan.cost - oracle).abs() < 1e-9,
                "n={n} m={m}: {} vs {}",
                plan.cost,
                oracle
            );
            assert!(plan.check_marginals(&mu, &nu, 1e-10));
        }
    }
}
