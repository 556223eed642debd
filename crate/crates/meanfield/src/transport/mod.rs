//! Exact Monge-Kantorovich-1 distances between discrete measures.
//!
//! `w1_exact` solves the transportation linear program
//!
//! ```text
//! W1(mu, nu) = min { sum_ij pi_ij |p_i - q_j| : pi >= 0, row sums = w, col sums = v }
//! ```
//!
//! exactly: uniform clouds of equal size route to a shortest-augmenting-path
//! assignment solver, the general weighted case to a transportation network
//! simplex with strongly feasible bases. Both produce dual certificates and
//! every solve is checked against complementary slackness before the value
//! is returned.
//!
//! Two independent oracles keep the exact solvers honest: a quantile
//! integration for d = 1 (`w1_sorted_1d`) and permutation enumeration for
//! tiny uniform instances (`w1_brute_force`). The Kantorovich-Rubinstein
//! dual lower bound (`w1_dual_lb`) probes the other side of the duality
//! gap with 1-Lipschitz cone functions.

mod assignment;
mod simplex;

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Largest allowed product of the two support sizes in one exact solve.
pub const MAX_PAIR_CAPACITY: usize = 4_000_000;
/// Largest allowed atom count of a tensor power.
pub const MAX_TENSOR_ATOMS: usize = 100_000;
/// Tolerance for feasibility and complementary-slackness certification.
pub const CERT_TOL: f64 = 1e-9;

/// A weighted point cloud representing a probability measure on R^d.
///
/// Weights are nonnegative and sum to one (to 1e-12); points are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Build a measure from a flat point buffer (`n * dim` coordinates)
    /// and `n` weights.
    pub fn new(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if points.len() != weights.len() * dim {
            return Err(Error::invalid(format!(
                "point buffer has {} coordinates, expected {} * {}",
                points.len(),
                weights.len(),
                dim
            )));
        }
        if weights.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total = rng::pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        Ok(DiscreteMeasure {
            points,
            weights,
            dim,
        })
    }

    /// Uniform (empirical) measure on the given points.
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) || points.is_empty() {
            return Err(Error::invalid("point buffer length must be a positive multiple of dim"));
        }
        let n = points.len() / dim;
        Self::new(points, dim, vec![1.0 / n as f64; n])
    }

    /// Point mass at z.
    pub fn dirac(z: &[f64]) -> Self {
        DiscreteMeasure {
            points: z.to_vec(),
            weights: vec![1.0],
            dim: z.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    /// All weights bitwise equal to 1/n. Exactly-uniform clouds take the
    /// assignment fast path in `w1_exact`.
    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| *w == w0)
    }

    /// Barycenter sum_i w_i p_i.
    pub fn barycenter(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for i in 0..self.len() {
            let w = self.weights[i];
            for (bd, pd) in b.iter_mut().zip(self.point(i)) {
                *bd += w * pd;
            }
        }
        b
    }

    /// Moment integral of |z|^r.
    pub fn moment_abs(&self, r: f64) -> f64 {
        let terms: Vec<f64> = (0..self.len())
            .map(|i| self.weights[i] * crate::linalg::norm(self.point(i)).powf(r))
            .collect();
        rng::pairwise_sum(&terms)
    }

    /// Product measure of two (possibly different) measures, on R^{d1+d2}.
    pub fn product(&self, other: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        let atoms = self.len() * other.len();
        if atoms > MAX_TENSOR_ATOMS {
            return Err(Error::Capacity {
                what: "product atoms",
                got: atoms,
                limit: MAX_TENSOR_ATOMS,
            });
        }
        let dim = self.dim + other.dim;
        let mut points = Vec::with_capacity(atoms * dim);
        let mut weights = Vec::with_capacity(atoms);
        for i in 0..self.len() {
            for j in 0..other.len() {
                points.extend_from_slice(self.point(i));
                points.extend_from_slice(other.point(j));
                weights.push(self.weights[i] * other.weights[j]);
            }
        }
        // Renormalize the last weight against accumulated rounding so the
        // result passes its own constructor check.
        let total = rng::pairwise_sum(&weights);
        let drift = total - 1.0;
        if drift.abs() > 1e-12 {
            let last = weights.len() - 1;
            weights[last] -= drift;
        }
        DiscreteMeasure::new(points, dim, weights)
    }

    /// Convex combination (1 - theta) mu + theta nu as a single cloud.
    pub fn mixture(a: &DiscreteMeasure, b: &DiscreteMeasure, one_minus_theta: f64) -> Result<DiscreteMeasure> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch {
                expected: a.dim,
                actual: b.dim,
            });
        }
        if !(0.0..=1.0).contains(&one_minus_theta) {
            return Err(Error::invalid("mixture weight must lie in [0, 1]"));
        }
        let mut points = a.points.clone();
        points.extend_from_slice(&b.points);
        let mut weights: Vec<f64> = a.weights.iter().map(|w| w * one_minus_theta).collect();
        weights.extend(b.weights.iter().map(|w| w * (1.0 - one_minus_theta)));
        let total = rng::pairwise_sum(&weights);
        let drift = total - 1.0;
        if drift.abs() > 1e-12 {
            let last = weights.len() - 1;
            weights[last] -= drift;
        }
        DiscreteMeasure::new(points, a.dim, weights)
    }

    /// Translate every support point by `shift`.
    pub fn translate(&self, shift: &[f64]) -> Result<DiscreteMeasure> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: shift.len(),
            });
        }
        let mut points = self.points.clone();
        for p in points.chunks_mut(self.dim) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        Ok(DiscreteMeasure {
            points,
            weights: self.weights.clone(),
            dim: self.dim,
        })
    }

    /// Uniform subsample with at most `max_atoms` support points.
    ///
    /// Uniform measures are thinned without replacement (seeded partial
    /// shuffle, ascending index order afterwards); weighted measures are
    /// resampled by weight with replacement. Either way the result is a
    /// uniform cloud approximating `self`.
    pub fn subsample(&self, max_atoms: usize, seed: u64) -> Result<DiscreteMeasure> {
        if max_atoms == 0 {
            return Err(Error::invalid("subsample needs max_atoms >= 1"));
        }
        if self.len() <= max_atoms && self.is_uniform() {
            return Ok(self.clone());
        }
        let mut rng = rng::stream(rng::mix(seed, rng::tag::SUBSAMPLE), 0);
        let chosen: Vec<usize> = if self.is_uniform() {
            let mut idx: Vec<usize> = (0..self.len()).collect();
            let (shuffled, _) = idx.partial_shuffle(&mut rng, max_atoms);
            let mut keep = shuffled.to_vec();
            keep.sort_unstable();
            keep
        } else {
            let cum: Vec<f64> = self
                .weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            (0..max_atoms)
                .map(|_| {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    cum.partition_point(|c| *c < u).min(self.len() - 1)
                })
                .collect()
        };
        let mut points = Vec::with_capacity(chosen.len() * self.dim);
        for &i in &chosen {
            points.extend_from_slice(self.point(i));
        }
        DiscreteMeasure::uniform(points, self.dim)
    }
}

/// A feasible coupling between two discrete measures, stored sparsely.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// (source index, target index, mass) with mass > 0.
    pub entries: Vec<(usize, usize, f64)>,
    /// Transport cost of the plan under the Euclidean ground metric.
    pub cost: f64,
}

impl TransportPlan {
    /// Check that the plan's marginals reproduce the two weight vectors.
    pub fn check_marginals(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
        let mut row = vec![0.0; mu.len()];
        let mut col = vec![0.0; nu.len()];
        for &(i, j, m) in &self.entries {
            if m <= 0.0 || i >= mu.len() || j >= nu.len() {
                return false;
            }
            row[i] += m;
            col[j] += m;
        }
        row.iter()
            .zip(mu.weights())
            .all(|(r, w)| (r - w).abs() <= tol)
            && col
                .iter()
                .zip(nu.weights())
                .all(|(c, w)| (c - w).abs() <= tol)
    }
}

/// Dense cost matrix between two support sets.
pub(crate) struct CostMatrix {
    pub data: Vec<f64>,
    pub n: usize,
    pub m: usize,
}

impl CostMatrix {
    pub(crate) fn euclidean(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CostMatrix {
        let (n, m) = (mu.len(), nu.len());
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let p = mu.point(i);
            for j in 0..m {
                data[i * m + j] = dist(p, nu.point(j));
            }
        }
        CostMatrix { data, n, m }
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }
}

/// Exact W1 distance and an optimal plan.
///
/// Equal-size exactly-uniform clouds go through the assignment solver;
/// everything else through the network simplex. The returned plan is
/// feasible and certified optimal by complementary slackness at 1e-9.
pub fn w1_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: nu.dim(),
        });
    }
    let pairs = mu.len() * nu.len();
    if pairs > MAX_PAIR_CAPACITY {
        return Err(Error::Capacity {
            what: "support size product",
            got: pairs,
            limit: MAX_PAIR_CAPACITY,
        });
    }
    let mass_gap = (rng::pairwise_sum(mu.weights()) - rng::pairwise_sum(nu.weights())).abs();
    if mass_gap > 1e-9 {
        return Err(Error::invalid(format!(
            "total masses differ by {mass_gap}"
        )));
    }
    let cost = CostMatrix::euclidean(mu, nu);
    solve_with_cost(mu.weights(), nu.weights(), &cost)
}

/// Convenience wrapper returning only the distance.
pub fn w1_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    w1_exact(mu, nu).map(|(d, _)| d)
}

/// Solve the transportation problem for explicit weights and a
/// precomputed cost matrix. Used directly by the nested distance, where
/// the ground costs are themselves W1 distances.
pub(crate) fn solve_with_cost(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
) -> Result<(f64, TransportPlan)> {
    debug_assert_eq!(cost.n, a.len());
    debug_assert_eq!(cost.m, b.len());
    let uniform = |w: &[f64]| {
        let w0 = 1.0 / w.len() as f64;
        w.iter().all(|x| *x == w0)
    };
    let plan = if a.len() == b.len() && uniform(a) && uniform(b) {
        assignment::solve(cost, a)?
    } else {
        simplex::solve(a, b, cost)?
    };
    // Certify feasibility. Optimality (dual feasibility + zero gap) is
    // certified inside each solver before it returns.
    let mut row = vec![0.0; a.len()];
    let mut col = vec![0.0; b.len()];
    for &(i, j, m) in &plan.entries {
        row[i] += m;
        col[j] += m;
    }
    for (r, w) in row.iter().zip(a) {
        if (r - w).abs() > CERT_TOL {
            return Err(Error::Solver(format!(
                "row marginal off by {}",
                (r - w).abs()
            )));
        }
    }
    for (c, w) in col.iter().zip(b) {
        if (c - w).abs() > CERT_TOL {
            return Err(Error::Solver(format!(
                "column marginal off by {}",
                (c - w).abs()
            )));
        }
    }
    Ok((plan.cost, plan))
}

/// Exact 1-D W1 by quantile integration: the optimal coupling in one
/// dimension is monotone, so W1 equals the L1 distance between the two
/// cumulative distribution functions.
pub fn w1_sorted_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::invalid("w1_sorted_1d requires d = 1"));
    }
    // Merge the supports; sweep the CDF difference between breakpoints.
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(mu.len() + nu.len());
    for i in 0..mu.len() {
        events.push((mu.point(i)[0], mu.weight(i), 0.0));
    }
    for j in 0..nu.len() {
        events.push((nu.point(j)[0], 0.0, nu.weight(j)));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut total = 0.0;
    let mut fdiff = 0.0_f64;
    let mut prev_x = events[0].0;
    for &(x, wmu, wnu) in &events {
        total += fdiff.abs() * (x - prev_x);
        fdiff += wmu - wnu;
        prev_x = x;
    }
    Ok(total)
}

/// Brute-force W1 for uniform clouds of equal size n <= 7: minimum over
/// all n! permutation matchings, which contain an optimal plan because
/// the extreme points of the doubly stochastic polytope are permutations.
pub fn w1_brute_force(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: nu.dim(),
        });
    }
    let n = mu.len();
    if n != nu.len() || !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::invalid(
            "w1_brute_force requires uniform clouds of equal size",
        ));
    }
    if n > 7 {
        return Err(Error::invalid("w1_brute_force requires n <= 7"));
    }
    let cost = CostMatrix::euclidean(mu, nu);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost.at(i, j)).sum();
        if total < best {
            best = total;
        }
    });
    Ok(best / n as f64)
}

fn permute(perm: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// A 1-Lipschitz test function built as a minimum of distance cones,
/// `phi(z) = min_i (a_i + |z - p_i|)`.
#[derive(Debug, Clone)]
pub struct LipschitzTestFunction {
    pub anchors: Vec<(Vec<f64>, f64)>,
}

impl LipschitzTestFunction {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.anchors
            .iter()
            .map(|(p, a)| a + dist(z, p))
            .fold(f64::INFINITY, f64::min)
    }

    fn pair(&self, mu: &DiscreteMeasure) -> f64 {
        let vals: Vec<f64> = (0..mu.len())
            .map(|i| mu.weight(i) * self.eval(mu.point(i)))
            .collect();
        rng::pairwise_sum(&vals)
    }
}

/// Kantorovich-Rubinstein lower bound: the best of `trials` sampled
/// 1-Lipschitz cone functions plus the deterministic single-cone family
/// anchored at every support point. Always a weak-duality lower bound
/// for `w1_exact`; tight for pairs of Diracs because the single cone at
/// one of the atoms is an optimal potential.
pub fn w1_dual_lb(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: nu.dim(),
        });
    }
    if trials == 0 {
        return Err(Error::invalid("w1_dual_lb requires trials >= 1"));
    }
    let mut best = 0.0_f64;
    let mut consider = |phi: &LipschitzTestFunction| {
        let gap = (phi.pair(mu) - phi.pair(nu)).abs();
        if gap > best {
            best = gap;
        }
    };
    // Deterministic cones at every support point.
    for i in 0..mu.len() {
        consider(&LipschitzTestFunction {
            anchors: vec![(mu.point(i).to_vec(), 0.0)],
        });
    }
    for j in 0..nu.len() {
        consider(&LipschitzTestFunction {
            anchors: vec![(nu.point(j).to_vec(), 0.0)],
        });
    }
    // Random multi-cone functions.
    let mut rng = rng::stream(rng::mix(seed, rng::tag::DUAL_LB), 0);
    let spread = {
        let bm = mu.barycenter();
        let mut r: f64 = 1.0;
        for i in 0..mu.len() {
            r = r.max(dist(mu.point(i), &bm));
        }
        for j in 0..nu.len() {
            r = r.max(dist(nu.point(j), &bm));
        }
        r
    };
    for _ in 0..trials {
        let k = rng.gen_range(1..=4usize);
        let mut anchors = Vec::with_capacity(k);
        for _ in 0..k {
            let from_mu = rng.gen_bool(0.5);
            let idx = if from_mu {
                rng.gen_range(0..mu.len())
            } else {
                rng.gen_range(0..nu.len())
            };
            let p = if from_mu { mu.point(idx) } else { nu.point(idx) };
            let offset = rng.gen_range(-spread..=spread);
            anchors.push((p.to_vec(), offset));
        }
        consider(&LipschitzTestFunction { anchors });
    }
    Ok(best)
}

/// m-fold product measure mu^(x m) on R^{dm}.
pub fn tensor_power(mu: &DiscreteMeasure, m: usize) -> Result<DiscreteMeasure> {
    if m == 0 {
        return Err(Error::invalid("tensor power requires m >= 1"));
    }
    let atoms = mu.len().checked_pow(m as u32).unwrap_or(usize::MAX);
    if atoms > MAX_TENSOR_ATOMS {
        return Err(Error::Capacity {
            what: "tensor atoms",
            got: atoms,
            limit: MAX_TENSOR_ATOMS,
        });
    }
    let mut out = mu.clone();
    for _ in 1..m {
        out = out.product(mu)?;
    }
    Ok(out)
}
