//! Computable ingredients of the uniqueness argument: monomial
//! observables on measures, the generator identity, and the flow
//! Jacobian bounds.
//!
//! For a bounded `phi_m` the monomial is
//!
//! ```text
//! M_m[phi_m](f) = int phi_m(z_1, .., z_m) f(dz_1) .. f(dz_m),
//! ```
//!
//! with `M_0 = 1`. The generator of the flow acts on observables
//! `psi = phi_m o T^n_s` through
//!
//! ```text
//! L_n psi = (1/n) sum_{k,l} K(z_k, z_l) . grad_{z_k} psi,
//! ```
//!
//! which equals d/ds [phi_m(T^n_s Z)] along the flow. The identity check
//! assembles the left side with finite-difference Jacobian blocks and the
//! right side directly from the velocity field at the evolved point, so
//! its residual measures exactly the finite-difference assembly error.
//!
//! The Jacobian blocks themselves obey two Gronwall-type bounds with
//! `L` the kernel's Lipschitz constant:
//!
//! ```text
//! |a_lk(s)|       <= delta_lk e^{L|s|} + e^{3L|s|} / (2n)      (alpha)
//! (1/n) sum_l |a_lk(s)| <= e^{2L|s|} / n                       (beta)
//! ```
//!
//! and consequently
//!
//! ```text
//! sum_k |grad_{z_k}(phi_m o T^n_s)| <= (e^{L|s|} + e^{3L|s|}/2)
//!                                      sum_{l<=m} sup |grad_{z_l} phi_m|.
//! ```

use crate::dynamics::{
    flow_jacobian_fd, integrate_flow, nbody_rhs, FlowJacobian, FlowParams, ParticleConfiguration,
};
use crate::error::{Error, Result};
use crate::kernels::InteractionKernel;
use crate::linalg::norm;
use crate::rng;
use crate::testfn::{builtin_smooth_set, TestFunctionM};
use crate::transport::DiscreteMeasure;
use rand::Rng;
use serde::Serialize;

/// Enumeration budget for the monomial sum.
pub const MAX_MONOMIAL_TUPLES: u128 = 1_000_000;

/// A smooth observable entering monomials; `phi = None` encodes the
/// constant M_0 = 1.
#[derive(Debug, Clone)]
pub struct MonomialObservable {
    phi: Option<TestFunctionM>,
}

impl MonomialObservable {
    /// Wrap a smooth test function (analytic gradients required).
    pub fn new(phi: TestFunctionM) -> Result<Self> {
        if !phi.has_gradient() {
            return Err(Error::invalid(
                "monomial observables need analytic gradients",
            ));
        }
        Ok(MonomialObservable { phi: Some(phi) })
    }

    /// The constant monomial M_0 = 1.
    pub fn unit() -> Self {
        MonomialObservable { phi: None }
    }

    pub fn arity(&self) -> usize {
        self.phi.as_ref().map_or(0, |p| p.arity())
    }

    pub fn phi(&self) -> Option<&TestFunctionM> {
        self.phi.as_ref()
    }
}

/// Evaluate `M_m[phi](f)` by exact enumeration of all m-tuples of support
/// indices. The summands are sorted by value before pairwise summation,
/// so the result is invariant under any permutation of the support
/// enumeration, bit for bit.
pub fn monomial_eval(obs: &MonomialObservable, f: &DiscreteMeasure) -> Result<f64> {
    let m = obs.arity();
    if m == 0 {
        return Ok(1.0);
    }
    let phi = obs.phi.as_ref().expect("nonzero arity has a function");
    if phi.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: phi.dim(),
        });
    }
    let n = f.len();
    let tuples = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if tuples > MAX_MONOMIAL_TUPLES {
        return Err(Error::Capacity {
            what: "monomial tuples",
            got: usize::try_from(tuples.min(usize::MAX as u128)).unwrap_or(usize::MAX),
            limit: MAX_MONOMIAL_TUPLES as usize,
        });
    }
    let d = f.dim();
    let mut buf = vec![0.0; m * d];
    let mut tuple = vec![0usize; m];
    let mut summands = Vec::with_capacity(tuples as usize);
    loop {
        let mut weight = 1.0;
        for (slot, &atom) in tuple.iter().enumerate() {
            buf[slot * d..(slot + 1) * d].copy_from_slice(f.point(atom));
            weight *= f.weight(atom);
        }
        summands.push(phi.eval(&buf) * weight);
        let mut slot = m;
        loop {
            if slot == 0 {
                break;
            }
            slot -= 1;
            tuple[slot] += 1;
            if tuple[slot] < n {
                break;
            }
            tuple[slot] = 0;
            if slot == 0 {
                break;
            }
        }
        if tuple.iter().all(|&v| v == 0) {
            break;
        }
    }
    summands.sort_by(f64::total_cmp);
    Ok(rng::pairwise_sum(&summands))
}

/// Gradient of `phi_m o T^n_s` at Z, assembled from the flow Jacobian by
/// the chain rule; returns the flat n*d gradient vector.
pub fn composed_gradient(
    jac: &FlowJacobian,
    phi: &TestFunctionM,
    evolved: &ParticleConfiguration,
) -> Vec<f64> {
    let n = jac.particle_count();
    let d = jac.dim();
    let m = phi.arity();
    debug_assert!(m <= n);
    let head: Vec<f64> = evolved.coords()[..m * d].to_vec();
    let mut grads = vec![vec![0.0; d]; m];
    for (l, g) in grads.iter_mut().enumerate() {
        phi.grad_block(&head, l, g);
    }
    let mut out = vec![0.0; n * d];
    for k in 0..n {
        for i in 0..d {
            let mut acc = 0.0;
            for (l, g) in grads.iter().enumerate() {
                for (j, gj) in g.iter().enumerate() {
                    acc += jac.entry(l, j, k, i) * gj;
                }
            }
            out[k * d + i] = acc;
        }
    }
    out
}

/// Residual of the generator identity at one configuration:
///
/// - left side: `(1/n) sum_l A_n[z_l] psi(Z)` with
///   `A_n[zeta] = sum_k K(z_k, zeta) . grad_{z_k}` and the gradient of
///   `psi = phi_m o T^n_s` assembled from the finite-difference Jacobian;
/// - right side: `d/ds [phi_m(T^n_s Z)]` evaluated directly as
///   `sum_{l <= m} grad_l phi(Y) . V_l(Y)` at the evolved point `Y`.
///
/// The two agree for the exact flow, so the residual is the
/// finite-difference error; it vanishes to rounding at s = 0.
pub fn liouville_identity_check(
    kernel: &InteractionKernel,
    z: &ParticleConfiguration,
    phi: &TestFunctionM,
    s: f64,
    params: &FlowParams,
    fd_step: f64,
) -> Result<f64> {
    let n = z.count();
    let m = phi.arity();
    if m > n {
        return Err(Error::invalid("need n >= arity of phi"));
    }
    if !phi.has_gradient() {
        return Err(Error::invalid("identity check needs analytic gradients"));
    }
    if z.dim() != kernel.dim() || phi.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: z.dim(),
        });
    }
    let horizon = params.with_horizon(s);
    let jac = flow_jacobian_fd(kernel, z, &horizon, fd_step)?;
    let evolved = integrate_flow(kernel, z, &horizon)?;
    let grad_psi = composed_gradient(&jac, phi, &evolved);

    let d = z.dim();
    let mut lhs = 0.0;
    let mut kval = vec![0.0; d];
    for l in 0..n {
        let mut a_l = 0.0;
        for k in 0..n {
            kernel.eval_into(z.point(k), z.point(l), &mut kval);
            for i in 0..d {
                a_l += kval[i] * grad_psi[k * d + i];
            }
        }
        lhs += a_l;
    }
    lhs /= n as f64;

    let velocity = nbody_rhs(kernel, &evolved)?;
    let head: Vec<f64> = evolved.coords()[..m * d].to_vec();
    let mut g = vec![0.0; d];
    let mut rhs = 0.0;
    for l in 0..m {
        phi.grad_block(&head, l, &mut g);
        for i in 0..d {
            rhs += g[i] * velocity[l * d + i];
        }
    }
    Ok((lhs - rhs).abs())
}

/// One row of the Jacobian bound sweep.
#[derive(Debug, Clone, Serialize)]
pub struct JacobianBoundRow {
    pub n: usize,
    pub s: f64,
    /// Worst observed ratio of `sum_k |grad_k (phi o T_s)|` to its bound.
    pub worst_ratio: f64,
    /// Worst excess of a block norm over the alpha bound (negative means
    /// satisfied with margin).
    pub alpha_excess: f64,
    /// Worst excess of a block-norm row average over the beta bound.
    pub beta_excess: f64,
    pub pass: bool,
}

/// Sweep random initial configurations and the built-in smooth
/// observables, reporting the worst ratios against the Gronwall bounds.
pub fn jacobian_bound_report(
    kernel: &InteractionKernel,
    n: usize,
    s_values: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<JacobianBoundRow>> {
    if trials == 0 || n < 2 {
        return Err(Error::invalid("need trials >= 1 and n >= 2"));
    }
    let d = kernel.dim();
    let lip = kernel.lipschitz();
    let max_arity = n.min(2);
    let phis = builtin_smooth_set(d, max_arity, 1.0);
    let key = rng::mix(seed, rng::tag::JACOBIAN_TRIALS);
    let mut rows = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let params = FlowParams::default_for(kernel, s)?;
        let mut worst_ratio = 0.0_f64;
        let mut alpha_excess = f64::NEG_INFINITY;
        let mut beta_excess = f64::NEG_INFINITY;
        let e_l = (lip * s.abs()).exp();
        let e_3l = (3.0 * lip * s.abs()).exp();
        let e_2l = (2.0 * lip * s.abs()).exp();
        for trial in 0..trials {
            let mut stream = rng::stream(key, trial as u64);
            let coords: Vec<f64> = (0..n * d).map(|_| stream.gen_range(-2.0..2.0)).collect();
            let z = ParticleConfiguration::from_flat(coords, d)?;
            let jac = flow_jacobian_fd(kernel, &z, &params, 1e-5)?;
            let evolved = integrate_flow(kernel, &z, &params)?;

            let mut norms = vec![0.0; n * n];
            for l in 0..n {
                for k in 0..n {
                    norms[l * n + k] = jac.block_norm(l, k);
                }
            }
            for l in 0..n {
                for k in 0..n {
                    let delta = if l == k { 1.0 } else { 0.0 };
                    let bound = delta * e_l + e_3l / (2.0 * n as f64);
                    alpha_excess = alpha_excess.max(norms[l * n + k] - bound);
                }
            }
            for k in 0..n {
                let avg: f64 = (0..n).map(|l| norms[l * n + k]).sum::<f64>() / n as f64;
                beta_excess = beta_excess.max(avg - e_2l / n as f64);
            }

            for phi in &phis {
                let grad_psi = composed_gradient(&jac, phi, &evolved);
                let observed: f64 = (0..n)
                    .map(|k| norm(&grad_psi[k * d..(k + 1) * d]))
                    .sum();
                let grad_sups: f64 = (0..phi.arity()).map(|l| phi.block_grad_sup(l)).sum();
                let bound = (e_l + 0.5 * e_3l) * grad_sups;
                worst_ratio = worst_ratio.max(observed / bound);
            }
        }
        rows.push(JacobianBoundRow {
            n,
            s,
            worst_ratio,
            alpha_excess,
            beta_excess,
            pass: worst_ratio <= 1.0 + 1e-3
                && alpha_excess <= 1e-3
                && beta_excess <= 1e-3,
        });
    }
    Ok(rows)
}
