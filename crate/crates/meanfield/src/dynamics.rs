//! The N-body flow and its derived quantities.
//!
//! The state `Z_N = (z_1, ..., z_N)` evolves by
//!
//! ```text
//! dz_k/dt = (1/N) sum_{l=1..N} K(z_k, z_l),
//! ```
//!
//! integrated with fixed-step classical RK4. Antisymmetry of `K` makes
//! the sum of the right-hand sides vanish identically, so the barycenter
//! is a conserved quantity up to rounding; for kernels affine in the
//! second argument the whole interaction sum collapses to one kernel
//! evaluation at the barycenter, which this module exploits as an exact
//! shortcut.
//!
//! Negative final times integrate the flow backward; the two directions
//! compose to the identity up to integrator error (the flow is a group).

use crate::error::{Error, Result};
use crate::kernels::InteractionKernel;
use crate::linalg::{norm, spectral_norm};
use crate::rng;
use crate::transport::DiscreteMeasure;
use rayon::prelude::*;

/// Callback receiving (step index, time, flat state) after each step.
type StepObserver<'a> = &'a mut dyn FnMut(usize, f64, &[f64]);

/// A point `Z_N` of the N-particle phase space `(R^d)^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfiguration {
    coords: Vec<f64>,
    dim: usize,
}

impl ParticleConfiguration {
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "coordinate buffer length must be a positive multiple of dim",
            ));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coordinates must be finite"));
        }
        Ok(ParticleConfiguration { coords, dim })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("need at least one particle"));
        }
        let dim = points[0].len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim)
    }

    pub fn count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let n = self.count();
        let mut b = vec![0.0; self.dim];
        for k in 0..n {
            for (bd, zd) in b.iter_mut().zip(self.point(k)) {
                *bd += zd;
            }
        }
        b.iter_mut().for_each(|x| *x /= n as f64);
        b
    }

    /// Empirical moment (1/N) sum_k |z_k|^r.
    pub fn moment_abs(&self, r: f64) -> f64 {
        let vals: Vec<f64> = (0..self.count())
            .map(|k| norm(self.point(k)).powf(r))
            .collect();
        rng::pairwise_sum(&vals) / self.count() as f64
    }

    /// The empirical measure mu_{Z_N} = (1/N) sum_k delta_{z_k}.
    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::uniform(self.coords.clone(), self.dim)
            .expect("configuration coordinates are finite")
    }

    /// Reindex particles: new particle k is old particle `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.count() {
            return Err(Error::invalid("permutation length mismatch"));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.point(p));
        }
        Self::from_flat(coords, self.dim)
    }
}

/// Integration method. Fixed-step classical Runge-Kutta only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    Rk4,
}

/// Step size and horizon of one flow integration.
#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub dt: f64,
    pub t_final: f64,
    pub method: Method,
}

impl FlowParams {
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        if dt.is_nan() || dt <= 0.0 || !dt.is_finite() || !t_final.is_finite() {
            return Err(Error::invalid("need finite t_final and dt > 0"));
        }
        Ok(FlowParams {
            dt,
            t_final,
            method: Method::Rk4,
        })
    }

    /// Default step: dt = min(1e-3, 0.05 / max(L, 1)).
    pub fn default_for(kernel: &InteractionKernel, t_final: f64) -> Result<Self> {
        let dt = (0.05 / kernel.lipschitz().max(1.0)).min(1e-3);
        Self::new(t_final, dt)
    }

    pub fn with_horizon(&self, t_final: f64) -> Self {
        FlowParams { t_final, ..*self }
    }
}

/// Right-hand side of the flow for uniform (1/N) or explicit weights.
///
/// The affine shortcut and the pairwise antisymmetric accumulation both
/// compute exactly sum_l w_l K(z_k, z_l); the pairwise form reuses each
/// kernel value with both signs so the weighted sum of all components
/// cancels to machine precision.
fn rhs_into(
    kernel: &InteractionKernel,
    coords: &[f64],
    dim: usize,
    weights: Option<&[f64]>,
    out: &mut [f64],
    scratch: &mut [f64],
) {
    debug_assert_eq!(scratch.len(), dim);
    let n = coords.len() / dim;
    if kernel.affine_in_second() {
        let bary = scratch;
        bary.fill(0.0);
        match weights {
            None => {
                for k in 0..n {
                    for i in 0..dim {
                        bary[i] += coords[k * dim + i];
                    }
                }
                bary.iter_mut().for_each(|x| *x /= n as f64);
            }
            Some(w) => {
                for k in 0..n {
                    for i in 0..dim {
                        bary[i] += w[k] * coords[k * dim + i];
                    }
                }
            }
        }
        for k in 0..n {
            let (zk, ok) = (
                &coords[k * dim..(k + 1) * dim],
                &mut out[k * dim..(k + 1) * dim],
            );
            kernel.eval_into(zk, bary, ok);
        }
        return;
    }
    out.fill(0.0);
    let term = scratch;
    let uw = 1.0 / n as f64;
    for k in 0..n {
        for l in (k + 1)..n {
            kernel.eval_into(
                &coords[k * dim..(k + 1) * dim],
                &coords[l * dim..(l + 1) * dim],
                term,
            );
            let (wk, wl) = match weights {
                None => (uw, uw),
                Some(w) => (w[k], w[l]),
            };
            for i in 0..dim {
                if wk == wl {
                    let v = wl * term[i];
                    out[k * dim + i] += v;
                    out[l * dim + i] -= v;
                } else {
                    out[k * dim + i] += wl * term[i];
                    out[l * dim + i] -= wk * term[i];
                }
            }
        }
    }
}

/// Velocities (1/N) sum_l K(z_k, z_l) for every particle.
pub fn nbody_rhs(kernel: &InteractionKernel, state: &ParticleConfiguration) -> Result<Vec<f64>> {
    if state.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: state.dim(),
        });
    }
    let mut out = vec![0.0; state.coords.len()];
    let mut scratch = vec![0.0; state.dim];
    rhs_into(kernel, &state.coords, state.dim, None, &mut out, &mut scratch);
    Ok(out)
}

fn rk4_integrate(
    kernel: &InteractionKernel,
    coords: &mut [f64],
    dim: usize,
    weights: Option<&[f64]>,
    params: &FlowParams,
    mut observe: Option<StepObserver<'_>>,
) -> Result<()> {
    let total = params.t_final;
    if total == 0.0 {
        return Ok(());
    }
    let sign = if total > 0.0 { 1.0 } else { -1.0 };
    let span = total.abs();
    let full_steps = (span / params.dt + 1e-9).floor() as usize;
    let remainder = span - full_steps as f64 * params.dt;
    let has_tail = remainder > 1e-12 * span.max(1.0);

    let m = coords.len();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut scratch = vec![0.0; dim];

    let mut t = 0.0_f64;
    let total_steps = full_steps + usize::from(has_tail);
    for step in 0..total_steps {
        let h = sign
            * if step < full_steps {
                params.dt
            } else {
                remainder
            };
        rhs_into(kernel, coords, dim, weights, &mut k1, &mut scratch);
        for i in 0..m {
            tmp[i] = coords[i] + 0.5 * h * k1[i];
        }
        rhs_into(kernel, &tmp, dim, weights, &mut k2, &mut scratch);
        for i in 0..m {
            tmp[i] = coords[i] + 0.5 * h * k2[i];
        }
        rhs_into(kernel, &tmp, dim, weights, &mut k3, &mut scratch);
        for i in 0..m {
            tmp[i] = coords[i] + h * k3[i];
        }
        rhs_into(kernel, &tmp, dim, weights, &mut k4, &mut scratch);
        for i in 0..m {
            coords[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalBlowUp {
                step,
                context: None,
            });
        }
        t += h;
        if let Some(obs) = observe.as_deref_mut() {
            obs(step + 1, t, coords);
        }
    }
    Ok(())
}

/// RK4 approximation of the flow at `params.t_final` (negative values
/// integrate backward).
pub fn integrate_flow(
    kernel: &InteractionKernel,
    initial: &ParticleConfiguration,
    params: &FlowParams,
) -> Result<ParticleConfiguration> {
    if initial.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: initial.dim(),
        });
    }
    let mut coords = initial.coords.clone();
    rk4_integrate(kernel, &mut coords, initial.dim, None, params, None)?;
    Ok(ParticleConfiguration {
        coords,
        dim: initial.dim,
    })
}

/// States saved along the way, for trajectory dumps and checkpointed
/// experiments. The initial state at t = 0 is always included.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParticleConfiguration>,
}

/// Integrate and keep every `save_every`-th step (and the last one).
pub fn integrate_flow_trajectory(
    kernel: &InteractionKernel,
    initial: &ParticleConfiguration,
    params: &FlowParams,
    save_every: usize,
) -> Result<Trajectory> {
    if initial.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: initial.dim(),
        });
    }
    if save_every == 0 {
        return Err(Error::invalid("save_every must be >= 1"));
    }
    let dim = initial.dim;
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    let span = params.t_final.abs();
    let full_steps = (span / params.dt + 1e-9).floor() as usize;
    let has_tail = span - full_steps as f64 * params.dt > 1e-12 * span.max(1.0);
    let total_steps = full_steps + usize::from(has_tail);
    let mut coords = initial.coords.clone();
    {
        let mut observer = |step: usize, t: f64, state: &[f64]| {
            if step.is_multiple_of(save_every) || step == total_steps {
                times.push(t);
                states.push(ParticleConfiguration {
                    coords: state.to_vec(),
                    dim,
                });
            }
        };
        rk4_integrate(
            kernel,
            &mut coords,
            dim,
            None,
            params,
            Some(&mut observer),
        )?;
    }
    Ok(Trajectory { times, states })
}

/// Advance a weighted measure along its own mean-field flow:
/// dz_i/dt = sum_j w_j K(z_i, z_j), weights unchanged. The weighted
/// empirical measure is then a weak solution of the mean-field equation.
pub fn integrate_measure_flow(
    kernel: &InteractionKernel,
    mu: &DiscreteMeasure,
    params: &FlowParams,
) -> Result<DiscreteMeasure> {
    if mu.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: mu.dim(),
        });
    }
    let mut coords = mu.points_flat().to_vec();
    rk4_integrate(
        kernel,
        &mut coords,
        mu.dim(),
        Some(mu.weights()),
        params,
        None,
    )?;
    DiscreteMeasure::new(coords, mu.dim(), mu.weights().to_vec())
}

/// Total energy of a Vlasov-type flow:
/// (1/2) sum_k |xi_k|^2 + (1/(2N)) sum_{k,l} V(x_k - x_l).
///
/// With this normalization the energy is a first integral of the N-body
/// flow generated by the kernel (xi - xi', -grad V(x - x')).
pub fn energy(kernel: &InteractionKernel, state: &ParticleConfiguration) -> Result<f64> {
    if !kernel.is_vlasov() {
        return Err(Error::UnsupportedKernel(
            "energy is defined for Vlasov-type kernels only",
        ));
    }
    if state.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: state.dim(),
        });
    }
    let s = state.dim() / 2;
    let n = state.count();
    let mut kinetic = 0.0;
    for k in 0..n {
        let xi = &state.point(k)[s..];
        kinetic += 0.5 * xi.iter().map(|v| v * v).sum::<f64>();
    }
    let mut potential = 0.0;
    let mut dx = vec![0.0; s];
    for k in 0..n {
        let xk = &state.point(k)[..s];
        for l in 0..n {
            let xl = &state.point(l)[..s];
            for i in 0..s {
                dx[i] = xk[i] - xl[i];
            }
            potential += kernel.potential(&dx).expect("vlasov kernel has a potential");
        }
    }
    Ok(kinetic + potential / (2.0 * n as f64))
}

/// Flow Jacobian by central differences: block (l, k) approximates
/// d z_l(t) / d z_k(0).
#[derive(Debug, Clone)]
pub struct FlowJacobian {
    n: usize,
    dim: usize,
    /// Row-major (n*d) x (n*d): entry [(l*d + j), (k*d + i)].
    data: Vec<f64>,
}

impl FlowJacobian {
    pub fn particle_count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Copy of block a_{lk} as a row-major d x d matrix.
    pub fn block(&self, l: usize, k: usize) -> Vec<f64> {
        let (n, d) = (self.n, self.dim);
        debug_assert!(l < n && k < n);
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            for i in 0..d {
                out[j * d + i] = self.data[(l * d + j) * (n * d) + (k * d + i)];
            }
        }
        out
    }

    /// Spectral norm of block a_{lk}.
    pub fn block_norm(&self, l: usize, k: usize) -> f64 {
        spectral_norm(&self.block(l, k), self.dim, self.dim)
    }

    /// Entry d z_l^j(t) / d z_k^i(0).
    pub fn entry(&self, l: usize, j: usize, k: usize, i: usize) -> f64 {
        self.data[(l * self.dim + j) * (self.n * self.dim) + (k * self.dim + i)]
    }
}

/// Central-difference Jacobian of the flow map at `initial`.
///
/// Each column costs two full flow integrations with the coordinate
/// (k, i) displaced by +-h, where h = h_base * (1 + |z_k^i|); columns are
/// computed in parallel and written by index, so the result is
/// deterministic.
pub fn flow_jacobian_fd(
    kernel: &InteractionKernel,
    initial: &ParticleConfiguration,
    params: &FlowParams,
    h_base: f64,
) -> Result<FlowJacobian> {
    if h_base.is_nan() || h_base <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if initial.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: initial.dim(),
        });
    }
    let n = initial.count();
    let d = initial.dim();
    let m = n * d;
    let columns: Result<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|col| -> Result<Vec<f64>> {
            let h = h_base * (1.0 + initial.coords[col].abs());
            let mut plus = initial.coords.clone();
            plus[col] += h;
            let mut minus = initial.coords.clone();
            minus[col] -= h;
            rk4_integrate(kernel, &mut plus, d, None, params, None)?;
            rk4_integrate(kernel, &mut minus, d, None, params, None)?;
            Ok(plus
                .iter()
                .zip(&minus)
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect())
        })
        .collect();
    let columns = columns?;
    let mut data = vec![0.0; m * m];
    for (col, values) in columns.iter().enumerate() {
        for row in 0..m {
            data[row * m + col] = values[row];
        }
    }
    Ok(FlowJacobian { n, dim: d, data })
}
