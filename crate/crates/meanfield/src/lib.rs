//! Mean-field particle dynamics laboratory.
//!
//! The crate provides, in dependency order:
//!
//! - [`kernels`]: antisymmetric Lipschitz pair interactions `K(z, z')`
//!   and the mean-field force of a measure;
//! - [`dynamics`]: the N-body flow `dz_k/dt = (1/N) sum_l K(z_k, z_l)`,
//!   integrated with fixed-step RK4, plus finite-difference flow
//!   Jacobians and conserved quantities;
//! - [`transport`]: exact Monge-Kantorovich-1 distances on discrete
//!   measures (assignment / network simplex), dual lower bounds, tensor
//!   powers, and brute-force oracles;
//! - [`density`]: reference densities with seeded sampling and
//!   deterministic quantile quantization;
//! - [`testfn`]: bounded Lipschitz test functions of m variables with
//!   known sup and gradient bounds;
//! - [`hierarchy`]: Monte-Carlo estimators for the m-body marginals of
//!   the N-particle law, the tensorized-empirical-measure identity, and
//!   chaoticity distances;
//! - [`ensembles`]: nested W1 distances between ensembles of measures,
//!   statistical push-forwards, and product projections;
//! - [`spohn`]: monomial observables, the generator identity, and flow
//!   Jacobian bounds;
//! - [`io`]: CSV and JSON readers/writers for the file formats shared
//!   with the command-line runner.
//!
//! Everything is deterministic given a seed: randomness flows through
//! the splittable streams in [`rng`], parallel loops place results by
//! index, and reductions use fixed-order pairwise summation.

pub mod density;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod spohn;
pub mod testfn;
pub mod transport;

pub use error::{Error, Result};
pub use kernels::InteractionKernel;
pub use transport::DiscreteMeasure;
