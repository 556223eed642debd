//! Reference densities f^in.
//!
//! A density enters the computation only through finite proxies: either a
//! seeded i.i.d. sample (any dimension) or a deterministic quantile
//! quantization (d = 1). All built-ins have moments of every order, in
//! particular the (d+5)-th moment required by the chaoticity estimates.

use crate::error::{Error, Result};
use crate::rng;
use crate::transport::DiscreteMeasure;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

/// One Gaussian component with diagonal covariance, given as per-axis
/// standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Density specification for initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensitySpec {
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    GaussianMixture { components: Vec<GaussianComponent> },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl DensitySpec {
    pub fn standard_gaussian(dim: usize) -> Self {
        DensitySpec::Gaussian {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Gaussian { mean, .. } => mean.len(),
            DensitySpec::GaussianMixture { components } => {
                components.first().map_or(0, |c| c.mean.len())
            }
            DensitySpec::Uniform { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Gaussian { mean, std } => {
                if mean.is_empty() || mean.len() != std.len() {
                    return Err(Error::invalid("gaussian mean/std length mismatch"));
                }
                if std.iter().any(|s| s.is_nan() || *s < 0.0 || !s.is_finite()) {
                    return Err(Error::invalid("gaussian std must be >= 0 and finite"));
                }
            }
            DensitySpec::GaussianMixture { components } => {
                if components.is_empty() {
                    return Err(Error::invalid("mixture needs at least one component"));
                }
                let d = components[0].mean.len();
                let mut total = 0.0;
                for c in components {
                    if c.mean.len() != d || c.std.len() != d {
                        return Err(Error::invalid("mixture component dimension mismatch"));
                    }
                    if c.weight.is_nan() || c.weight < 0.0 {
                        return Err(Error::invalid("mixture weights must be nonnegative"));
                    }
                    if c.std.iter().any(|s| s.is_nan() || *s < 0.0 || !s.is_finite()) {
                        return Err(Error::invalid("mixture std must be >= 0 and finite"));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "mixture weights must sum to 1 (got {total})"
                    )));
                }
            }
            DensitySpec::Uniform { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::invalid("uniform lo/hi length mismatch"));
                }
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(Error::invalid("uniform box requires lo <= hi"));
                }
            }
        }
        Ok(())
    }

    /// Draw one point into `out`.
    pub fn sample_into(&self, rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        match self {
            DensitySpec::Gaussian { mean, std } => {
                for i in 0..out.len() {
                    if std[i] == 0.0 {
                        out[i] = mean[i];
                    } else {
                        let normal = Normal::new(mean[i], std[i]).expect("validated std");
                        out[i] = normal.sample(rng);
                    }
                }
            }
            DensitySpec::GaussianMixture { components } => {
                let u: f64 = rng.gen_range(0.0..1.0);
                let mut acc = 0.0;
                let mut chosen = components.len() - 1;
                for (idx, c) in components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        chosen = idx;
                        break;
                    }
                }
                let c = &components[chosen];
                for i in 0..out.len() {
                    if c.std[i] == 0.0 {
                        out[i] = c.mean[i];
                    } else {
                        let normal = Normal::new(c.mean[i], c.std[i]).expect("validated std");
                        out[i] = normal.sample(rng);
                    }
                }
            }
            DensitySpec::Uniform { lo, hi } => {
                for i in 0..out.len() {
                    out[i] = if lo[i] == hi[i] {
                        lo[i]
                    } else {
                        rng.gen_range(lo[i]..hi[i])
                    };
                }
            }
        }
    }

    /// Seeded i.i.d. proxy with n atoms and uniform weights.
    pub fn sample_measure(&self, n: usize, seed: u64) -> Result<DiscreteMeasure> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("proxy needs n >= 1"));
        }
        let d = self.dim();
        let mut rng = rng::stream(rng::mix(seed, rng::tag::DENSITY_PROXY), 0);
        let mut points = vec![0.0; n * d];
        for k in 0..n {
            self.sample_into(&mut rng, &mut points[k * d..(k + 1) * d]);
        }
        DiscreteMeasure::uniform(points, d)
    }

    /// CDF in one dimension, used by quantile quantization.
    fn cdf_1d(&self, x: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { mean, std } => gaussian_cdf(mean[0], std[0], x),
            DensitySpec::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * gaussian_cdf(c.mean[0], c.std[0], x))
                .sum(),
            DensitySpec::Uniform { lo, hi } => {
                if hi[0] == lo[0] {
                    if x < lo[0] {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    ((x - lo[0]) / (hi[0] - lo[0])).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Deterministic quantile quantization in d = 1: n atoms at the
    /// quantiles of the midpoints (i + 1/2)/n, uniform weights. The W1
    /// error of this proxy decays like the quantile increments and is
    /// checked empirically by resolution doubling.
    pub fn quantile_quantize(&self, n: usize) -> Result<DiscreteMeasure> {
        self.validate()?;
        if self.dim() != 1 {
            return Err(Error::invalid("quantile quantization requires d = 1"));
        }
        if n == 0 {
            return Err(Error::invalid("proxy needs n >= 1"));
        }
        let points: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                self.quantile_1d(u)
            })
            .collect();
        DiscreteMeasure::uniform(points, 1)
    }

    fn quantile_1d(&self, u: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { mean, std } => {
                if std[0] == 0.0 {
                    mean[0]
                } else {
                    NormalDist::new(mean[0], std[0])
                        .expect("validated std")
                        .inverse_cdf(u)
                }
            }
            DensitySpec::Uniform { lo, hi } => lo[0] + (hi[0] - lo[0]) * u,
            DensitySpec::GaussianMixture { components } => {
                // Bracket the quantile and bisect the mixture CDF.
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for c in components {
                    lo = lo.min(c.mean[0] - 12.0 * c.std[0] - 1.0);
                    hi = hi.max(c.mean[0] + 12.0 * c.std[0] + 1.0);
                }
                let mut a = lo;
                let mut b = hi;
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if self.cdf_1d(mid) < u {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if b - a < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                0.5 * (a + b)
            }
        }
    }
}

fn gaussian_cdf(mean: f64, std: f64, x: f64) -> f64 {
    if std == 0.0 {
        return if x < mean { 0.0 } else { 1.0 };
    }
    NormalDist::new(mean, std).expect("validated std").cdf(x)
}
