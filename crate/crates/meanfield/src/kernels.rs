//! Pair-interaction kernels.
//!
//! Every kernel `K: R^d x R^d -> R^d` in this crate is antisymmetric,
//!
//! ```text
//! K(z, z') + K(z', z) = 0,
//! ```
//!
//! and globally Lipschitz in each argument with an explicit constant `L`
//! that is computed at construction. Antisymmetry makes the total
//! momentum of the particle flow exactly conserved, and the constant `L`
//! drives every exponential stability bound downstream (`e^{2L|t|}`
//! factors), so both are structural, not incidental.
//!
//! The Vlasov-type kernels act on a phase space `z = (x, xi)` split into
//! position and velocity, with
//!
//! ```text
//! K((x, xi), (x', xi')) = (xi - xi', -grad V(x - x'))
//! ```
//!
//! for an even potential `V`. The smoothed Biot-Savart kernel is the 2-D
//! rotational kernel with the point singularity mollified so that a
//! global Lipschitz constant exists; the raw singular kernels are out of
//! scope.

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::rng;
use crate::transport::DiscreteMeasure;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The 2-D rotation by pi/2 entering the mollified Biot-Savart kernel.
const ROTATION: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

/// An antisymmetric, globally Lipschitz pair-interaction kernel together
/// with its phase-space dimension and declared Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum InteractionKernel {
    /// K = 0. The flow is the identity.
    Zero { dim: usize },
    /// K(z, z') = c (z - z'). The flow has a closed form and is the main
    /// analytic oracle for integrator and Jacobian tests.
    Linear { dim: usize, c: f64 },
    /// Vlasov kernel with harmonic potential V(x) = |x|^2 / 2.
    HarmonicVlasov { spatial_dim: usize },
    /// Vlasov kernel with the Gaussian-well potential
    /// V(x) = -strength * exp(-|x|^2 / (2 eps^2)).
    SmoothedVlasov {
        spatial_dim: usize,
        strength: f64,
        epsilon: f64,
    },
    /// Mollified 2-D rotational kernel
    /// K(z, z') = J (z - z') / (2 pi (|z - z'|^2 + eps^2)).
    SmoothedBiotSavart { epsilon: f64 },
}

/// Result of the randomized structural check of a kernel.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// max |K(z,z') + K(z',z)| over sampled pairs.
    pub max_antisym_defect: f64,
    /// max |K(z1,z') - K(z2,z')| / |z1 - z2| over sampled triples: an
    /// empirical lower bound for the Lipschitz constant.
    pub lipschitz_lb: f64,
    /// False iff the observed lower bound exceeds the declared constant.
    pub ok: bool,
}

impl InteractionKernel {
    /// Phase-space dimension d.
    pub fn dim(&self) -> usize {
        match self {
            InteractionKernel::Zero { dim } | InteractionKernel::Linear { dim, .. } => *dim,
            InteractionKernel::HarmonicVlasov { spatial_dim }
            | InteractionKernel::SmoothedVlasov { spatial_dim, .. } => 2 * spatial_dim,
            InteractionKernel::SmoothedBiotSavart { .. } => 2,
        }
    }

    /// Declared global Lipschitz constant L (Euclidean norms).
    ///
    /// Zero: 0. Linear: |c|. HarmonicVlasov: 1. SmoothedVlasov:
    /// max(1, strength / eps^2), since the Gaussian well has
    /// Lip(grad V) = strength / eps^2, attained at the origin.
    /// SmoothedBiotSavart: 1 / (2 pi eps^2), attained at coincidence.
    pub fn lipschitz(&self) -> f64 {
        match self {
            InteractionKernel::Zero { .. } => 0.0,
            InteractionKernel::Linear { c, .. } => c.abs(),
            InteractionKernel::HarmonicVlasov { .. } => 1.0,
            InteractionKernel::SmoothedVlasov {
                strength, epsilon, ..
            } => (strength / (epsilon * epsilon)).max(1.0),
            InteractionKernel::SmoothedBiotSavart { epsilon } => {
                1.0 / (2.0 * std::f64::consts::PI * epsilon * epsilon)
            }
        }
    }

    /// Check structural parameters (dimensions and positivity).
    pub fn validate_params(&self) -> Result<()> {
        let ok = match self {
            InteractionKernel::Zero { dim } | InteractionKernel::Linear { dim, .. } => *dim >= 1,
            InteractionKernel::HarmonicVlasov { spatial_dim } => *spatial_dim >= 1,
            InteractionKernel::SmoothedVlasov {
                spatial_dim,
                strength,
                epsilon,
            } => *spatial_dim >= 1 && *strength > 0.0 && *epsilon > 0.0,
            InteractionKernel::SmoothedBiotSavart { epsilon } => *epsilon > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad kernel parameters: {self:?}")))
        }
    }

    /// True for Vlasov-type kernels, whose phase space splits as (x, xi).
    pub fn is_vlasov(&self) -> bool {
        matches!(
            self,
            InteractionKernel::HarmonicVlasov { .. } | InteractionKernel::SmoothedVlasov { .. }
        )
    }

    /// Pair potential V(dx) for Vlasov-type kernels, `None` otherwise.
    pub fn potential(&self, dx: &[f64]) -> Option<f64> {
        match self {
            InteractionKernel::HarmonicVlasov { .. } => {
                Some(0.5 * dx.iter().map(|v| v * v).sum::<f64>())
            }
            InteractionKernel::SmoothedVlasov {
                strength, epsilon, ..
            } => {
                let q = dx.iter().map(|v| v * v).sum::<f64>();
                Some(-strength * (-q / (2.0 * epsilon * epsilon)).exp())
            }
            _ => None,
        }
    }

    /// K(z, z') is affine in z' for these kernels, so the mean-field sum
    /// over a probability measure collapses to a single evaluation at the
    /// barycenter: sum_l w_l K(z, z_l) = K(z, sum_l w_l z_l).
    pub(crate) fn affine_in_second(&self) -> bool {
        matches!(
            self,
            InteractionKernel::Zero { .. }
                | InteractionKernel::Linear { .. }
                | InteractionKernel::HarmonicVlasov { .. }
        )
    }

    /// Evaluate K(z, z') without dimension checks. `out` must have length d.
    pub(crate) fn eval_into(&self, z: &[f64], zp: &[f64], out: &mut [f64]) {
        match self {
            InteractionKernel::Zero { .. } => out.fill(0.0),
            InteractionKernel::Linear { c, .. } => {
                for i in 0..out.len() {
                    out[i] = c * (z[i] - zp[i]);
                }
            }
            InteractionKernel::HarmonicVlasov { spatial_dim } => {
                let s = *spatial_dim;
                for i in 0..s {
                    out[i] = z[s + i] - zp[s + i];
                    out[s + i] = -(z[i] - zp[i]);
                }
            }
            InteractionKernel::SmoothedVlasov {
                spatial_dim,
                strength,
                epsilon,
            } => {
                let s = *spatial_dim;
                let mut q = 0.0;
                for i in 0..s {
                    let dx = z[i] - zp[i];
                    q += dx * dx;
                }
                // grad V(x) = (strength / eps^2) x exp(-|x|^2 / (2 eps^2))
                let g = strength / (epsilon * epsilon) * (-q / (2.0 * epsilon * epsilon)).exp();
                for i in 0..s {
                    out[i] = z[s + i] - zp[s + i];
                    out[s + i] = -g * (z[i] - zp[i]);
                }
            }
            InteractionKernel::SmoothedBiotSavart { epsilon } => {
                let dx = z[0] - zp[0];
                let dy = z[1] - zp[1];
                let denom =
                    2.0 * std::f64::consts::PI * (dx * dx + dy * dy + epsilon * epsilon);
                out[0] = (ROTATION[0][0] * dx + ROTATION[0][1] * dy) / denom;
                out[1] = (ROTATION[1][0] * dx + ROTATION[1][1] * dy) / denom;
            }
        }
    }

    /// K(z, z') with dimension checks.
    pub fn eval(&self, z: &[f64], zp: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if z.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: z.len(),
            });
        }
        if zp.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: zp.len(),
            });
        }
        let mut out = vec![0.0; d];
        self.eval_into(z, zp, &mut out);
        Ok(out)
    }

    /// Mean-field force of a discrete measure at z:
    /// (K mu)(z) = sum_i w_i K(z, p_i).
    pub fn mean_field_force(&self, mu: &DiscreteMeasure, z: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if mu.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: mu.dim(),
            });
        }
        if z.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: z.len(),
            });
        }
        let mut out = vec![0.0; d];
        if self.affine_in_second() {
            let bary = mu.barycenter();
            self.eval_into(z, &bary, &mut out);
            return Ok(out);
        }
        let mut term = vec![0.0; d];
        for i in 0..mu.len() {
            self.eval_into(z, mu.point(i), &mut term);
            let w = mu.weight(i);
            for (o, t) in out.iter_mut().zip(&term) {
                *o += w * t;
            }
        }
        Ok(out)
    }

    /// Randomized structural check: samples pairs in a centered box of the
    /// given radius and measures the antisymmetry defect and an empirical
    /// Lipschitz lower bound for the first argument.
    pub fn validate(&self, samples: usize, radius: f64, seed: u64) -> Result<KernelReport> {
        if samples == 0 {
            return Err(Error::invalid("validate requires samples >= 1"));
        }
        let d = self.dim();
        let mut rng = rng::stream(rng::mix(seed, rng::tag::KERNEL_VALIDATE), 0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..d).map(|_| rng.gen_range(-radius..=radius)).collect()
        };
        let mut max_defect = 0.0_f64;
        let mut lip_lb = 0.0_f64;
        let mut kab = vec![0.0; d];
        let mut kba = vec![0.0; d];
        for _ in 0..samples {
            let z1 = draw(&mut rng);
            let z2 = draw(&mut rng);
            let zp = draw(&mut rng);
            self.eval_into(&z1, &zp, &mut kab);
            self.eval_into(&zp, &z1, &mut kba);
            let defect: f64 = kab
                .iter()
                .zip(&kba)
                .map(|(a, b)| (a + b) * (a + b))
                .sum::<f64>()
                .sqrt();
            max_defect = max_defect.max(defect);
            let sep = dist(&z1, &z2);
            if sep > 1e-12 {
                self.eval_into(&z2, &zp, &mut kba);
                let diff: f64 = kab
                    .iter()
                    .zip(&kba)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                lip_lb = lip_lb.max(diff / sep);
            }
        }
        Ok(KernelReport {
            max_antisym_defect: max_defect,
            lipschitz_lb: lip_lb,
            ok: lip_lb <= self.lipschitz() * (1.0 + 1e-9),
        })
    }
}

/// Force magnitude bound |K(z,z')| <= L |z - z'|, retained as a helper for
/// tests of the growth estimates.
pub fn force_bound(kernel: &InteractionKernel, z: &[f64], zp: &[f64]) -> f64 {
    kernel.lipschitz() * dist(z, zp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    fn builtin_kernels() -> Vec<InteractionKernel> {
        vec![
            InteractionKernel::Zero { dim: 3 },
            InteractionKernel::Linear { dim: 2, c: 1.5 },
            InteractionKernel::HarmonicVlasov { spatial_dim: 2 },
            InteractionKernel::SmoothedVlasov {
                spatial_dim: 1,
                strength: 0.8,
                epsilon: 0.5,
            },
            InteractionKernel::SmoothedBiotSavart { epsilon: 0.3 },
        ]
    }

    #[test]
    fn zero_kernel_evaluates_to_zero() {
        let k = InteractionKernel::Zero { dim: 3 };
        let v = k.eval(&[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_kernel_matches_definition() {
        let k = InteractionKernel::Linear { dim: 1, c: 1.0 };
        let v = k.eval(&[2.0], &[0.0]).unwrap();
        assert_eq!(v, vec![2.0]);
    }

    #[test]
    fn harmonic_vlasov_hand_value() {
        // z = (x, xi) = (1, 0), z' = (0, 2): K = (xi - xi', -(x - x')) = (-2, -1).
        let k = InteractionKernel::HarmonicVlasov { spatial_dim: 1 };
        let v = k.eval(&[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((v[0] - (-2.0)).abs() < 1e-15);
        assert!((v[1] - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = InteractionKernel::HarmonicVlasov { spatial_dim: 1 };
        assert!(k.eval(&[1.0], &[0.0, 2.0]).is_err());
        assert!(k.eval(&[1.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn antisymmetry_holds_on_samples() {
        for k in builtin_kernels() {
            let report = k.validate(256, 5.0, 17).unwrap();
            assert!(
                report.max_antisym_defect <= 1e-12,
                "{k:?}: defect {}",
                report.max_antisym_defect
            );
        }
    }

    #[test]
    fn declared_lipschitz_dominates_sampled_ratio() {
        for k in builtin_kernels() {
            let report = k.validate(512, 4.0, 23).unwrap();
            assert!(
                report.ok,
                "{k:?}: lb {} > L {}",
                report.lipschitz_lb,
                k.lipschitz()
            );
        }
    }

    #[test]
    fn zero_kernel_report_is_degenerate() {
        let k = InteractionKernel::Zero { dim: 2 };
        let report = k.validate(64, 1.0, 3).unwrap();
        assert_eq!(report.max_antisym_defect, 0.0);
        assert_eq!(report.lipschitz_lb, 0.0);
        assert!(report.ok);
    }

    #[test]
    fn linear_lipschitz_ratio_is_exact() {
        let k = InteractionKernel::Linear { dim: 1, c: 1.0 };
        let report = k.validate(128, 2.0, 5).unwrap();
        assert!(report.lipschitz_lb <= 1.0 + 1e-12);
        assert!(report.lipschitz_lb > 1.0 - 1e-9);
    }

    #[test]
    fn mean_field_force_of_dirac_is_kernel_eval() {
        let k = InteractionKernel::SmoothedBiotSavart { epsilon: 0.25 };
        let mu = DiscreteMeasure::dirac(&[0.3, -0.4]);
        let z = [1.0, 1.0];
        let f = k.mean_field_force(&mu, &z).unwrap();
        let direct = k.eval(&z, &[0.3, -0.4]).unwrap();
        for (a, b) in f.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_field_force_linear_uses_barycenter() {
        let k = InteractionKernel::Linear { dim: 1, c: 2.0 };
        let mu = DiscreteMeasure::uniform(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let f = k.mean_field_force(&mu, &[5.0]).unwrap();
        assert!((f[0] - 2.0 * (5.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn mean_field_force_is_affine_in_weights() {
        let k = InteractionKernel::SmoothedVlasov {
            spatial_dim: 1,
            strength: 1.0,
            epsilon: 0.7,
        };
        let mu = DiscreteMeasure::uniform(vec![0.0, 0.0, 1.0, 0.5], 2).unwrap();
        let nu = DiscreteMeasure::uniform(vec![-1.0, 0.2, 0.4, -0.3], 2).unwrap();
        let alpha = 0.3;
        let mix = DiscreteMeasure::mixture(&mu, &nu, 1.0 - alpha).unwrap();
        let z = [0.1, -0.2];
        let fm = k.mean_field_force(&mu, &z).unwrap();
        let fn_ = k.mean_field_force(&nu, &z).unwrap();
        let fmix = k.mean_field_force(&mix, &z).unwrap();
        for i in 0..2 {
            assert!((fmix[i] - ((1.0 - alpha) * fm[i] + alpha * fn_[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn biot_savart_norm_is_bounded_by_declared_lipschitz_times_distance() {
        let k = InteractionKernel::SmoothedBiotSavart { epsilon: 0.5 };
        let l = k.lipschitz();
        let mut rng = rng::stream(1, 0);
        for _ in 0..200 {
            let z: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let zp: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let v = k.eval(&z, &zp).unwrap();
            assert!(norm(&v) <= l * dist(&z, &zp) + 1e-12);
        }
    }

    #[test]
    fn force_bound_holds_for_all_builtin_kernels() {
        // |K(z, z')| <= L |z - z'|: the growth bound that antisymmetry and
        // the Lipschitz condition imply together.
        let mut rng = rng::stream(2, 0);
        for k in builtin_kernels() {
            let d = k.dim();
            let l = k.lipschitz();
            for _ in 0..300 {
                let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let zp: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let v = k.eval(&z, &zp).unwrap();
                let allowed = force_bound(&k, &z, &zp);
                assert!(
                    norm(&v) <= allowed + 1e-12,
                    "{k:?}: |K| = {} > L |dz| = {allowed} (L = {l})",
                    norm(&v)
                );
            }
        }
    }
}
