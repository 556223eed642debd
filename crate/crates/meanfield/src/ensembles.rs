//! Laws on the space of measures: nested distances, statistical
//! push-forwards, and product projections.
//!
//! A [`MeasureEnsemble`] is a weighted finite family of discrete
//! measures — the computational stand-in for an element of
//! `P_1(P_1(R^d))`. The nested distance solves the outer transportation
//! problem whose ground costs are themselves exact W1 distances:
//!
//! ```text
//! Dist(P, Q) = min_rho sum_ij rho_ij  W1(mu_i, nu_j).
//! ```
//!
//! The statistical push-forward advances every member along its own
//! mean-field flow (each member, as an empirical measure, is a weak
//! solution of the mean-field equation), leaving weights untouched. The
//! stability check recomputes the nested distance at time t from scratch
//! rather than transporting the initial optimal coupling, so the bound
//! `Dist_t <= e^{2Lt} Dist_0` is tested, not reproduced by construction.

use crate::dynamics::{integrate_measure_flow, FlowParams, ParticleConfiguration};
use crate::error::{Error, Result};
use crate::hierarchy::Ensemble;
use crate::kernels::InteractionKernel;
use crate::rng;
use crate::transport::{self, CostMatrix, DiscreteMeasure};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Hard cap on the member count of one nested-distance operand.
pub const MAX_MEMBERS: usize = 256;

/// A weighted finite family of discrete measures.
#[derive(Debug, Clone)]
pub struct MeasureEnsemble {
    members: Vec<(DiscreteMeasure, f64)>,
    pub seed: u64,
    pub time: f64,
}

impl MeasureEnsemble {
    pub fn new(members: Vec<(DiscreteMeasure, f64)>, seed: u64) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("measure ensemble needs at least one member"))?;
        let d = first.0.dim();
        if members.iter().any(|(m, _)| m.dim() != d) {
            return Err(Error::invalid("members must share the dimension"));
        }
        if members.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("member weights must be nonnegative"));
        }
        let weights: Vec<f64> = members.iter().map(|(_, w)| *w).collect();
        let total = rng::pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "member weights must sum to 1 (got {total})"
            )));
        }
        Ok(MeasureEnsemble {
            members,
            seed,
            time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].0.dim()
    }

    pub fn member(&self, i: usize) -> &DiscreteMeasure {
        &self.members[i].0
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.members[i].1
    }

    pub fn members(&self) -> &[(DiscreteMeasure, f64)] {
        &self.members
    }

    /// Largest first moment among members, for the growth bounds.
    pub fn max_member_first_moment(&self) -> f64 {
        self.members
            .iter()
            .map(|(m, _)| m.moment_abs(1.0))
            .fold(0.0, f64::max)
    }
}

/// View an ensemble of particle configurations as the uniform family of
/// their empirical measures.
pub fn to_measure_ensemble(ens: &Ensemble) -> Result<MeasureEnsemble> {
    let s = ens.len();
    let members: Vec<(DiscreteMeasure, f64)> = ens
        .samples()
        .iter()
        .map(|z| (z.to_measure(), 1.0 / s as f64))
        .collect();
    let mut me = MeasureEnsemble::new(members, ens.seed)?;
    me.time = ens.time;
    Ok(me)
}

/// Finite-sample nested W1 distance: exact inner distances assembled
/// into the ground-cost matrix of an outer transportation problem.
pub fn nested_w1(p: &MeasureEnsemble, q: &MeasureEnsemble) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: q.dim(),
        });
    }
    if p.len() > MAX_MEMBERS || q.len() > MAX_MEMBERS {
        return Err(Error::Capacity {
            what: "nested members",
            got: p.len().max(q.len()),
            limit: MAX_MEMBERS,
        });
    }
    let (n, m) = (p.len(), q.len());
    let entries: Result<Vec<f64>> = (0..n * m)
        .into_par_iter()
        .map(|idx| transport::w1_distance(p.member(idx / m), q.member(idx % m)))
        .collect();
    let cost = CostMatrix {
        data: entries?,
        n,
        m,
    };
    let a: Vec<f64> = (0..n).map(|i| p.weight(i)).collect();
    let b: Vec<f64> = (0..m).map(|j| q.weight(j)).collect();
    let (value, _) = transport::solve_with_cost(&a, &b, &cost)?;
    Ok(value)
}

/// Statistical push-forward: advance every member along its mean-field
/// flow; weights unchanged.
pub fn statistical_pushforward(
    p: &MeasureEnsemble,
    kernel: &InteractionKernel,
    params: &FlowParams,
) -> Result<MeasureEnsemble> {
    if p.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: p.dim(),
        });
    }
    let members: Result<Vec<(DiscreteMeasure, f64)>> = p
        .members
        .par_iter()
        .enumerate()
        .map(|(idx, (m, w))| {
            integrate_measure_flow(kernel, m, params)
                .map(|moved| (moved, *w))
                .map_err(|e| e.with_sample(idx))
        })
        .collect();
    Ok(MeasureEnsemble {
        members: members?,
        seed: p.seed,
        time: p.time + params.t_final,
    })
}

/// Sample the product projection `Q_N = sum_i w_i f_i^(x N)`: each draw
/// picks a member by weight, then draws Z_N i.i.d. from that member's
/// point cloud (resampling the discrete proxy). The member-choice stream
/// depends only on (seed, draw index), never on N, so projections at
/// different N are coupled draw-by-draw.
pub fn qn_projection(
    p: &MeasureEnsemble,
    n: usize,
    s_per_member: usize,
    seed: u64,
) -> Result<Ensemble> {
    if n == 0 || s_per_member == 0 {
        return Err(Error::invalid("need N >= 1 and S_per_member >= 1"));
    }
    let draws = s_per_member * p.len();
    let member_key = rng::mix(seed, rng::tag::MEMBER_CHOICE);
    let resample_key = rng::mix(seed, rng::tag::MEMBER_RESAMPLE);
    let d = p.dim();
    let cumulative: Vec<f64> = p
        .members
        .iter()
        .scan(0.0, |acc, (_, w)| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let samples: Vec<ParticleConfiguration> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut choice = rng::stream(member_key, k as u64);
            let u: f64 = choice.gen_range(0.0..1.0);
            let member = cumulative.partition_point(|c| *c < u).min(p.len() - 1);
            let cloud = p.member(member);
            let mut resample = rng::stream(resample_key, k as u64);
            let mut coords = vec![0.0; n * d];
            for slot in 0..n {
                let atom = weighted_index(cloud.weights(), &mut resample);
                coords[slot * d..(slot + 1) * d].copy_from_slice(cloud.point(atom));
            }
            ParticleConfiguration::from_flat(coords, d).expect("finite members")
        })
        .collect();
    Ensemble::from_samples(samples, seed, p.time)
}

fn weighted_index(weights: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Stratified variant of [`qn_projection`] returning the projected law
/// directly as a `MeasureEnsemble`: member i contributes exactly
/// `s_per_member` empirical measures of weight `w_i / s_per_member`, so
/// the outer marginal of the projection matches the mixture weights with
/// no binomial noise.
pub fn qn_projected_measure_ensemble(
    p: &MeasureEnsemble,
    n: usize,
    s_per_member: usize,
    seed: u64,
) -> Result<MeasureEnsemble> {
    if n == 0 || s_per_member == 0 {
        return Err(Error::invalid("need N >= 1 and S_per_member >= 1"));
    }
    if s_per_member * p.len() > MAX_MEMBERS {
        return Err(Error::Capacity {
            what: "projected members",
            got: s_per_member * p.len(),
            limit: MAX_MEMBERS,
        });
    }
    let resample_key = rng::mix(seed, rng::tag::MEMBER_RESAMPLE);
    let d = p.dim();
    let members: Vec<(DiscreteMeasure, f64)> = (0..p.len() * s_per_member)
        .into_par_iter()
        .map(|k| {
            let member = k / s_per_member;
            let cloud = p.member(member);
            let mut resample = rng::stream(resample_key, k as u64);
            let mut coords = vec![0.0; n * d];
            for slot in 0..n {
                let atom = weighted_index(cloud.weights(), &mut resample);
                coords[slot * d..(slot + 1) * d].copy_from_slice(cloud.point(atom));
            }
            (
                DiscreteMeasure::uniform(coords, d).expect("finite members"),
                p.weight(member) / s_per_member as f64,
            )
        })
        .collect();
    let mut me = MeasureEnsemble::new(members, seed)?;
    me.time = p.time;
    Ok(me)
}

/// Outcome of one nested stability run.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub dist0: f64,
    pub dist_t: f64,
    pub bound: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Evolve both ensembles to time t, recompute the nested distance from
/// scratch, and compare with `e^{2Lt} * Dist_0`.
pub fn nested_stability_check(
    p0: &MeasureEnsemble,
    q0: &MeasureEnsemble,
    kernel: &InteractionKernel,
    t: f64,
    params: &FlowParams,
    tol: f64,
) -> Result<StabilityReport> {
    let dist0 = nested_w1(p0, q0)?;
    let horizon = params.with_horizon(t);
    let pt = statistical_pushforward(p0, kernel, &horizon)?;
    let qt = statistical_pushforward(q0, kernel, &horizon)?;
    let dist_t = nested_w1(&pt, &qt)?;
    let bound = (2.0 * kernel.lipschitz() * t.abs()).exp() * dist0;
    Ok(StabilityReport {
        dist0,
        dist_t,
        bound,
        tol,
        pass: dist_t <= bound * (1.0 + tol) + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensitySpec;

    fn cloud(seed: u64, n: usize) -> DiscreteMeasure {
        DensitySpec::standard_gaussian(1)
            .sample_measure(n, seed)
            .unwrap()
    }

    fn two_member(seed: u64) -> MeasureEnsemble {
        MeasureEnsemble::new(
            vec![(cloud(seed, 16), 0.5), (cloud(seed + 1, 16), 0.5)],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn nested_distance_to_self_is_zero() {
        let p = two_member(3);
        assert!(nested_w1(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singleton_ensembles_reduce_to_w1() {
        let mu = cloud(5, 12);
        let nu = cloud(6, 12);
        let p = MeasureEnsemble::new(vec![(mu.clone(), 1.0)], 1).unwrap();
        let q = MeasureEnsemble::new(vec![(nu.clone(), 1.0)], 2).unwrap();
        let nested = nested_w1(&p, &q).unwrap();
        let flat = transport::w1_distance(&mu, &nu).unwrap();
        assert!((nested - flat).abs() < 1e-12);
    }

    #[test]
    fn two_member_outer_problem_matches_enumeration() {
        let p = two_member(7);
        let q = two_member(11);
        let nested = nested_w1(&p, &q).unwrap();
        let d: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| transport::w1_distance(p.member(i), q.member(j)).unwrap())
                    .collect()
            })
            .collect();
        // Outer problem with uniform halves: the optimum of the 2x2
        // transportation problem over the Birkhoff square.
        let straight = 0.5 * (d[0][0] + d[1][1]);
        let crossed = 0.5 * (d[0][1] + d[1][0]);
        assert!((nested - straight.min(crossed)).abs() < 1e-12);
    }

    #[test]
    fn nested_is_symmetric_and_satisfies_triangle() {
        let p = two_member(1);
        let q = two_member(2);
        let r = two_member(3);
        let pq = nested_w1(&p, &q).unwrap();
        let qp = nested_w1(&q, &p).unwrap();
        let qr = nested_w1(&q, &r).unwrap();
        let pr = nested_w1(&p, &r).unwrap();
        assert!((pq - qp).abs() < 1e-9);
        assert!(pr <= pq + qr + 1e-9);
    }

    #[test]
    fn zero_kernel_pushforward_is_identity() {
        let p = two_member(9);
        let kernel = InteractionKernel::Zero { dim: 1 };
        let params = FlowParams::new(1.0, 1e-2).unwrap();
        let moved = statistical_pushforward(&p, &kernel, &params).unwrap();
        for i in 0..p.len() {
            assert_eq!(moved.member(i).points_flat(), p.member(i).points_flat());
        }
        assert!((moved.time - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_dirac_member_is_stationary_under_linear_kernel() {
        let p = MeasureEnsemble::new(vec![(DiscreteMeasure::dirac(&[0.4]), 1.0)], 0).unwrap();
        let kernel = InteractionKernel::Linear { dim: 1, c: 1.0 };
        let params = FlowParams::new(1.0, 1e-3).unwrap();
        let moved = statistical_pushforward(&p, &kernel, &params).unwrap();
        assert!((moved.member(0).point(0)[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn pushforward_group_property() {
        let p = two_member(13);
        let kernel = InteractionKernel::HarmonicVlasov { spatial_dim: 1 };
        // Members are 1-D clouds; lift to phase space by pairing position
        // with a velocity coordinate.
        let lifted: Vec<(DiscreteMeasure, f64)> = p
            .members()
            .iter()
            .map(|(m, w)| {
                let mut pts = Vec::new();
                for i in 0..m.len() {
                    pts.push(m.point(i)[0]);
                    pts.push(-0.5 * m.point(i)[0]);
                }
                (DiscreteMeasure::uniform(pts, 2).unwrap(), *w)
            })
            .collect();
        let p = MeasureEnsemble::new(lifted, 13).unwrap();
        let params = FlowParams::new(0.0, 1e-3).unwrap();
        let once = statistical_pushforward(
            &statistical_pushforward(&p, &kernel, &params.with_horizon(0.3)).unwrap(),
            &kernel,
            &params.with_horizon(0.4),
        )
        .unwrap();
        let direct = statistical_pushforward(&p, &kernel, &params.with_horizon(0.7)).unwrap();
        for i in 0..p.len() {
            for (a, b) in once
                .member(i)
                .points_flat()
                .iter()
                .zip(direct.member(i).points_flat())
            {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn qn_projection_singleton_matches_member_law() {
        let proxy = DensitySpec::standard_gaussian(1)
            .quantile_quantize(256)
            .unwrap();
        let p = MeasureEnsemble::new(vec![(proxy.clone(), 1.0)], 5).unwrap();
        let ens = qn_projection(&p, 4, 32, 5).unwrap();
        assert_eq!(ens.n_particles, 4);
        assert_eq!(ens.len(), 32);
        // Every drawn coordinate is one of the proxy atoms.
        for z in ens.samples() {
            for k in 0..z.count() {
                let x = z.point(k)[0];
                assert!((0..proxy.len()).any(|i| proxy.point(i)[0] == x));
            }
        }
    }

    #[test]
    fn qn_projection_n1_pooled_law_matches_mixture_mean() {
        let a = DiscreteMeasure::dirac(&[-3.0]);
        let b = DiscreteMeasure::dirac(&[5.0]);
        let p = MeasureEnsemble::new(vec![(a, 0.25), (b, 0.75)], 21).unwrap();
        let ens = qn_projection(&p, 1, 2048, 21).unwrap();
        let pooled = crate::hierarchy::pooled_single_particle_cloud(&ens);
        let mean = pooled.barycenter()[0];
        let expect = 0.25 * -3.0 + 0.75 * 5.0;
        // Binomial noise at S = 4096 draws.
        assert!((mean - expect).abs() < 8.0 * 0.5, "mean {mean}");
        assert!((mean - expect).abs() < 0.5, "mean {mean} vs {expect}");
    }

    #[test]
    fn member_choice_is_coupled_across_n() {
        // Identical draw indices must select identical members for both
        // projection scales.
        let p = MeasureEnsemble::new(
            vec![
                (DiscreteMeasure::dirac(&[-1.0]), 0.5),
                (DiscreteMeasure::dirac(&[1.0]), 0.5),
            ],
            33,
        )
        .unwrap();
        let small = qn_projection(&p, 2, 16, 33).unwrap();
        let large = qn_projection(&p, 8, 16, 33).unwrap();
        for (zs, zl) in small.samples().iter().zip(large.samples()) {
            assert_eq!(zs.point(0)[0], zl.point(0)[0]);
        }
    }

    #[test]
    fn stability_report_under_zero_kernel() {
        let p = two_member(41);
        let q = two_member(42);
        let kernel = InteractionKernel::Zero { dim: 1 };
        let params = FlowParams::new(0.0, 1e-2).unwrap();
        let report = nested_stability_check(&p, &q, &kernel, 0.5, &params, 0.05).unwrap();
        assert!(report.pass);
        assert!((report.dist_t - report.dist0).abs() < 1e-12);
        assert!((report.bound - report.dist0).abs() < 1e-12);
    }

    #[test]
    fn stability_of_identical_ensembles_is_trivially_zero() {
        let p = two_member(44);
        let kernel = InteractionKernel::HarmonicVlasov { spatial_dim: 1 };
        // Lift to phase space with zero velocities.
        let lifted: Vec<(DiscreteMeasure, f64)> = p
            .members()
            .iter()
            .map(|(m, w)| {
                let mut pts = Vec::new();
                for i in 0..m.len() {
                    pts.push(m.point(i)[0]);
                    pts.push(0.0);
                }
                (DiscreteMeasure::uniform(pts, 2).unwrap(), *w)
            })
            .collect();
        let p = MeasureEnsemble::new(lifted, 44).unwrap();
        let params = FlowParams::new(0.0, 1e-2).unwrap();
        let report = nested_stability_check(&p, &p, &kernel, 0.5, &params, 0.05).unwrap();
        assert!(report.pass);
        assert!(report.dist0.abs() < 1e-12);
        assert!(report.dist_t.abs() < 1e-9);
    }

    #[test]
    fn stability_of_translated_ensemble_under_linear_kernel() {
        let base = two_member(55);
        let shifted_members: Vec<(DiscreteMeasure, f64)> = base
            .members()
            .iter()
            .map(|(m, w)| (m.translate(&[0.1]).unwrap(), *w))
            .collect();
        let q = MeasureEnsemble::new(shifted_members, 56).unwrap();
        let kernel = InteractionKernel::Linear { dim: 1, c: 1.0 };
        let params = FlowParams::new(0.0, 1e-3).unwrap();
        let report = nested_stability_check(&base, &q, &kernel, 1.0, &params, 0.05).unwrap();
        // Translated systems stay translated: dist stays 0.1 <= e^2 * 0.1.
        assert!(report.pass);
        assert!((report.dist0 - 0.1).abs() < 1e-9);
        assert!((report.dist_t - 0.1).abs() < 1e-7);
    }

    #[test]
    fn member_pairs_obey_measure_level_stability() {
        // Any two weighted clouds evolved under the same kernel satisfy
        // W1(mu_t, nu_t) <= e^{2Lt} W1(mu_0, nu_0) up to integrator and
        // solver slack.
        let kernel = InteractionKernel::HarmonicVlasov { spatial_dim: 1 };
        let t = 0.5;
        let params = FlowParams::new(t, 1e-3).unwrap();
        let spec = DensitySpec::standard_gaussian(2);
        for seed in [3u64, 4, 5] {
            let mu0 = spec.sample_measure(24, seed).unwrap();
            let nu0 = spec.sample_measure(24, seed + 100).unwrap();
            let d0 = transport::w1_distance(&mu0, &nu0).unwrap();
            let mu_t = crate::dynamics::integrate_measure_flow(&kernel, &mu0, &params).unwrap();
            let nu_t = crate::dynamics::integrate_measure_flow(&kernel, &nu0, &params).unwrap();
            let d_t = transport::w1_distance(&mu_t, &nu_t).unwrap();
            let bound = (2.0 * kernel.lipschitz() * t).exp() * d0 * 1.05;
            assert!(d_t <= bound, "seed {seed}: {d_t} > {bound}");
        }
    }

    #[test]
    fn member_first_moments_obey_growth_bound() {
        let p = two_member(71);
        let kernel = InteractionKernel::Linear { dim: 1, c: 1.0 };
        let t = 0.5;
        let params = FlowParams::new(t, 1e-3).unwrap();
        let moved = statistical_pushforward(&p, &kernel, &params).unwrap();
        for i in 0..p.len() {
            let before = p.member(i).moment_abs(1.0);
            let after = moved.member(i).moment_abs(1.0);
            assert!(after <= (2.0 * t).exp() * before * (1.0 + 1e-6));
        }
    }
}
