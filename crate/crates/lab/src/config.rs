//! Experiment configuration: a JSON file with a fixed schema.
//!
//! Unknown keys are rejected — a mistyped tolerance name must fail the
//! run, not silently fall back to a default. Every run carries its own
//! seed; no randomness is ever taken from the environment.

use meanfield::density::DensitySpec;
use meanfield::kernels::InteractionKernel;
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Dobrushin,
    Chaos,
    HierarchyIdentity,
    NestedStability,
    QnConvergence,
    SpohnJacobian,
    W1Selftest,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Dobrushin => "dobrushin",
            Scenario::Chaos => "chaos",
            Scenario::HierarchyIdentity => "hierarchy-identity",
            Scenario::NestedStability => "nested-stability",
            Scenario::QnConvergence => "qn-convergence",
            Scenario::SpohnJacobian => "spohn-jacobian",
            Scenario::W1Selftest => "w1-selftest",
        }
    }

    /// Stable table of scenarios and the statement each one verifies.
    pub fn all() -> &'static [(Scenario, &'static str)] {
        &[
            (
                Scenario::Dobrushin,
                "exponential stability of the mean-field flow: W1(mu_t, nu_t) <= e^{2Lt} W1(mu_0, nu_0)",
            ),
            (
                Scenario::Chaos,
                "chaoticity rate: dist(P_{N:1}(t), reference(t)) <= C e^{2Lt} N^{-1/(d+4)}",
            ),
            (
                Scenario::HierarchyIdentity,
                "tensorized empirical measures decompose into prefactor * marginal + diagonal defect",
            ),
            (
                Scenario::NestedStability,
                "nested distance stability: Dist(P_t, Q_t) <= e^{2Lt} Dist(P_0, Q_0), recomputed at t",
            ),
            (
                Scenario::QnConvergence,
                "product projections Q_N converge to Q in nested distance as N grows",
            ),
            (
                Scenario::SpohnJacobian,
                "flow Jacobian bounds: |a_lk| <= delta e^{L|s|} + e^{3L|s|}/(2n), row mean <= e^{2L|s|}/n, and the composed-gradient sum bound",
            ),
            (
                Scenario::W1Selftest,
                "exact W1 agrees with permutation and quantile oracles; dual bounds never exceed the primal",
            ),
        ]
    }
}

/// How the reference density enters as a finite measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Deterministic quantile quantization (d = 1 only).
    #[default]
    Quantile,
    /// Seeded i.i.d. sampling.
    Sample,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative slack on the Dobrushin bound (integrator + sampling).
    #[serde(default = "d_stability")]
    pub stability: f64,
    /// Relative slack on the nested stability bound.
    #[serde(default = "d_nested")]
    pub nested: f64,
    /// Additive slack on the fitted chaoticity slope.
    #[serde(default = "d_slope")]
    pub slope_slack: f64,
    /// Monte-Carlo acceptance band in standard errors.
    #[serde(default = "d_sigma")]
    pub sigma_factor: f64,
    /// Additive margin on the Jacobian bounds.
    #[serde(default = "d_jacobian")]
    pub jacobian_margin: f64,
    /// Agreement tolerance between exact solvers and oracles.
    #[serde(default = "d_oracle")]
    pub oracle: f64,
    /// Required relative decrease of the projection distance between the
    /// two scales of the qn-convergence scenario.
    #[serde(default = "d_qn")]
    pub qn_decrease: f64,
}

fn d_stability() -> f64 {
    0.05
}
fn d_nested() -> f64 {
    0.1
}
fn d_slope() -> f64 {
    0.05
}
fn d_sigma() -> f64 {
    3.0
}
fn d_jacobian() -> f64 {
    1e-3
}
fn d_oracle() -> f64 {
    1e-9
}
fn d_qn() -> f64 {
    0.25
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stability: d_stability(),
            nested: d_nested(),
            slope_slack: d_slope(),
            sigma_factor: d_sigma(),
            jacobian_margin: d_jacobian(),
            oracle: d_oracle(),
            qn_decrease: d_qn(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub kernel: InteractionKernel,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub t_list: Vec<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default)]
    pub f_in: Option<DensitySpec>,
    #[serde(default)]
    pub g_in: Option<DensitySpec>,
    #[serde(default = "d_offset")]
    pub offset: f64,
    #[serde(default = "d_members")]
    pub members: usize,
    #[serde(default = "d_ppm")]
    pub points_per_member: usize,
    #[serde(default = "d_spm")]
    pub s_per_member: usize,
    #[serde(default = "d_pooled")]
    pub pooled_target: usize,
    #[serde(default = "d_cap")]
    pub subsample_cap: usize,
    #[serde(default = "d_reference_factor")]
    pub reference_factor: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub reference_mode: ReferenceMode,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn d_dt() -> f64 {
    1e-3
}
fn d_samples() -> usize {
    200
}
fn d_m() -> usize {
    2
}
fn d_offset() -> f64 {
    0.1
}
fn d_members() -> usize {
    64
}
fn d_ppm() -> usize {
    64
}
fn d_spm() -> usize {
    64
}
fn d_pooled() -> usize {
    16_384
}
fn d_cap() -> usize {
    1024
}
fn d_reference_factor() -> usize {
    64
}
fn d_trials() -> usize {
    50
}

impl ExperimentConfig {
    /// Structural checks beyond what serde enforces.
    pub fn validate(&self) -> Result<(), String> {
        self.kernel
            .validate_params()
            .map_err(|e| format!("kernel: {e}"))?;
        if self.dt.is_nan() || self.dt <= 0.0 || !self.dt.is_finite() {
            return Err("dt must be positive and finite".into());
        }
        if self.n_list.contains(&0) {
            return Err("every N in n_list must be >= 1".into());
        }
        if self.t_list.iter().any(|t| !t.is_finite()) {
            return Err("every t in t_list must be finite".into());
        }
        if let Some(f) = &self.f_in {
            f.validate().map_err(|e| format!("f_in: {e}"))?;
        }
        if let Some(g) = &self.g_in {
            g.validate().map_err(|e| format!("g_in: {e}"))?;
        }
        Ok(())
    }

    /// Parse and validate a config from raw bytes, anchoring schema
    /// errors to line and column.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let cfg: ExperimentConfig = serde_json::from_slice(bytes)
            .map_err(|e| format!("{}:{}: {e}", e.line(), e.column()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
