//! Monte Carlo comparison of ERM and RRM on the synthetic contamination
//! benchmarks, plus the label-flipping evaluation on tabular data.

use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{
    gen_covariance, gen_linreg, gen_logreg, gen_pca, CovarianceSpec, LinRegSpec, LogRegSpec,
    PcaSpec, SeededRng,
};
use crate::error::{Result, RrmError};
use crate::models::{
    ClassificationData, Gaussian, LinearRegression, LogisticRegression, ModelFamily, Pca,
    PointData, RegressionData,
};
use crate::solver::{
    erm_fit, rrm_fit, RrmConfig, TraceEntry, DEFAULT_MAX_OUTER_ITERATIONS,
    DEFAULT_OBJECTIVE_TOLERANCE,
};

pub mod io;
mod metrics;
mod real_data;
mod summary;

pub use metrics::{metric_angle_deg, metric_cov_relerr, metric_misalignment, metric_relative_error};
pub use real_data::{evaluate_label_flips, run_real_data, ConfusionMatrix, RealDataOutcome};
pub use summary::{mean, median, quantile, Method, MethodSummary};

/// Version of the built-in defaults table below.
pub const DEFAULTS_VERSION: u32 = 1;

/// Corruption levels of the linear-regression sweep.
pub const SWEEP_EPS_GRID: [f64; 9] = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40];
/// Degrees of freedom of the corrupting noise in the sweep (finite variance).
pub const SWEEP_NU: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Linreg,
    Logreg,
    Pca,
    Covariance,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Linreg,
        ExperimentKind::Logreg,
        ExperimentKind::Pca,
        ExperimentKind::Covariance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Linreg => "linreg",
            ExperimentKind::Logreg => "logreg",
            ExperimentKind::Pca => "pca",
            ExperimentKind::Covariance => "covariance",
        }
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            ExperimentKind::Linreg => "relative_error",
            ExperimentKind::Logreg => "angle_deg",
            ExperimentKind::Pca => "misalignment",
            ExperimentKind::Covariance => "cov_relative_frobenius_error",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = RrmError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                RrmError::Config(format!(
                    "unknown experiment '{s}'; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Fully resolved settings of one experiment. Fields that do not apply to a
/// family are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub eps: f64,
    pub eps_tilde: f64,
    pub nu: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    /// Feature dimension of the regression experiment.
    pub dim: Option<usize>,
    pub max_outer_iterations: usize,
    pub objective_rel_tolerance: f64,
}

/// Partial settings layered over the defaults (config file, then flags).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOverrides {
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub eps_tilde: Option<f64>,
    pub nu: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub dim: Option<usize>,
    pub max_outer_iterations: Option<usize>,
    pub objective_rel_tolerance: Option<f64>,
}

impl ExperimentOverrides {
    /// Fields set in `other` take precedence.
    pub fn merged_with(&self, other: &ExperimentOverrides) -> ExperimentOverrides {
        ExperimentOverrides {
            n: other.n.or(self.n),
            eps: other.eps.or(self.eps),
            eps_tilde: other.eps_tilde.or(self.eps_tilde),
            nu: other.nu.or(self.nu),
            sigma: other.sigma.or(self.sigma),
            rho: other.rho.or(self.rho),
            dim: other.dim.or(self.dim),
            max_outer_iterations: other.max_outer_iterations.or(self.max_outer_iterations),
            objective_rel_tolerance: other.objective_rel_tolerance.or(self.objective_rel_tolerance),
        }
    }
}

impl ExperimentConfig {
    /// Built-in defaults for each benchmark.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            n: 0,
            eps: 0.0,
            eps_tilde: 0.0,
            nu: None,
            sigma: None,
            rho: None,
            dim: None,
            max_outer_iterations: DEFAULT_MAX_OUTER_ITERATIONS,
            objective_rel_tolerance: DEFAULT_OBJECTIVE_TOLERANCE,
        };
        match kind {
            ExperimentKind::Linreg => ExperimentConfig {
                n: 40,
                eps: 0.20,
                eps_tilde: 0.40,
                nu: Some(1.5),
                sigma: Some(0.25),
                dim: Some(10),
                ..base
            },
            ExperimentKind::Logreg => ExperimentConfig {
                n: 100,
                eps: 0.05,
                eps_tilde: 0.30,
                rho: Some(0.99),
                ..base
            },
            ExperimentKind::Pca => ExperimentConfig {
                n: 40,
                eps: 0.20,
                eps_tilde: 0.40,
                nu: Some(1.5),
                sigma: Some(0.25),
                ..base
            },
            ExperimentKind::Covariance => ExperimentConfig {
                n: 50,
                eps: 0.20,
                eps_tilde: 0.30,
                nu: Some(1.5),
                ..base
            },
        }
    }

    /// Defaults with `overrides` applied; rejects fields the family does not use.
    pub fn resolve(kind: ExperimentKind, overrides: &ExperimentOverrides) -> Result<Self> {
        let mut c = ExperimentConfig::defaults(kind);
        let optional = |slot: &mut Option<f64>, value: Option<f64>, name: &str| -> Result<()> {
            if let Some(v) = value {
                if slot.is_none() {
                    return Err(RrmError::Config(format!("'{name}' does not apply to {kind}")));
                }
                *slot = Some(v);
            }
            Ok(())
        };
        optional(&mut c.nu, overrides.nu, "nu")?;
        optional(&mut c.sigma, overrides.sigma, "sigma")?;
        optional(&mut c.rho, overrides.rho, "rho")?;
        if let Some(d) = overrides.dim {
            if c.dim.is_none() {
                return Err(RrmError::Config(format!("'dim' does not apply to {kind}")));
            }
            c.dim = Some(d);
        }
        c.n = overrides.n.unwrap_or(c.n);
        c.eps = overrides.eps.unwrap_or(c.eps);
        c.eps_tilde = overrides.eps_tilde.unwrap_or(c.eps_tilde);
        c.max_outer_iterations = overrides.max_outer_iterations.unwrap_or(c.max_outer_iterations);
        c.objective_rel_tolerance = overrides
            .objective_rel_tolerance
            .unwrap_or(c.objective_rel_tolerance);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(RrmError::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(RrmError::Config(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if let Some(rho) = self.rho {
            if !(rho > -1.0 && rho < 1.0) {
                return Err(RrmError::Config(format!("rho must lie in (-1, 1), got {rho}")));
            }
        }
        for (name, value) in [("nu", self.nu), ("sigma", self.sigma)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(RrmError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.dim == Some(0) {
            return Err(RrmError::Config("dim must be at least 1".into()));
        }
        let config = self.rrm_config()?;
        config.validate()?;
        config.bound.target_entropy(self.n)?;
        Ok(())
    }

    pub fn rrm_config(&self) -> Result<RrmConfig> {
        Ok(RrmConfig::new(self.eps_tilde)?
            .with_max_outer_iterations(self.max_outer_iterations)
            .with_tolerance(self.objective_rel_tolerance)
            .with_trace(true))
    }
}

/// One method's metric on one simulated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub experiment: String,
    pub method: Method,
    pub metric: String,
    pub seed: u64,
    /// NaN when the fit failed; such trials are flagged `excluded`.
    pub value: f64,
    pub excluded: bool,
    pub error: Option<String>,
    pub dataset_hash: String,
    /// Outer-iteration trace (RRM only).
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
    pub converged: Option<bool>,
    #[serde(skip)]
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: ExperimentKind,
    pub metric: String,
    pub mc_runs: usize,
    pub base_seed: u64,
    pub defaults_version: u32,
    pub config: ExperimentConfig,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    pub fn method(&self, method: Method) -> &MethodSummary {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .expect("summaries cover every method")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub trials: Vec<TrialResult>,
}

impl ExperimentReport {
    pub fn values(&self, method: Method) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.method == method && !t.excluded)
            .map(|t| t.value)
            .collect()
    }
}

/// Short content hash of a dataset, recorded so paired trials can be audited.
fn dataset_hash<'a>(values: impl Iterator<Item = &'a f64>, extra: &[u8]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher.update(extra);
    hex::encode(&hasher.finalize()[..8])
}

trait Hashable {
    fn content_hash(&self) -> String;
}

impl Hashable for RegressionData {
    fn content_hash(&self) -> String {
        dataset_hash(self.features().iter().chain(self.targets().iter()), &[])
    }
}

impl Hashable for ClassificationData {
    fn content_hash(&self) -> String {
        dataset_hash(self.features().iter(), self.labels())
    }
}

impl Hashable for PointData {
    fn content_hash(&self) -> String {
        dataset_hash(self.points().iter(), &[])
    }
}

struct MethodOutcome {
    value: Result<f64>,
    trace: Vec<TraceEntry>,
    converged: Option<bool>,
}

/// Fits ERM and RRM to the same data and scores both with `score`.
fn paired_fits<F, S>(
    family: &F,
    data: &F::Data,
    config: &RrmConfig,
    score: S,
) -> [(Method, MethodOutcome); 2]
where
    F: ModelFamily,
    S: Fn(&F::Params) -> Result<f64>,
{
    let erm = MethodOutcome {
        value: erm_fit(family, data).and_then(|p| score(&p)),
        trace: Vec::new(),
        converged: None,
    };
    let rrm = match rrm_fit(family, data, config) {
        Ok(result) => MethodOutcome {
            value: score(&result.params),
            trace: result.trace,
            converged: Some(result.converged),
        },
        Err(e) => MethodOutcome {
            value: Err(e),
            trace: Vec::new(),
            converged: None,
        },
    };
    [(Method::Erm, erm), (Method::Rrm, rrm)]
}

fn linreg_spec(config: &ExperimentConfig) -> LinRegSpec {
    LinRegSpec {
        eps: config.eps,
        theta_star: vec![1.0; config.dim.unwrap_or(10)],
        sigma: config.sigma.unwrap_or(0.25),
        nu: config.nu.unwrap_or(1.5),
        feature_bound: 5.0,
    }
}

fn pca_spec(config: &ExperimentConfig) -> PcaSpec {
    PcaSpec {
        eps: config.eps,
        slope: 2.0,
        sigma: config.sigma.unwrap_or(0.25),
        nu: config.nu.unwrap_or(1.5),
    }
}

fn covariance_spec(config: &ExperimentConfig) -> CovarianceSpec {
    CovarianceSpec {
        eps: config.eps,
        mean: vec![0.0, 0.0],
        sigma_star: vec![vec![1.0, 0.8], vec![0.8, 1.0]],
        nu: config.nu.unwrap_or(1.5),
    }
}

fn run_trial(kind: ExperimentKind, config: &ExperimentConfig, seed: u64) -> Result<Vec<TrialResult>> {
    let mut rng = SeededRng::new(seed);
    let rrm_config = config.rrm_config()?;
    let (hash, outcomes) = match kind {
        ExperimentKind::Linreg => {
            let spec = linreg_spec(config);
            let generated = gen_linreg(&mut rng, &spec, config.n)?;
            let star = DVector::from_vec(spec.theta_star.clone());
            let outcomes = paired_fits(&LinearRegression, &generated.data, &rrm_config, |p| {
                metric_relative_error(&p.coefficients, &star)
            });
            (generated.data.content_hash(), outcomes)
        }
        ExperimentKind::Logreg => {
            let spec = LogRegSpec::standard(config.eps, config.rho.unwrap_or(0.99));
            let generated = gen_logreg(&mut rng, &spec, config.n)?;
            let star = DVector::from_vec(spec.theta_star.clone());
            let outcomes = paired_fits(
                &LogisticRegression::default(),
                &generated.data,
                &rrm_config,
                |p| metric_angle_deg(&p.coefficients, &star),
            );
            (generated.data.content_hash(), outcomes)
        }
        ExperimentKind::Pca => {
            let spec = pca_spec(config);
            let generated = gen_pca(&mut rng, &spec, config.n)?;
            let star = spec.theta_star();
            let outcomes = paired_fits(&Pca, &generated.data, &rrm_config, |p| {
                metric_misalignment(p.direction(), &star)
            });
            (generated.data.content_hash(), outcomes)
        }
        ExperimentKind::Covariance => {
            let spec = covariance_spec(config);
            let generated = gen_covariance(&mut rng, &spec, config.n)?;
            let star = spec.sigma_star_matrix();
            let outcomes = paired_fits(&Gaussian, &generated.data, &rrm_config, |p| {
                metric_cov_relerr(p.covariance(), &star)
            });
            (generated.data.content_hash(), outcomes)
        }
    };

    Ok(outcomes
        .into_iter()
        .map(|(method, outcome)| {
            let (value, excluded, error) = match outcome.value {
                Ok(v) if v.is_finite() => (v, false, None),
                Ok(v) => (v, true, Some(format!("non-finite metric {v}"))),
                Err(e) => (f64::NAN, true, Some(e.to_string())),
            };
            TrialResult {
                experiment: kind.as_str().to_owned(),
                method,
                metric: kind.metric_name().to_owned(),
                seed,
                value,
                excluded,
                error,
                dataset_hash: hash.clone(),
                trace: outcome.trace,
                converged: outcome.converged,
                config: config.clone(),
            }
        })
        .collect())
}

/// Runs `mc_runs` paired ERM/RRM trials with seeds `base_seed + i`.
///
/// Trials run in parallel; results are collected in trial order, so the
/// output does not depend on scheduling.
pub fn run_experiment(
    kind: ExperimentKind,
    overrides: &ExperimentOverrides,
    mc_runs: usize,
    base_seed: u64,
) -> Result<ExperimentReport> {
    if mc_runs == 0 {
        return Err(RrmError::Config("mc_runs must be at least 1".into()));
    }
    let config = ExperimentConfig::resolve(kind, overrides)?;
    let per_trial: Vec<Vec<TrialResult>> = (0..mc_runs)
        .into_par_iter()
        .map(|i| run_trial(kind, &config, base_seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let trials: Vec<TrialResult> = per_trial.into_iter().flatten().collect();
    for t in trials.iter().filter(|t| t.excluded) {
        log::warn!(
            "{kind} seed {} {}: trial excluded ({})",
            t.seed,
            t.method,
            t.error.as_deref().unwrap_or("unknown")
        );
    }
    let methods = Method::ALL
        .iter()
        .map(|&m| MethodSummary::from_trials(m, &trials))
        .collect();
    Ok(ExperimentReport {
        summary: ExperimentSummary {
            experiment: kind,
            metric: kind.metric_name().to_owned(),
            mc_runs,
            base_seed,
            defaults_version: DEFAULTS_VERSION,
            config,
            methods,
        },
        trials,
    })
}

/// Mean relative error of one method at one corruption level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub method: Method,
    pub mean_relative_error: f64,
    pub count: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub reports: Vec<ExperimentReport>,
}

impl SweepReport {
    pub fn mean_at(&self, eps: f64, method: Method) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.eps == eps && p.method == method)
            .map(|p| p.mean_relative_error)
    }
}

/// Linear-regression experiment repeated over a grid of corruption levels.
/// `nu` defaults to [`SWEEP_NU`]; `eps` in `overrides` is ignored. Every level
/// reuses the same trial seeds.
pub fn run_sweep(
    overrides: &ExperimentOverrides,
    eps_grid: &[f64],
    mc_runs: usize,
    base_seed: u64,
) -> Result<SweepReport> {
    let mut base = overrides.clone();
    base.nu = base.nu.or(Some(SWEEP_NU));
    let mut points = Vec::new();
    let mut reports = Vec::new();
    for &eps in eps_grid {
        let level = ExperimentOverrides {
            eps: Some(eps),
            ..base.clone()
        };
        let report = run_experiment(ExperimentKind::Linreg, &level, mc_runs, base_seed)?;
        for &method in &Method::ALL {
            let s = report.summary.method(method);
            points.push(SweepPoint {
                eps,
                method,
                mean_relative_error: s.mean,
                count: s.count,
                excluded: s.excluded,
            });
        }
        reports.push(report);
    }
    Ok(SweepReport { points, reports })
}
