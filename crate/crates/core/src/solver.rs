//! Blockwise coordinate descent over the parameters and the sample weights.
//!
//! Starting from uniform weights, each outer iteration fits the parameters to
//! the current weights and then recomputes the optimal entropy-constrained
//! weights for the resulting losses. The ERM baseline is the first θ-step.

use serde::Serialize;

use crate::error::{Result, RrmError};
use crate::models::ModelFamily;
use crate::simplex::{solve_inner, weighted_sum, RobustnessBound, Weights};

pub const DEFAULT_MAX_OUTER_ITERATIONS: usize = 500;
pub const DEFAULT_OBJECTIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RrmConfig {
    pub bound: RobustnessBound,
    pub max_outer_iterations: usize,
    pub objective_rel_tolerance: f64,
    pub record_trace: bool,
}

impl RrmConfig {
    pub fn new(eps_tilde: f64) -> Result<Self> {
        Ok(RrmConfig {
            bound: RobustnessBound::new(eps_tilde)?,
            max_outer_iterations: DEFAULT_MAX_OUTER_ITERATIONS,
            objective_rel_tolerance: DEFAULT_OBJECTIVE_TOLERANCE,
            record_trace: true,
        })
    }

    pub fn with_max_outer_iterations(mut self, iterations: usize) -> Self {
        self.max_outer_iterations = iterations;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.objective_rel_tolerance = tolerance;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(RrmError::Config("max_outer_iterations must be at least 1".into()));
        }
        if !(self.objective_rel_tolerance > 0.0 && self.objective_rel_tolerance.is_finite()) {
            return Err(RrmError::Config(format!(
                "objective tolerance must be positive, got {}",
                self.objective_rel_tolerance
            )));
        }
        Ok(())
    }
}

/// Objective and weight entropy after one full outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RrmResult<P> {
    pub params: P,
    pub weights: Weights,
    pub lambda_star: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest per-step increase of a trace's objective, relative to its magnitude.
/// Nonpositive values mean the trace is non-increasing.
pub fn max_relative_increase(trace: &[TraceEntry]) -> f64 {
    trace
        .windows(2)
        .map(|w| (w[1].objective - w[0].objective) / w[0].objective.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Empirical risk minimizer: the weighted fit under uniform weights.
pub fn erm_fit<F: ModelFamily>(family: &F, data: &F::Data) -> Result<F::Params> {
    family.weighted_fit(data, &Weights::uniform(family.num_samples(data)))
}

pub fn rrm_fit<F: ModelFamily>(
    family: &F,
    data: &F::Data,
    config: &RrmConfig,
) -> Result<RrmResult<F::Params>> {
    config.validate()?;
    let n = family.num_samples(data);
    if n < 2 {
        return Err(RrmError::Input(format!("need at least two samples, got {n}")));
    }
    let effective = config.bound.effective_size(n);
    let dim = family.param_dimension(data);
    if effective < dim as f64 {
        log::warn!(
            "{}: effective sample size {effective:.1} is below the parameter dimension {dim}",
            family.name()
        );
    }

    let mut weights = Weights::uniform(n);
    let mut params: Option<F::Params> = None;
    let mut lambda_star = f64::INFINITY;
    let mut previous: Option<f64> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_outer_iterations {
        iterations = k;
        let fitted = family
            .weighted_fit(data, &weights)
            .map_err(|e| e.at_iteration(k))?;
        let mut losses = family.losses(&fitted, data).map_err(|e| e.at_iteration(k))?;
        let mut before = weighted_sum(&losses, &weights);
        let mut theta = fitted;
        // A θ-step that does not lower the risk under the current weights
        // keeps the previous parameters.
        if let Some(old) = &params {
            let old_losses = family.losses(old, data).map_err(|e| e.at_iteration(k))?;
            let old_risk = weighted_sum(&old_losses, &weights);
            if old_risk < before {
                theta = old.clone();
                losses = old_losses;
                before = old_risk;
            }
        }

        let inner = solve_inner(&losses, config.bound).map_err(|e| e.at_iteration(k))?;
        let objective = weighted_sum(&losses, &inner.weights);
        if config.record_trace {
            trace.push(TraceEntry {
                iteration: k,
                objective,
                entropy: inner.achieved_entropy,
            });
        }
        // The cycle's decrease, measured from the previous full iterate, or from
        // the first θ-step when there is none.
        let reference = previous.unwrap_or(before);
        weights = inner.weights;
        lambda_star = inner.lambda_star;
        params = Some(theta);
        previous = Some(objective);

        let decrease = reference - objective;
        if decrease <= config.objective_rel_tolerance * reference.abs() {
            converged = true;
            break;
        }
    }

    Ok(RrmResult {
        params: params.expect("at least one outer iteration ran"),
        weights,
        lambda_star,
        trace,
        iterations,
        converged,
    })
}
