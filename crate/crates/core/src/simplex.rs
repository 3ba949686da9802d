//! Entropy-constrained weights on the probability simplex.
//!
//! For fixed per-sample losses `l`, the weight step solves
//!
//! ```text
//! minimize   sum_i w_i l_i
//! subject to w >= 0, sum_i w_i = 1, H(w) >= ln((1 - eps_tilde) n)
//! ```
//!
//! The minimizer has the Gibbs form `w_i = c exp(-l_i / lambda)` where `lambda`
//! is the multiplier of the entropy constraint. When the constraint is active,
//! `lambda` is the unique root of `H(w(lambda)) = ln((1 - eps_tilde) n)`; the
//! entropy of the Gibbs weights is nondecreasing in `lambda`, so the root is
//! found by bracketed bisection.

use serde::Serialize;

use crate::error::{Result, RrmError};

/// Tolerance on `|sum - 1|` accepted by [`Weights::new`] before renormalizing.
const SUM_TOLERANCE: f64 = 1e-9;
/// Relative tolerance used to decide which losses tie at the minimum.
const TIE_TOLERANCE: f64 = 1e-12;
/// Entropy accuracy required of the multiplier root.
const ENTROPY_TOLERANCE: f64 = 1e-10;
const MAX_BRACKET_EXPANSIONS: usize = 200;
const MAX_BISECTIONS: usize = 400;

/// A probability vector over the training samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn uniform(n: usize) -> Self {
        Weights(vec![1.0 / n as f64; n])
    }

    /// Validates a probability vector. Entries must be finite and nonnegative
    /// and sum to one within `1e-9`; the stored vector is renormalized exactly.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RrmError::Input("weights must be non-empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(RrmError::Input(format!(
                "weight {i} is {v}; weights must be finite and nonnegative"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(RrmError::Input(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Weights(values.into_iter().map(|v| v / sum).collect()))
    }

    /// Normalizes nonnegative masses into a probability vector.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let sum: f64 = masses.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(RrmError::Input(
                "masses must be finite, nonnegative and not all zero".into(),
            ));
        }
        Ok(Weights(masses.into_iter().map(|m| m / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// `exp(H(w))`, the number of equally weighted samples with the same entropy.
    pub fn effective_sample_size(&self) -> f64 {
        self.entropy().exp()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Upper bound on the corrupted fraction of the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RobustnessBound(f64);

impl RobustnessBound {
    pub fn new(eps_tilde: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps_tilde) {
            return Err(RrmError::Config(format!(
                "corruption bound must lie in [0, 1), got {eps_tilde}"
            )));
        }
        Ok(RobustnessBound(eps_tilde))
    }

    pub fn eps_tilde(self) -> f64 {
        self.0
    }

    /// Minimum effective sample size `(1 - eps_tilde) n`.
    pub fn effective_size(self, n: usize) -> f64 {
        (1.0 - self.0) * n as f64
    }

    /// The entropy floor `ln((1 - eps_tilde) n)`; errors when `(1 - eps_tilde) n < 1`.
    pub fn target_entropy(self, n: usize) -> Result<f64> {
        let size = self.effective_size(n);
        if size < 1.0 {
            return Err(RrmError::Config(format!(
                "(1 - eps_tilde) * n = {size} is below one sample (eps_tilde = {}, n = {n})",
                self.0
            )));
        }
        Ok(size.ln())
    }
}

/// Optimal weights for a fixed loss vector together with the dual quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerSolution {
    pub weights: Weights,
    /// Multiplier of the entropy constraint. Zero when the constraint is
    /// inactive (ties at the minimum loss), infinite for `eps_tilde = 0`.
    pub lambda_star: f64,
    /// `ln c` with `w_i = c exp(-l_i / lambda_star)`; `-ln(support size)` in the
    /// two limiting cases where the weights are uniform on their support.
    pub log_normalizer: f64,
    pub achieved_entropy: f64,
    pub target_entropy: f64,
}

/// Shannon entropy with the convention `0 ln 0 = 0`.
pub fn entropy(w: &Weights) -> f64 {
    -w.0
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Gibbs weights evaluated at one temperature, after shifting by the minimum loss.
struct Gibbs {
    weights: Vec<f64>,
    entropy: f64,
    /// ln of the normalizer of the shifted weights `sum_i exp(-(l_i - min) / lambda)`.
    log_partition: f64,
}

fn gibbs(losses: &[f64], min_loss: f64, lambda: f64) -> Gibbs {
    let scaled: Vec<f64> = losses.iter().map(|l| (l - min_loss) / lambda).collect();
    let masses: Vec<f64> = scaled.iter().map(|a| (-a).exp()).collect();
    let partition: f64 = masses.iter().sum();
    let log_partition = partition.ln();
    let weights: Vec<f64> = masses.iter().map(|m| m / partition).collect();
    // -sum w ln w = ln Z + sum w a, since ln w_i = -a_i - ln Z.
    let mean_scaled: f64 = weights
        .iter()
        .zip(&scaled)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, a)| w * a)
        .sum();
    Gibbs {
        weights,
        entropy: log_partition + mean_scaled,
        log_partition,
    }
}

fn check_losses(losses: &[f64]) -> Result<(f64, f64)> {
    if losses.is_empty() {
        return Err(RrmError::Input("loss vector is empty".into()));
    }
    if let Some((i, l)) = losses.iter().enumerate().find(|(_, l)| !l.is_finite()) {
        return Err(RrmError::Input(format!("loss {i} is not finite ({l})")));
    }
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Weights proportional to `exp(-l_i / lambda)`.
pub fn weights_at_lambda(losses: &[f64], lambda: f64) -> Result<Weights> {
    if !(lambda > 0.0) {
        return Err(RrmError::Input(format!("lambda must be positive, got {lambda}")));
    }
    let (min, _) = check_losses(losses)?;
    Ok(Weights(gibbs(losses, min, lambda).weights))
}

/// Exact minimizer of the weighted risk over the entropy-constrained simplex.
pub fn solve_inner(losses: &[f64], bound: RobustnessBound) -> Result<InnerSolution> {
    let n = losses.len();
    if n < 2 {
        return Err(RrmError::Input(format!("need at least two samples, got {n}")));
    }
    let target = bound.target_entropy(n)?;
    let (min, max) = check_losses(losses)?;

    if bound.eps_tilde() == 0.0 {
        return Ok(InnerSolution {
            weights: Weights::uniform(n),
            lambda_star: f64::INFINITY,
            log_normalizer: -(n as f64).ln(),
            achieved_entropy: (n as f64).ln(),
            target_entropy: target,
        });
    }

    let spread = max - min;
    let tie_width = TIE_TOLERANCE * min.abs().max(spread);
    let tied: Vec<bool> = losses.iter().map(|l| l - min <= tie_width).collect();
    let ties = tied.iter().filter(|&&t| t).count();
    if (ties as f64).ln() >= target {
        let w = 1.0 / ties as f64;
        let weights = tied.iter().map(|&t| if t { w } else { 0.0 }).collect();
        return Ok(InnerSolution {
            weights: Weights(weights),
            lambda_star: 0.0,
            log_normalizer: -(ties as f64).ln(),
            achieved_entropy: (ties as f64).ln(),
            target_entropy: target,
        });
    }

    let lambda = entropy_root(losses, min, spread, target)?;
    let g = gibbs(losses, min, lambda);
    Ok(InnerSolution {
        achieved_entropy: g.entropy,
        weights: Weights(g.weights),
        lambda_star: lambda,
        log_normalizer: min / lambda - g.log_partition,
        target_entropy: target,
    })
}

/// Smallest representable `lambda` whose Gibbs entropy reaches `target`.
/// The returned end of the final bracket is always on the feasible side.
fn entropy_root(losses: &[f64], min: f64, spread: f64, target: f64) -> Result<f64> {
    let entropy_at = |lambda: f64| gibbs(losses, min, lambda).entropy;
    let scale = spread.max(1.0);
    let mut lo = 1e-12 * scale;
    let mut hi = 1e4 * scale;

    let mut expansions = 0;
    while entropy_at(lo) >= target {
        lo *= 0.5;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || lo == 0.0 {
            return Err(bracket_failure("lower", lo, hi, entropy_at(lo), target));
        }
    }
    expansions = 0;
    while entropy_at(hi) < target {
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !hi.is_finite() {
            return Err(bracket_failure("upper", lo, hi, entropy_at(hi), target));
        }
    }

    // Bisect in log-space until the bracket collapses to adjacent floats.
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if entropy_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 <= 4.0 * f64::EPSILON {
            break;
        }
    }

    let achieved = entropy_at(hi);
    if (achieved - target).abs() > ENTROPY_TOLERANCE {
        return Err(RrmError::Numerical(format!(
            "entropy root not resolved: lambda in [{lo:e}, {hi:e}], entropy {achieved} vs target {target}"
        )));
    }
    Ok(hi)
}

fn bracket_failure(side: &str, lo: f64, hi: f64, entropy: f64, target: f64) -> RrmError {
    RrmError::Numerical(format!(
        "failed to bracket the entropy multiplier ({side} end): bracket [{lo:e}, {hi:e}], entropy {entropy}, target {target}"
    ))
}

/// Weighted risk `sum_i w_i l_i` at the optimal weights.
pub fn concentrated_objective(losses: &[f64], sol: &InnerSolution) -> f64 {
    weighted_sum(losses, &sol.weights)
}

pub(crate) fn weighted_sum(losses: &[f64], weights: &Weights) -> f64 {
    losses
        .iter()
        .zip(weights.as_slice())
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, w)| l * w)
        .sum()
}
