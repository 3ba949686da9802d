use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_dim, check_weights, ClassificationData, ModelFamily};
use crate::error::{Result, RrmError};
use crate::simplex::Weights;

/// Intercept-first coefficients for the augmented features `[1, x]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRegParams {
    #[serde(serialize_with = "super::serialize_vector")]
    pub coefficients: DVector<f64>,
}

impl LogRegParams {
    pub fn new(coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(RrmError::Input("coefficients must be finite and non-empty".into()));
        }
        Ok(LogRegParams { coefficients })
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Linear score `[1, x]^T theta`.
    pub fn score(&self, features: &[f64]) -> f64 {
        self.intercept()
            + self
                .coefficients
                .iter()
                .skip(1)
                .zip(features)
                .map(|(t, x)| t * x)
                .sum::<f64>()
    }

    pub fn probability(&self, features: &[f64]) -> f64 {
        sigmoid(self.score(features))
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Cross-entropy of a label under the logistic score `t`.
fn cross_entropy(score: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-score)
    } else {
        softplus(score)
    }
}

/// Cross-entropy loss `-y ln s - (1 - y) ln(1 - s)` with `s = sigmoid([1, x]^T theta)`.
pub fn logreg_loss(params: &LogRegParams, features: &[f64], label: u8) -> Result<f64> {
    if label > 1 {
        return Err(RrmError::Input(format!("label must be 0 or 1, got {label}")));
    }
    check_dim(params.coefficients.len(), features.len() + 1, "augmented feature vector")?;
    Ok(cross_entropy(params.score(features), label))
}

/// Logistic regression fitted by damped Newton steps (IRLS) on the weighted
/// cross-entropy plus a small ridge term `ridge / 2 * |theta|^2`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticRegression {
    pub ridge: f64,
    pub max_iterations: usize,
    /// Required Euclidean norm of the objective gradient at the returned fit.
    pub gradient_tolerance: f64,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression {
            ridge: 1e-8,
            max_iterations: 100,
            gradient_tolerance: 1e-6,
        }
    }
}

struct Design {
    /// `n x (d + 1)` matrix of augmented features.
    augmented: DMatrix<f64>,
    labels: Vec<f64>,
}

impl Design {
    fn new(data: &ClassificationData) -> Self {
        let n = data.len();
        let d = data.dim();
        let augmented = DMatrix::from_fn(n, d + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                data.features()[(i, j - 1)]
            }
        });
        Design {
            augmented,
            labels: data.labels().iter().map(|&l| f64::from(l)).collect(),
        }
    }
}

impl LogisticRegression {
    fn objective(&self, design: &Design, weights: &[f64], theta: &DVector<f64>) -> f64 {
        let scores = &design.augmented * theta;
        let data_term: f64 = scores
            .iter()
            .zip(&design.labels)
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|((s, y), w)| w * cross_entropy(*s, *y as u8))
            .sum();
        data_term + 0.5 * self.ridge * theta.norm_squared()
    }

    /// Gradient and Hessian of the penalized weighted cross-entropy.
    fn derivatives(
        &self,
        design: &Design,
        weights: &[f64],
        theta: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let p = theta.len();
        let scores = &design.augmented * theta;
        let mut gradient = theta * self.ridge;
        let mut hessian = DMatrix::identity(p, p) * self.ridge;
        for (i, (&w, &y)) in weights.iter().zip(&design.labels).enumerate() {
            if w == 0.0 {
                continue;
            }
            let prob = sigmoid(scores[i]);
            let row = design.augmented.row(i).transpose();
            gradient.axpy(w * (prob - y), &row, 1.0);
            hessian.ger(w * prob * (1.0 - prob), &row, &row, 1.0);
        }
        (gradient, hessian)
    }
}

impl ModelFamily for LogisticRegression {
    type Data = ClassificationData;
    type Params = LogRegParams;

    fn name(&self) -> &'static str {
        "logreg"
    }

    fn num_samples(&self, data: &ClassificationData) -> usize {
        data.len()
    }

    fn param_dimension(&self, data: &ClassificationData) -> usize {
        data.dim() + 1
    }

    fn sample_loss(&self, params: &LogRegParams, data: &ClassificationData, index: usize) -> Result<f64> {
        let row: Vec<f64> = data.features().row(index).iter().copied().collect();
        logreg_loss(params, &row, data.labels()[index])
    }

    fn losses(&self, params: &LogRegParams, data: &ClassificationData) -> Result<Vec<f64>> {
        check_dim(params.coefficients.len(), data.dim() + 1, "coefficient vector")?;
        let design = Design::new(data);
        let scores = &design.augmented * &params.coefficients;
        Ok(scores
            .iter()
            .zip(data.labels())
            .map(|(s, &y)| cross_entropy(*s, y))
            .collect())
    }

    fn weighted_fit(&self, data: &ClassificationData, weights: &Weights) -> Result<LogRegParams> {
        check_weights(weights, data.len())?;
        let w = weights.as_slice();
        let mut class_mass = [0.0f64; 2];
        for (&label, &wi) in data.labels().iter().zip(w) {
            class_mass[label as usize] += wi;
        }
        if class_mass[0] == 0.0 || class_mass[1] == 0.0 {
            return Err(RrmError::Degenerate(
                "weighted data contains a single class".into(),
            ));
        }

        let design = Design::new(data);
        let mut theta = DVector::zeros(data.dim() + 1);
        let mut objective = self.objective(&design, w, &theta);
        let mut grad_norm = f64::INFINITY;
        // Iterate past the acceptance tolerance; Newton steps are cheap near the optimum.
        let target = self.gradient_tolerance * 1e-4;
        for _ in 0..self.max_iterations {
            let (gradient, hessian) = self.derivatives(&design, w, &theta);
            grad_norm = gradient.norm();
            if grad_norm <= target {
                break;
            }
            let step = hessian
                .cholesky()
                .ok_or_else(|| RrmError::Numerical("IRLS Hessian is not positive definite".into()))?
                .solve(&gradient);
            let slope = gradient.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let candidate = &theta - &step * t;
                let value = self.objective(&design, w, &candidate);
                if value <= objective - 1e-4 * t * slope {
                    theta = candidate;
                    objective = value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (gradient, _) = self.derivatives(&design, w, &theta);
        grad_norm = grad_norm.min(gradient.norm());
        if grad_norm > self.gradient_tolerance {
            return Err(RrmError::Numerical(format!(
                "IRLS did not converge within {} iterations (gradient norm {grad_norm:e})",
                self.max_iterations
            )));
        }
        LogRegParams::new(theta)
    }
}
