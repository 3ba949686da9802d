use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_dim, check_weights, ModelFamily, RegressionData};
use crate::error::{Result, RrmError};
use crate::simplex::Weights;

/// Relative size of an `R` pivot below which the weighted design counts as singular.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinRegParams {
    #[serde(serialize_with = "super::serialize_vector")]
    pub coefficients: DVector<f64>,
}

impl LinRegParams {
    pub fn new(coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(RrmError::Input("coefficients must be finite".into()));
        }
        Ok(LinRegParams { coefficients })
    }
}

/// Squared prediction error `(y - x^T theta)^2`.
pub fn linreg_loss(params: &LinRegParams, features: &[f64], outcome: f64) -> Result<f64> {
    check_dim(params.coefficients.len(), features.len(), "feature vector")?;
    let prediction: f64 = params
        .coefficients
        .iter()
        .zip(features)
        .map(|(t, x)| t * x)
        .sum();
    Ok((outcome - prediction).powi(2))
}

/// Linear predictor without intercept, fitted by weighted least squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearRegression;

impl ModelFamily for LinearRegression {
    type Data = RegressionData;
    type Params = LinRegParams;

    fn name(&self) -> &'static str {
        "linreg"
    }

    fn num_samples(&self, data: &RegressionData) -> usize {
        data.len()
    }

    fn param_dimension(&self, data: &RegressionData) -> usize {
        data.dim()
    }

    fn sample_loss(&self, params: &LinRegParams, data: &RegressionData, index: usize) -> Result<f64> {
        check_dim(params.coefficients.len(), data.dim(), "coefficient vector")?;
        let prediction = data.features().row(index).transpose().dot(&params.coefficients);
        Ok((data.targets()[index] - prediction).powi(2))
    }

    fn losses(&self, params: &LinRegParams, data: &RegressionData) -> Result<Vec<f64>> {
        check_dim(params.coefficients.len(), data.dim(), "coefficient vector")?;
        let residuals = data.targets() - data.features() * &params.coefficients;
        Ok(residuals.iter().map(|r| r * r).collect())
    }

    /// Solves `min sum_i w_i (y_i - x_i^T theta)^2` through a QR factorization of
    /// the row-scaled design `diag(sqrt(w)) X`.
    fn weighted_fit(&self, data: &RegressionData, weights: &Weights) -> Result<LinRegParams> {
        check_weights(weights, data.len())?;
        let d = data.dim();
        let rank_error = || RrmError::RankDeficient {
            features: d,
            effective_sample_size: weights.effective_sample_size(),
        };
        if d == 0 {
            return Err(RrmError::Input("regression data has no features".into()));
        }
        if data.len() < d {
            return Err(rank_error());
        }
        let scale: Vec<f64> = weights.as_slice().iter().map(|w| w.sqrt()).collect();
        let design = DMatrix::from_fn(data.len(), d, |i, j| scale[i] * data.features()[(i, j)]);
        let rhs = DVector::from_fn(data.len(), |i, _| scale[i] * data.targets()[i]);

        let qr = design.qr();
        let r = qr.r();
        let pivot_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pivot_max == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOLERANCE * pivot_max) {
            return Err(rank_error());
        }
        let projected = qr.q().transpose() * rhs;
        let coefficients = r.solve_upper_triangular(&projected).ok_or_else(rank_error)?;
        LinRegParams::new(coefficients)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn line(points: &[(f64, f64)]) -> RegressionData {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.0]).collect();
        RegressionData::from_rows(&rows, points.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn loss_examples() {
        let ones = LinRegParams::new(dvector![1.0, 1.0]).unwrap();
        assert_eq!(linreg_loss(&ones, &[1.0, 1.0], 2.0).unwrap(), 0.0);
        let zero = LinRegParams::new(dvector![0.0, 0.0]).unwrap();
        assert_eq!(linreg_loss(&zero, &[-4.0, 7.0], 3.0).unwrap(), 9.0);
        let two = LinRegParams::new(dvector![2.0]).unwrap();
        assert_eq!(linreg_loss(&two, &[1.5], 0.0).unwrap(), 9.0);
        assert!(linreg_loss(&two, &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn exact_interpolation() {
        let data = line(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]);
        let fit = LinearRegression.weighted_fit(&data, &Weights::uniform(3)).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_weight_excludes_sample() {
        let data = line(&[(1.0, 2.0), (2.0, 4.0), (3.0, 100.0)]);
        let w = Weights::new(vec![0.5, 0.5, 0.0]).unwrap();
        let fit = LinearRegression.weighted_fit(&data, &w).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_design_is_reported() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let data = RegressionData::from_rows(&rows, vec![1.0, 2.0, 3.0]).unwrap();
        let err = LinearRegression
            .weighted_fit(&data, &Weights::uniform(3))
            .unwrap_err();
        assert!(matches!(err, RrmError::RankDeficient { features: 2, .. }));
        assert!(err.to_string().contains("effective sample size"));

        let single = line(&[(1.0, 1.0), (2.0, 3.0)]);
        let w = Weights::new(vec![0.0, 1.0]).unwrap();
        assert!(LinearRegression.weighted_fit(&single, &w).is_ok());
        let w = Weights::new(vec![1.0, 0.0]).unwrap();
        let fit = LinearRegression.weighted_fit(&single, &w).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn residuals_are_weighted_orthogonal() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 1.0])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() - 0.3 * i as f64).collect();
        let data = RegressionData::from_rows(&rows, y).unwrap();
        let w = Weights::from_masses((1..=12).map(|i| i as f64).collect()).unwrap();
        let fit = LinearRegression.weighted_fit(&data, &w).unwrap();
        let residuals = data.targets() - data.features() * &fit.coefficients;
        for j in 0..3 {
            let s: f64 = (0..12)
                .map(|i| w.as_slice()[i] * data.features()[(i, j)] * residuals[i])
                .sum();
            assert!(s.abs() < 1e-8, "column {j}: {s}");
        }
    }
}
