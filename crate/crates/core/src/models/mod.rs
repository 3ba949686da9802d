//! Loss functions and weighted fitters for the supported model families.
//!
//! Every family pairs a per-sample loss with a fitter that minimizes the
//! weighted empirical risk `sum_i w_i loss(params, z_i)` over its parameter set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RrmError};
use crate::simplex::{weighted_sum, Weights};

mod gaussian;
mod linreg;
mod logreg;
mod pca;

pub use gaussian::{gaussian_loss, Gaussian, GaussianParams};
pub use linreg::{linreg_loss, LinRegParams, LinearRegression};
pub use logreg::{logreg_loss, LogRegParams, LogisticRegression};
pub use pca::{pca_loss, Pca, PcaParams};

/// A loss function paired with its weighted risk minimizer.
pub trait ModelFamily {
    type Data: ?Sized;
    type Params: Clone + std::fmt::Debug;

    fn name(&self) -> &'static str;

    fn num_samples(&self, data: &Self::Data) -> usize;

    /// Number of free parameters, used for the effective sample size warning.
    fn param_dimension(&self, data: &Self::Data) -> usize;

    fn sample_loss(&self, params: &Self::Params, data: &Self::Data, index: usize) -> Result<f64>;

    fn weighted_fit(&self, data: &Self::Data, weights: &Weights) -> Result<Self::Params>;

    fn losses(&self, params: &Self::Params, data: &Self::Data) -> Result<Vec<f64>> {
        (0..self.num_samples(data))
            .map(|i| self.sample_loss(params, data, i))
            .collect()
    }

    fn weighted_risk(&self, params: &Self::Params, data: &Self::Data, weights: &Weights) -> Result<f64> {
        Ok(weighted_sum(&self.losses(params, data)?, weights))
    }
}

/// Feature rows paired with real outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    features: DMatrix<f64>,
    targets: DVector<f64>,
}

impl RegressionData {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(RrmError::Input(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        check_finite(features.iter().chain(targets.iter()))?;
        Ok(RegressionData { features, targets })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        RegressionData::new(matrix_from_rows(rows)?, DVector::from_vec(targets))
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Feature rows paired with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    features: DMatrix<f64>,
    labels: Vec<u8>,
}

impl ClassificationData {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(RrmError::Input(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l > 1) {
            return Err(RrmError::Input(format!("label {i} is {l}; labels must be 0 or 1")));
        }
        check_finite(features.iter())?;
        Ok(ClassificationData { features, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        ClassificationData::new(matrix_from_rows(rows)?, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ClassificationData {
        ClassificationData {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Unlabeled points, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    points: DMatrix<f64>,
}

impl PointData {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        check_finite(points.iter())?;
        Ok(PointData { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        PointData::new(matrix_from_rows(rows)?)
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(RrmError::Input(format!(
            "row {i} has {} columns, expected {d}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn check_finite<'a>(mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.any(|v| !v.is_finite()) {
        return Err(RrmError::Input("data contains non-finite values".into()));
    }
    Ok(())
}

pub(crate) fn check_weights(weights: &Weights, n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(RrmError::Input(format!(
            "{} weights for {n} samples",
            weights.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(RrmError::Input(format!(
            "{what} has dimension {got}, expected {expected}"
        )));
    }
    Ok(())
}

pub(crate) fn serialize_vector<S: serde::Serializer>(
    v: &DVector<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter())
}
