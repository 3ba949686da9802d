use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_dim, check_weights, ModelFamily, PointData};
use crate::error::{Result, RrmError};
use crate::simplex::Weights;

const RESIDUAL_TOLERANCE: f64 = 1e-10;
const MAX_POWER_ITERATIONS: usize = 10_000;

/// Unit direction spanning a one-dimensional subspace, sign-canonicalized so
/// that its first nonzero component is positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaParams {
    #[serde(serialize_with = "super::serialize_vector")]
    direction: DVector<f64>,
}

impl PcaParams {
    /// Normalizes and canonicalizes `direction`.
    pub fn new(direction: DVector<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(RrmError::Input("direction must be finite and nonzero".into()));
        }
        let mut unit = direction / norm;
        if let Some(first) = unit.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                unit.neg_mut();
            }
        }
        Ok(PcaParams { direction: unit })
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }
}

/// Squared distance from `z` to the line spanned by the direction, `|z|^2 - (theta^T z)^2`.
pub fn pca_loss(params: &PcaParams, sample: &[f64]) -> Result<f64> {
    check_dim(params.direction.len(), sample.len(), "sample")?;
    let z = DVector::from_column_slice(sample);
    Ok(projection_residual(&params.direction, &z))
}

fn projection_residual(theta: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let along = theta.dot(z);
    (z.norm_squared() - along * along).max(0.0)
}

/// Outcome of a power iteration run.
struct Eigenpair {
    vector: DVector<f64>,
    value: f64,
    converged: bool,
}

fn power_iteration(matrix: &DMatrix<f64>, start: DVector<f64>) -> Eigenpair {
    let scale = matrix.norm().max(1.0);
    let mut v = start.normalize();
    let mut value = v.dot(&(matrix * &v));
    for _ in 0..MAX_POWER_ITERATIONS {
        let mv = matrix * &v;
        value = v.dot(&mv);
        let residual = (&mv - &v * value).norm();
        if residual <= RESIDUAL_TOLERANCE * scale {
            return Eigenpair {
                vector: v,
                value,
                converged: true,
            };
        }
        let norm = mv.norm();
        if norm == 0.0 {
            break;
        }
        v = mv / norm;
    }
    Eigenpair {
        vector: v,
        value,
        converged: false,
    }
}

/// Dominant eigenvector of a symmetric positive semidefinite matrix.
///
/// Power iteration starts from the normalized all-ones vector. Because that
/// start can be orthogonal to the dominant eigenvector, the result is checked
/// against the deflated matrix and the iteration restarted from any larger
/// eigendirection found there.
pub(crate) fn dominant_eigenvector(matrix: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = matrix.nrows();
    let scale = matrix.norm();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(RrmError::Degenerate("weighted second-moment matrix is zero".into()));
    }
    let mut best = power_iteration(matrix, DVector::from_element(d, 1.0));
    for _ in 0..d {
        if d < 2 {
            break;
        }
        let deflated = matrix - &best.vector * best.vector.transpose() * best.value;
        let mut start = DVector::from_fn(d, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        start -= &best.vector * best.vector.dot(&start);
        if start.norm() <= 1e-12 {
            start = DVector::from_fn(d, |i, _| (i + 1) as f64);
            start -= &best.vector * best.vector.dot(&start);
        }
        let other = power_iteration(&deflated, start);
        let gap = other.value - best.value;
        if gap.abs() <= RESIDUAL_TOLERANCE * scale {
            log::warn!(
                "top eigenvalues tie within tolerance ({} vs {}); direction chosen by canonicalization",
                best.value,
                other.value
            );
            break;
        }
        if gap < 0.0 {
            break;
        }
        best = power_iteration(matrix, other.vector);
    }
    if !best.converged {
        log::warn!("power iteration reached {MAX_POWER_ITERATIONS} iterations without meeting the residual tolerance");
    }
    Ok(best.vector)
}

/// One-dimensional PCA through the origin. The fit maximizes the Rayleigh
/// quotient of the weighted second-moment matrix `R = sum_i w_i z_i z_i^T`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pca;

impl Pca {
    pub fn weighted_second_moment(data: &PointData, weights: &Weights) -> DMatrix<f64> {
        let d = data.dim();
        let mut r = DMatrix::zeros(d, d);
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let z = data.points().row(i).transpose();
            r.ger(w, &z, &z, 1.0);
        }
        r
    }
}

impl ModelFamily for Pca {
    type Data = PointData;
    type Params = PcaParams;

    fn name(&self) -> &'static str {
        "pca"
    }

    fn num_samples(&self, data: &PointData) -> usize {
        data.len()
    }

    /// A unit direction in `d` dimensions has `d - 1` degrees of freedom.
    fn param_dimension(&self, data: &PointData) -> usize {
        data.dim().saturating_sub(1).max(1)
    }

    fn sample_loss(&self, params: &PcaParams, data: &PointData, index: usize) -> Result<f64> {
        check_dim(params.direction.len(), data.dim(), "direction")?;
        Ok(projection_residual(
            &params.direction,
            &data.points().row(index).transpose(),
        ))
    }

    fn weighted_fit(&self, data: &PointData, weights: &Weights) -> Result<PcaParams> {
        check_weights(weights, data.len())?;
        let r = Pca::weighted_second_moment(data, weights);
        PcaParams::new(dominant_eigenvector(&r)?)
    }
}
