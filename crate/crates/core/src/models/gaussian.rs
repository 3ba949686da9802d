use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Serialize, Serializer};

use super::{check_dim, check_weights, ModelFamily, PointData};
use crate::error::{Result, RrmError};
use crate::simplex::Weights;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Mean and covariance of a Gaussian; the covariance is kept with its Cholesky factor.
#[derive(Clone)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl std::fmt::Debug for GaussianParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianParams")
            .field("mean", &self.mean)
            .field("covariance", &self.covariance)
            .finish()
    }
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl Serialize for GaussianParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<Vec<f64>> = self
            .covariance
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let mut s = serializer.serialize_struct("GaussianParams", 2)?;
        s.serialize_field("mean", self.mean.as_slice())?;
        s.serialize_field("covariance", &rows)?;
        s.end()
    }
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(RrmError::Input(format!(
                "covariance is {}x{}, expected {d}x{d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(RrmError::Input("Gaussian parameters must be finite".into()));
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        if (&covariance - covariance.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
            return Err(RrmError::Input("covariance is not symmetric".into()));
        }
        let factor = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| RrmError::Input("covariance is not positive definite".into()))?;
        let log_det = 2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(RrmError::Input("covariance is numerically singular".into()));
        }
        Ok(GaussianParams {
            mean,
            covariance,
            factor,
            log_det,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn loss_at(&self, z: &DVector<f64>) -> f64 {
        let centered = z - &self.mean;
        let whitened = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&centered)
            .expect("Cholesky factor has a positive diagonal");
        whitened.norm_squared() + self.log_det
    }
}

/// Gaussian negative log-likelihood up to constants,
/// `(z - mu)^T Sigma^{-1} (z - mu) + ln |Sigma|`.
pub fn gaussian_loss(params: &GaussianParams, sample: &[f64]) -> Result<f64> {
    check_dim(params.mean.len(), sample.len(), "sample")?;
    Ok(params.loss_at(&DVector::from_column_slice(sample)))
}

/// Mean and covariance estimation; the weighted fit is the weighted sample
/// mean and the (normalized, uncorrected) weighted sample covariance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl Gaussian {
    pub fn weighted_moments(data: &PointData, weights: &Weights) -> (DVector<f64>, DMatrix<f64>) {
        let d = data.dim();
        let mut mean = DVector::zeros(d);
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w > 0.0 {
                mean.axpy(w, &data.points().row(i).transpose(), 1.0);
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w > 0.0 {
                let c = data.points().row(i).transpose() - &mean;
                cov.ger(w, &c, &c, 1.0);
            }
        }
        // Symmetrize exactly; the rank-one updates already are, up to rounding.
        let cov = (&cov + cov.transpose()) * 0.5;
        (mean, cov)
    }
}

impl ModelFamily for Gaussian {
    type Data = PointData;
    type Params = GaussianParams;

    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn num_samples(&self, data: &PointData) -> usize {
        data.len()
    }

    fn param_dimension(&self, data: &PointData) -> usize {
        let d = data.dim();
        d + d * (d + 1) / 2
    }

    fn sample_loss(&self, params: &GaussianParams, data: &PointData, index: usize) -> Result<f64> {
        check_dim(params.mean.len(), data.dim(), "mean")?;
        Ok(params.loss_at(&data.points().row(index).transpose()))
    }

    fn weighted_fit(&self, data: &PointData, weights: &Weights) -> Result<GaussianParams> {
        check_weights(weights, data.len())?;
        let (mean, cov) = Gaussian::weighted_moments(data, weights);
        GaussianParams::new(mean, cov).map_err(|_| {
            RrmError::Degenerate(format!(
                "weighted covariance is singular (effective sample size {:.3})",
                weights.effective_sample_size()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn loss_examples() {
        let std = GaussianParams::new(dvector![0.5, -1.0], DMatrix::identity(2, 2)).unwrap();
        assert_eq!(gaussian_loss(&std, &[0.5, -1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_loss(&std, &[1.5, -1.0]).unwrap(), 1.0, epsilon = 1e-15);
        let wide = GaussianParams::new(dvector![0.0, 0.0], dmatrix![2.0, 0.0; 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            gaussian_loss(&wide, &[1.0, 1.0]).unwrap(),
            2.386_294_361_119_890_6,
            epsilon = 1e-14
        );
    }

    #[test]
    fn rejects_non_pd_covariance() {
        assert!(GaussianParams::new(dvector![0.0, 0.0], dmatrix![1.0, 2.0; 2.0, 1.0]).is_err());
        assert!(GaussianParams::new(dvector![0.0, 0.0], dmatrix![1.0, 0.5; 0.4, 1.0]).is_err());
        assert!(GaussianParams::new(dvector![0.0], dmatrix![1.0, 0.0; 0.0, 1.0]).is_err());
    }

    #[test]
    fn uniform_weights_give_sample_moments() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0], vec![-2.0, 1.0]];
        let data = PointData::from_rows(&rows).unwrap();
        let fit = Gaussian.weighted_fit(&data, &Weights::uniform(4)).unwrap();
        assert_abs_diff_eq!(fit.mean()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.mean()[1], 1.0, epsilon = 1e-15);
        // Biased covariance: var(x) = (1 + 1 + 9 + 9) / 4, var(y) = (0 + 4 + 4 + 0) / 4.
        assert_abs_diff_eq!(fit.covariance()[(0, 0)], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.covariance()[(1, 1)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.covariance()[(0, 1)], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_is_degenerate() {
        let data = PointData::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0], vec![0.0, 1.0]]).unwrap();
        let w = Weights::new(vec![0.0, 1.0, 0.0]).unwrap();
        let err = Gaussian.weighted_fit(&data, &w).unwrap_err();
        assert!(matches!(err, RrmError::Degenerate(_)));
    }
}
