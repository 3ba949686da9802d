use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RrmError};

const UNIT_TOLERANCE: f64 = 1e-8;

fn check_same_len(a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(RrmError::Input(format!(
            "vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `|theta_star - theta_hat| / |theta_star|`.
pub fn metric_relative_error(theta_hat: &DVector<f64>, theta_star: &DVector<f64>) -> Result<f64> {
    check_same_len(theta_hat, theta_star)?;
    let scale = theta_star.norm();
    if scale == 0.0 {
        return Err(RrmError::Input("reference vector is zero".into()));
    }
    Ok((theta_star - theta_hat).norm() / scale)
}

/// Angle between two vectors in degrees, in `[0, 180]`.
pub fn metric_angle_deg(theta_hat: &DVector<f64>, theta_star: &DVector<f64>) -> Result<f64> {
    check_same_len(theta_hat, theta_star)?;
    let denom = theta_hat.norm() * theta_star.norm();
    if denom == 0.0 {
        return Err(RrmError::Input("angle is undefined for a zero vector".into()));
    }
    let cosine = (theta_hat.dot(theta_star) / denom).clamp(-1.0, 1.0);
    Ok(cosine.acos().to_degrees())
}

/// Subspace misalignment `1 - |theta_hat^T theta_star|` of two unit vectors.
pub fn metric_misalignment(theta_hat: &DVector<f64>, theta_star: &DVector<f64>) -> Result<f64> {
    check_same_len(theta_hat, theta_star)?;
    for v in [theta_hat, theta_star] {
        if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(RrmError::Input(format!(
                "misalignment needs unit vectors, got norm {}",
                v.norm()
            )));
        }
    }
    Ok((1.0 - theta_hat.dot(theta_star).abs()).clamp(0.0, 1.0))
}

/// `|sigma_star - sigma_hat|_F / |sigma_star|_F`.
pub fn metric_cov_relerr(sigma_hat: &DMatrix<f64>, sigma_star: &DMatrix<f64>) -> Result<f64> {
    if sigma_hat.shape() != sigma_star.shape() {
        return Err(RrmError::Input("covariance shapes differ".into()));
    }
    let scale = sigma_star.norm();
    if scale == 0.0 {
        return Err(RrmError::Input("reference covariance is zero".into()));
    }
    Ok((sigma_star - sigma_hat).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn relative_error_examples() {
        let star = DVector::from_element(10, 1.0);
        assert_eq!(metric_relative_error(&star, &star).unwrap(), 0.0);
        assert_eq!(metric_relative_error(&DVector::zeros(10), &star).unwrap(), 1.0);
        let mut hat = star.clone();
        hat[0] += 0.1;
        assert_abs_diff_eq!(
            metric_relative_error(&hat, &star).unwrap(),
            0.031_622_776_601_683_79,
            epsilon = 1e-15
        );
        assert!(metric_relative_error(&star, &DVector::zeros(10)).is_err());
    }

    #[test]
    fn angle_examples() {
        let a = dvector![1.0, 0.0, 0.0];
        assert_abs_diff_eq!(metric_angle_deg(&(a.clone() * 3.0), &a).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(metric_angle_deg(&dvector![0.0, 2.0, 0.0], &a).unwrap(), 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(metric_angle_deg(&dvector![1.0, 1.0, 0.0], &a).unwrap(), 45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(metric_angle_deg(&(-a.clone()), &a).unwrap(), 180.0, epsilon = 1e-12);
        assert!(metric_angle_deg(&DVector::zeros(3), &a).is_err());
    }

    #[test]
    fn misalignment_examples() {
        let a = dvector![1.0, 0.0];
        assert_eq!(metric_misalignment(&a, &a).unwrap(), 0.0);
        assert_eq!(metric_misalignment(&(-a.clone()), &a).unwrap(), 0.0);
        assert_eq!(metric_misalignment(&dvector![0.0, 1.0], &a).unwrap(), 1.0);
        let sixty = dvector![0.5, 3f64.sqrt() / 2.0];
        assert_abs_diff_eq!(metric_misalignment(&sixty, &a).unwrap(), 0.5, epsilon = 1e-15);
        assert!(metric_misalignment(&dvector![2.0, 0.0], &a).is_err());
    }

    #[test]
    fn covariance_error_examples() {
        let star = dmatrix![1.0, 0.8; 0.8, 1.0];
        assert_eq!(metric_cov_relerr(&star, &star).unwrap(), 0.0);
        assert_abs_diff_eq!(metric_cov_relerr(&(&star * 2.0), &star).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            metric_cov_relerr(&DMatrix::identity(2, 2), &star).unwrap(),
            0.624_695_047_554_424_2,
            epsilon = 1e-15
        );
    }
}
