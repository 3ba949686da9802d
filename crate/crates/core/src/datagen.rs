//! Seeded generators for contaminated training data.
//!
//! Every generator draws each sample from the clean component with
//! probability `1 - eps` and from the corrupting component otherwise, and
//! returns the ground-truth corruption mask alongside the data.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrmError};
use crate::models::{ClassificationData, PointData, RegressionData};

/// Deterministic random stream: ChaCha with 8 rounds, seeded from a `u64`.
/// The ChaCha stream is specified independently of platform and word size.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// A generated dataset and which of its samples were corrupted.
#[derive(Debug, Clone)]
pub struct Generated<D> {
    pub data: D,
    pub corrupted: Vec<bool>,
}

impl<D> Generated<D> {
    pub fn corrupted_fraction(&self) -> f64 {
        if self.corrupted.is_empty() {
            return 0.0;
        }
        self.corrupted.iter().filter(|&&c| c).count() as f64 / self.corrupted.len() as f64
    }
}

fn check_eps(eps: f64) -> Result<()> {
    // eps = 1 is permitted for generation: every sample comes from the corrupting component.
    if !(0.0..=1.0).contains(&eps) {
        return Err(RrmError::Input(format!("corruption fraction must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(RrmError::Input(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

fn cholesky_factor(scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !scale.is_square() {
        return Err(RrmError::Input("scale matrix must be square".into()));
    }
    scale
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| RrmError::Input("scale matrix is not positive definite".into()))
}

fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Draws `count` samples from the multivariate t distribution
/// `location + L g sqrt(nu / chi2_nu)` with `L L^T = scale` and `g ~ N(0, I)`.
pub fn sample_student_t<R: Rng + ?Sized>(
    rng: &mut R,
    location: &DVector<f64>,
    scale: &DMatrix<f64>,
    nu: f64,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    check_positive(nu, "degrees of freedom")?;
    if scale.nrows() != location.len() {
        return Err(RrmError::Input("scale and location dimensions differ".into()));
    }
    let factor = cholesky_factor(scale)?;
    let chi2 = ChiSquared::new(nu).map_err(|e| RrmError::Input(e.to_string()))?;
    Ok((0..count)
        .map(|_| student_t_draw(rng, location, &factor, &chi2, nu))
        .collect())
}

fn student_t_draw<R: Rng + ?Sized>(
    rng: &mut R,
    location: &DVector<f64>,
    factor: &DMatrix<f64>,
    chi2: &ChiSquared<f64>,
    nu: f64,
) -> DVector<f64> {
    let g = standard_normal_vector(rng, location.len());
    let mix = (nu / chi2.sample(rng)).sqrt();
    location + factor * g * mix
}

/// Linear regression with Gaussian noise, corrupted by t-distributed noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRegSpec {
    pub eps: f64,
    pub theta_star: Vec<f64>,
    pub sigma: f64,
    pub nu: f64,
    /// Features are uniform on `[-feature_bound, feature_bound]^d`.
    pub feature_bound: f64,
}

impl LinRegSpec {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_positive(self.sigma, "sigma")?;
        check_positive(self.nu, "nu")?;
        check_positive(self.feature_bound, "feature bound")?;
        if self.theta_star.is_empty() {
            return Err(RrmError::Input("theta_star must be non-empty".into()));
        }
        Ok(())
    }
}

/// Logistic data: separable clean classes plus a Gaussian blob with a forced label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegSpec {
    pub eps: f64,
    /// Intercept-first separating hyperplane.
    pub theta_star: Vec<f64>,
    pub clean_mean: Vec<f64>,
    pub clean_covariance: Vec<Vec<f64>>,
    pub corrupt_mean: Vec<f64>,
    pub corrupt_covariance: Vec<Vec<f64>>,
    pub corrupt_label: u8,
}

impl LogRegSpec {
    /// Clean features `N((0.5, 0.5), 0.25 [[1, -rho], [-rho, 1]])`, corrupting
    /// blob `N((0.5, 1.25), 0.01 I)` labeled 0, hyperplane `[-1, 1, 1]`.
    pub fn standard(eps: f64, rho: f64) -> Self {
        LogRegSpec {
            eps,
            theta_star: vec![-1.0, 1.0, 1.0],
            clean_mean: vec![0.5, 0.5],
            clean_covariance: vec![vec![0.25, -0.25 * rho], vec![-0.25 * rho, 0.25]],
            corrupt_mean: vec![0.5, 1.25],
            corrupt_covariance: vec![vec![0.01, 0.0], vec![0.0, 0.01]],
            corrupt_label: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        let d = self.clean_mean.len();
        if self.theta_star.len() != d + 1 || self.corrupt_mean.len() != d {
            return Err(RrmError::Input("logistic spec dimensions are inconsistent".into()));
        }
        if self.corrupt_label > 1 {
            return Err(RrmError::Input("corrupt label must be 0 or 1".into()));
        }
        cholesky_factor(&rows_to_matrix(&self.clean_covariance, d)?)?;
        cholesky_factor(&rows_to_matrix(&self.corrupt_covariance, d)?)?;
        Ok(())
    }
}

/// Points near the line `z2 = slope * z1`, corrupted by isotropic t noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSpec {
    pub eps: f64,
    pub slope: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl PcaSpec {
    /// Unit direction of the clean subspace, `(1, slope) / |(1, slope)|`.
    pub fn theta_star(&self) -> DVector<f64> {
        DVector::from_vec(vec![1.0, self.slope]).normalize()
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_positive(self.sigma, "sigma")?;
        check_positive(self.nu, "nu")?;
        if !self.slope.is_finite() {
            return Err(RrmError::Input("slope must be finite".into()));
        }
        Ok(())
    }
}

/// Gaussian samples corrupted by t samples with the same location and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub eps: f64,
    pub mean: Vec<f64>,
    pub sigma_star: Vec<Vec<f64>>,
    pub nu: f64,
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_positive(self.nu, "nu")?;
        cholesky_factor(&rows_to_matrix(&self.sigma_star, self.mean.len())?)?;
        Ok(())
    }

    pub fn sigma_star_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.sigma_star, self.mean.len()).expect("validated spec")
    }
}

/// The contaminated mixture used by one experiment family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ContaminationSpec {
    Linreg(LinRegSpec),
    Logreg(LogRegSpec),
    Pca(PcaSpec),
    Covariance(CovarianceSpec),
}

impl ContaminationSpec {
    pub fn eps(&self) -> f64 {
        match self {
            ContaminationSpec::Linreg(s) => s.eps,
            ContaminationSpec::Logreg(s) => s.eps,
            ContaminationSpec::Pca(s) => s.eps,
            ContaminationSpec::Covariance(s) => s.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContaminationSpec::Linreg(s) => s.validate(),
            ContaminationSpec::Logreg(s) => s.validate(),
            ContaminationSpec::Pca(s) => s.validate(),
            ContaminationSpec::Covariance(s) => s.validate(),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(RrmError::Input(format!("expected a {d}x{d} matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn corruption_channel(eps: f64) -> Bernoulli {
    Bernoulli::new(eps).expect("eps validated to lie in [0, 1]")
}

pub fn gen_linreg<R: Rng + ?Sized>(rng: &mut R, spec: &LinRegSpec, n: usize) -> Result<Generated<RegressionData>> {
    spec.validate()?;
    let d = spec.theta_star.len();
    let theta = DVector::from_column_slice(&spec.theta_star);
    let box_dist = Uniform::new_inclusive(-spec.feature_bound, spec.feature_bound)
        .map_err(|e| RrmError::Input(e.to_string()))?;
    let channel = corruption_channel(spec.eps);
    let chi2 = ChiSquared::new(spec.nu).map_err(|e| RrmError::Input(e.to_string()))?;

    let mut features = DMatrix::zeros(n, d);
    let mut targets = DVector::zeros(n);
    let mut corrupted = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            features[(i, j)] = box_dist.sample(rng);
        }
        let mean = features.row(i).transpose().dot(&theta);
        let bad = channel.sample(rng);
        let noise = if bad {
            let g: f64 = rng.sample(StandardNormal);
            g * (spec.nu / chi2.sample(rng)).sqrt()
        } else {
            spec.sigma * rng.sample::<f64, _>(StandardNormal)
        };
        targets[i] = mean + noise;
        corrupted.push(bad);
    }
    Ok(Generated {
        data: RegressionData::new(features, targets)?,
        corrupted,
    })
}

pub fn gen_logreg<R: Rng + ?Sized>(rng: &mut R, spec: &LogRegSpec, n: usize) -> Result<Generated<ClassificationData>> {
    spec.validate()?;
    let d = spec.clean_mean.len();
    let clean_factor = cholesky_factor(&rows_to_matrix(&spec.clean_covariance, d)?)?;
    let corrupt_factor = cholesky_factor(&rows_to_matrix(&spec.corrupt_covariance, d)?)?;
    let clean_mean = DVector::from_column_slice(&spec.clean_mean);
    let corrupt_mean = DVector::from_column_slice(&spec.corrupt_mean);
    let channel = corruption_channel(spec.eps);

    let mut features = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut corrupted = Vec::with_capacity(n);
    for i in 0..n {
        let bad = channel.sample(rng);
        let g = standard_normal_vector(rng, d);
        let x = if bad {
            &corrupt_mean + &corrupt_factor * g
        } else {
            &clean_mean + &clean_factor * g
        };
        let label = if bad {
            spec.corrupt_label
        } else {
            let score = spec.theta_star[0]
                + spec.theta_star[1..].iter().zip(x.iter()).map(|(t, v)| t * v).sum::<f64>();
            u8::from(score > 0.0)
        };
        features.set_row(i, &x.transpose());
        labels.push(label);
        corrupted.push(bad);
    }
    Ok(Generated {
        data: ClassificationData::new(features, labels)?,
        corrupted,
    })
}

pub fn gen_pca<R: Rng + ?Sized>(rng: &mut R, spec: &PcaSpec, n: usize) -> Result<Generated<PointData>> {
    spec.validate()?;
    let channel = corruption_channel(spec.eps);
    let chi2 = ChiSquared::new(spec.nu).map_err(|e| RrmError::Input(e.to_string()))?;
    let identity = DMatrix::identity(2, 2);
    let origin = DVector::zeros(2);

    let mut points = DMatrix::zeros(n, 2);
    let mut corrupted = Vec::with_capacity(n);
    for i in 0..n {
        let bad = channel.sample(rng);
        if bad {
            let z = student_t_draw(rng, &origin, &identity, &chi2, spec.nu);
            points[(i, 0)] = z[0];
            points[(i, 1)] = z[1];
        } else {
            let z1: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            points[(i, 0)] = z1;
            points[(i, 1)] = spec.slope * z1 + spec.sigma * e;
        }
        corrupted.push(bad);
    }
    Ok(Generated {
        data: PointData::new(points)?,
        corrupted,
    })
}

pub fn gen_covariance<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &CovarianceSpec,
    n: usize,
) -> Result<Generated<PointData>> {
    spec.validate()?;
    let d = spec.mean.len();
    let factor = cholesky_factor(&spec.sigma_star_matrix())?;
    let mean = DVector::from_column_slice(&spec.mean);
    let channel = corruption_channel(spec.eps);
    let chi2 = ChiSquared::new(spec.nu).map_err(|e| RrmError::Input(e.to_string()))?;

    let mut points = DMatrix::zeros(n, d);
    let mut corrupted = Vec::with_capacity(n);
    for i in 0..n {
        let bad = channel.sample(rng);
        let z = if bad {
            student_t_draw(rng, &mean, &factor, &chi2, spec.nu)
        } else {
            &mean + &factor * standard_normal_vector(rng, d)
        };
        points.set_row(i, &z.transpose());
        corrupted.push(bad);
    }
    Ok(Generated {
        data: PointData::new(points)?,
        corrupted,
    })
}

/// Flips the labels of `count` samples drawn uniformly without replacement
/// from those labeled `from_label`. Returns the flip mask.
pub fn flip_labels<R: Rng + ?Sized>(
    rng: &mut R,
    data: &mut ClassificationData,
    count: usize,
    from_label: u8,
    to_label: u8,
) -> Result<Vec<bool>> {
    if from_label > 1 || to_label > 1 {
        return Err(RrmError::Input("labels must be 0 or 1".into()));
    }
    let candidates: Vec<usize> = data
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == from_label)
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < count {
        return Err(RrmError::Input(format!(
            "cannot flip {count} labels: only {} samples have label {from_label}",
            candidates.len()
        )));
    }
    let mut mask = vec![false; data.len()];
    let labels = data.labels_mut();
    for pick in sample_indices(rng, candidates.len(), count) {
        let i = candidates[pick];
        labels[i] = to_label;
        mask[i] = true;
    }
    Ok(mask)
}
