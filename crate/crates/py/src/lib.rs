//! Python bindings. Arrays cross the boundary as nested lists of floats.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rrm_core::datagen::{
    gen_covariance, gen_linreg, gen_logreg, gen_pca, CovarianceSpec, LinRegSpec, LogRegSpec, PcaSpec, SeededRng,
};
use rrm_core::experiments::{self, ExperimentKind, ExperimentOverrides, Method};
use rrm_core::models::{ClassificationData, Gaussian, LinearRegression, LogisticRegression, Pca, PointData, RegressionData};
use rrm_core::{ErrorKind, ModelFamily, RobustnessBound, RrmConfig, RrmError, Weights};

fn to_py(e: RrmError) -> PyErr {
    match e.kind() {
        ErrorKind::Io => PyOSError::new_err(e.to_string()),
        ErrorKind::Validation => PyValueError::new_err(e.to_string()),
        ErrorKind::Numerical => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Optimal sample weights for fixed losses.
#[pyclass(frozen, get_all, module = "rrm")]
struct InnerSolution {
    weights: Vec<f64>,
    /// `inf` for `eps_tilde = 0`, `0` when the minimum loss is tied.
    lambda_star: f64,
    achieved_entropy: f64,
    target_entropy: f64,
}

#[pymethods]
impl InnerSolution {
    fn __repr__(&self) -> String {
        format!(
            "InnerSolution(n={}, lambda_star={}, achieved_entropy={})",
            self.weights.len(),
            self.lambda_star,
            self.achieved_entropy
        )
    }
}

/// Result of an ERM or RRM fit. `params` holds coefficients (linreg, logreg),
/// the unit direction (pca) or the mean (gaussian); `covariance` is set for
/// gaussian fits only.
#[pyclass(frozen, get_all, module = "rrm")]
struct FitResult {
    model: String,
    method: String,
    params: Vec<f64>,
    covariance: Option<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    losses: Vec<f64>,
    lambda_star: f64,
    iterations: usize,
    converged: bool,
    objectives: Vec<f64>,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(model={}, method={}, params={:?}, iterations={}, converged={})",
            self.model, self.method, self.params, self.iterations, self.converged
        )
    }
}

#[pyfunction]
fn entropy(weights: Vec<f64>) -> PyResult<f64> {
    Ok(Weights::new(weights).map_err(to_py)?.entropy())
}

#[pyfunction]
fn solve_inner(losses: Vec<f64>, eps_tilde: f64) -> PyResult<InnerSolution> {
    let bound = RobustnessBound::new(eps_tilde).map_err(to_py)?;
    let sol = rrm_core::solve_inner(&losses, bound).map_err(to_py)?;
    Ok(InnerSolution {
        weights: sol.weights.into_vec(),
        lambda_star: sol.lambda_star,
        achieved_entropy: sol.achieved_entropy,
        target_entropy: sol.target_entropy,
    })
}

/// Gibbs weights `exp(-l_i / lambda)`, normalized.
#[pyfunction]
fn weights_at_lambda(losses: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    Ok(rrm_core::weights_at_lambda(&losses, lam).map_err(to_py)?.into_vec())
}

struct FitOptions {
    robust: bool,
    eps_tilde: f64,
    max_outer_iterations: usize,
    tolerance: f64,
}

fn fit_family<F, P>(family: &F, data: &F::Data, opts: &FitOptions, unpack: P) -> Result<FitResult, RrmError>
where
    F: ModelFamily,
    P: Fn(&F::Params) -> (Vec<f64>, Option<Vec<Vec<f64>>>),
{
    let config = RrmConfig::new(opts.eps_tilde)?
        .with_max_outer_iterations(opts.max_outer_iterations)
        .with_tolerance(opts.tolerance);
    let n = family.num_samples(data);
    let (params, weights, lambda_star, iterations, converged, objectives) = if opts.robust {
        let r = rrm_core::rrm_fit(family, data, &config)?;
        let objectives = r.trace.iter().map(|t| t.objective).collect();
        (r.params, r.weights, r.lambda_star, r.iterations, r.converged, objectives)
    } else {
        let p = rrm_core::erm_fit(family, data)?;
        (p, Weights::uniform(n), f64::INFINITY, 1, true, Vec::new())
    };
    let losses = family.losses(&params, data)?;
    let (values, covariance) = unpack(&params);
    Ok(FitResult {
        model: family.name().to_owned(),
        method: if opts.robust { "RRM" } else { "ERM" }.to_owned(),
        params: values,
        covariance,
        weights: weights.into_vec(),
        losses,
        lambda_star,
        iterations,
        converged,
        objectives,
    })
}

/// Least squares. Include a column of ones in `features` for an intercept.
#[pyfunction]
#[pyo3(signature = (features, targets, eps_tilde=0.0, robust=true, max_outer_iterations=500, tolerance=1e-8))]
fn fit_linreg(
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
    eps_tilde: f64,
    robust: bool,
    max_outer_iterations: usize,
    tolerance: f64,
) -> PyResult<FitResult> {
    let opts = FitOptions { robust, eps_tilde, max_outer_iterations, tolerance };
    let data = RegressionData::from_rows(&features, targets).map_err(to_py)?;
    fit_family(&LinearRegression, &data, &opts, |p| (vector(&p.coefficients), None)).map_err(to_py)
}

/// Logistic regression with labels in {0, 1}; the intercept is added internally
/// and is the first coefficient.
#[pyfunction]
#[pyo3(signature = (features, labels, eps_tilde=0.0, robust=true, max_outer_iterations=500, tolerance=1e-8))]
fn fit_logreg(
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    eps_tilde: f64,
    robust: bool,
    max_outer_iterations: usize,
    tolerance: f64,
) -> PyResult<FitResult> {
    let opts = FitOptions { robust, eps_tilde, max_outer_iterations, tolerance };
    let data = ClassificationData::from_rows(&features, labels).map_err(to_py)?;
    fit_family(&LogisticRegression::default(), &data, &opts, |p| (vector(&p.coefficients), None)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (points, eps_tilde=0.0, robust=true, max_outer_iterations=500, tolerance=1e-8))]
fn fit_pca(
    points: Vec<Vec<f64>>,
    eps_tilde: f64,
    robust: bool,
    max_outer_iterations: usize,
    tolerance: f64,
) -> PyResult<FitResult> {
    let opts = FitOptions { robust, eps_tilde, max_outer_iterations, tolerance };
    let data = PointData::from_rows(&points).map_err(to_py)?;
    fit_family(&Pca, &data, &opts, |p| (vector(p.direction()), None)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (points, eps_tilde=0.0, robust=true, max_outer_iterations=500, tolerance=1e-8))]
fn fit_gaussian(
    points: Vec<Vec<f64>>,
    eps_tilde: f64,
    robust: bool,
    max_outer_iterations: usize,
    tolerance: f64,
) -> PyResult<FitResult> {
    let opts = FitOptions { robust, eps_tilde, max_outer_iterations, tolerance };
    let data = PointData::from_rows(&points).map_err(to_py)?;
    fit_family(&Gaussian, &data, &opts, |p| (vector(p.mean()), Some(matrix_rows(p.covariance())))).map_err(to_py)
}

/// Returns `(features, targets, corrupted)`; the true coefficients are all ones.
#[pyfunction]
#[pyo3(signature = (n, eps, seed, dim=10, sigma=0.25, nu=1.5))]
fn generate_linreg(n: usize, eps: f64, seed: u64, dim: usize, sigma: f64, nu: f64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<bool>)> {
    let spec = LinRegSpec { eps, theta_star: vec![1.0; dim], sigma, nu, feature_bound: 5.0 };
    let g = gen_linreg(&mut SeededRng::new(seed), &spec, n).map_err(to_py)?;
    Ok((matrix_rows(g.data.features()), vector(g.data.targets()), g.corrupted))
}

/// Returns `(features, labels, corrupted)` with true hyperplane `[-1, 1, 1]`.
#[pyfunction]
#[pyo3(signature = (n, eps, seed, rho=0.99))]
fn generate_logreg(n: usize, eps: f64, seed: u64, rho: f64) -> PyResult<(Vec<Vec<f64>>, Vec<u8>, Vec<bool>)> {
    let g = gen_logreg(&mut SeededRng::new(seed), &LogRegSpec::standard(eps, rho), n).map_err(to_py)?;
    Ok((matrix_rows(g.data.features()), g.data.labels().to_vec(), g.corrupted))
}

/// Returns `(points, corrupted)` scattered around the line `y = 2x`.
#[pyfunction]
#[pyo3(signature = (n, eps, seed, sigma=0.25, nu=1.5))]
fn generate_pca(n: usize, eps: f64, seed: u64, sigma: f64, nu: f64) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
    let spec = PcaSpec { eps, slope: 2.0, sigma, nu };
    let g = gen_pca(&mut SeededRng::new(seed), &spec, n).map_err(to_py)?;
    Ok((matrix_rows(g.data.points()), g.corrupted))
}

/// Returns `(points, corrupted)`; clean points have covariance `[[1, 0.8], [0.8, 1]]`.
#[pyfunction]
#[pyo3(signature = (n, eps, seed, nu=1.5))]
fn generate_covariance(n: usize, eps: f64, seed: u64, nu: f64) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
    let spec = CovarianceSpec {
        eps,
        mean: vec![0.0, 0.0],
        sigma_star: vec![vec![1.0, 0.8], vec![0.8, 1.0]],
        nu,
    };
    let g = gen_covariance(&mut SeededRng::new(seed), &spec, n).map_err(to_py)?;
    Ok((matrix_rows(g.data.points()), g.corrupted))
}

#[pyfunction]
fn relative_error(theta_hat: Vec<f64>, theta_star: Vec<f64>) -> PyResult<f64> {
    experiments::metric_relative_error(&DVector::from_vec(theta_hat), &DVector::from_vec(theta_star)).map_err(to_py)
}

#[pyfunction]
fn angle_deg(theta_hat: Vec<f64>, theta_star: Vec<f64>) -> PyResult<f64> {
    experiments::metric_angle_deg(&DVector::from_vec(theta_hat), &DVector::from_vec(theta_star)).map_err(to_py)
}

#[pyfunction]
fn misalignment(theta_hat: Vec<f64>, theta_star: Vec<f64>) -> PyResult<f64> {
    experiments::metric_misalignment(&DVector::from_vec(theta_hat), &DVector::from_vec(theta_star)).map_err(to_py)
}

fn square(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("covariance must be a square matrix"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

#[pyfunction]
fn cov_relative_error(sigma_hat: Vec<Vec<f64>>, sigma_star: Vec<Vec<f64>>) -> PyResult<f64> {
    experiments::metric_cov_relerr(&square(&sigma_hat)?, &square(&sigma_star)?).map_err(to_py)
}

/// Runs paired ERM/RRM trials. Returns a dict with one summary per method
/// (`mean`, `q25`, `q50`, `q75`, `min`, `max`, `count`, `excluded`) and the
/// raw per-trial metric values under `values`.
#[pyfunction]
#[pyo3(signature = (name, mc_runs=100, seed=0, n=None, eps=None, eps_tilde=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    mc_runs: usize,
    seed: u64,
    n: Option<usize>,
    eps: Option<f64>,
    eps_tilde: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ExperimentKind = name.parse().map_err(to_py)?;
    let overrides = ExperimentOverrides { n, eps, eps_tilde, ..Default::default() };
    let report = py
        .detach(|| experiments::run_experiment(kind, &overrides, mc_runs, seed))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("experiment", kind.as_str())?;
    out.set_item("metric", kind.metric_name())?;
    for method in Method::ALL {
        let s = report.summary.method(method);
        let d = PyDict::new(py);
        d.set_item("mean", s.mean)?;
        d.set_item("q25", s.q25)?;
        d.set_item("q50", s.q50)?;
        d.set_item("q75", s.q75)?;
        d.set_item("min", s.min)?;
        d.set_item("max", s.max)?;
        d.set_item("count", s.count)?;
        d.set_item("excluded", s.excluded)?;
        d.set_item("values", report.values(method))?;
        out.set_item(method.as_str(), d)?;
    }
    Ok(out)
}

#[pymodule]
fn rrm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<InnerSolution>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(solve_inner, m)?)?;
    m.add_function(wrap_pyfunction!(weights_at_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linreg, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logreg, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(generate_linreg, m)?)?;
    m.add_function(wrap_pyfunction!(generate_logreg, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pca, m)?)?;
    m.add_function(wrap_pyfunction!(generate_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(angle_deg, m)?)?;
    m.add_function(wrap_pyfunction!(misalignment, m)?)?;
    m.add_function(wrap_pyfunction!(cov_relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
