//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rrm_core::datagen::{gen_covariance, gen_linreg, gen_logreg, gen_pca, CovarianceSpec, LinRegSpec, LogRegSpec, PcaSpec, SeededRng};
use rrm_core::experiments::{
    median, run_experiment, run_real_data, run_sweep, ExperimentKind, ExperimentOverrides, ExperimentReport,
    Method, SWEEP_EPS_GRID,
};
use rrm_core::models::{Gaussian, LinearRegression, LogisticRegression, Pca, RegressionData};
use rrm_core::solver::max_relative_increase;
use rrm_core::{concentrated_objective, erm_fit, rrm_fit, solve_inner, ModelFamily, RobustnessBound, RrmConfig};

const INNER_OBJECTIVE_TOL: f64 = 1e-6;
const INNER_ENTROPY_TOL: f64 = 1e-8;
const REDUCTION_CLOSED_FORM_TOL: f64 = 1e-9;
const REDUCTION_LOGISTIC_TOL: f64 = 1e-4;
const DESCENT_TOL: f64 = 1e-12;
const LINREG_RATIO: f64 = 0.7;
const SWEEP_MIN_EPS: f64 = 0.10;
const SWEEP_ALLOWED_VIOLATIONS: usize = 1;
const REAL_DATA_TARGET: f64 = 0.9124;
const REAL_DATA_BAND: f64 = 0.02;
const REAL_DATA_SEEDS: u64 = 10;
const OUTLIER_WEIGHT_RATIO: f64 = 0.10;

const MC_RUNS: usize = 100;
const BASE_SEED: u64 = 7;

struct Verdict {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

fn inner_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = SeededRng::new(2024);
    let mut worst_obj = 0.0f64;
    let mut worst_dual = 0.0f64;
    let mut worst_entropy = 0.0f64;
    let mut failures = 0;
    for k in 0..100 {
        let n = rng.random_range(2..=10);
        let eps_tilde = [0.1, 0.2, 0.3, 0.4, 0.5][k % 5];
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let losses: Vec<f64> = (0..n).map(|_| scale * rng.random::<f64>()).collect();
        let bound = RobustnessBound::new(eps_tilde).unwrap();
        let sol = match solve_inner(&losses, bound) {
            Ok(s) => s,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let value = concentrated_objective(&losses, &sol);
        let primal = common::inner_primal_oracle(&losses, sol.target_entropy);
        let primal_value: f64 = primal.iter().zip(&losses).map(|(p, l)| p * l).sum();
        let dual = if sol.target_entropy > 0.0 {
            common::inner_dual_value(&losses, sol.target_entropy)
        } else {
            value
        };
        worst_obj = worst_obj.max((value - primal_value).abs());
        worst_dual = worst_dual.max((value - dual).abs());
        worst_entropy = worst_entropy.max((sol.target_entropy - sol.weights.entropy()).max(0.0));
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: failures == 0
            && worst_obj <= INNER_OBJECTIVE_TOL
            && worst_dual <= INNER_OBJECTIVE_TOL
            && worst_entropy <= INNER_ENTROPY_TOL
            && within(elapsed, 5),
        detail: format!(
            "max |obj - primal oracle| = {worst_obj:.2e}, max |obj - dual| = {worst_dual:.2e}, max entropy shortfall = {worst_entropy:.2e}, failures = {failures}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn max_abs_diff(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn reduction() -> Verdict {
    let zero = RrmConfig::new(0.0).unwrap();
    let mut rng = SeededRng::new(11);
    let lin = gen_linreg(
        &mut rng,
        &LinRegSpec {
            eps: 0.2,
            theta_star: vec![1.0; 5],
            sigma: 0.25,
            nu: 1.5,
            feature_bound: 1.0,
        },
        40,
    )
    .unwrap()
    .data;
    let d_lin = max_abs_diff(
        rrm_fit(&LinearRegression, &lin, &zero).unwrap().params.coefficients.iter().copied(),
        erm_fit(&LinearRegression, &lin).unwrap().coefficients.iter().copied(),
    );
    let pts = gen_pca(&mut rng, &PcaSpec { eps: 0.2, slope: 1.0, sigma: 0.25, nu: 1.5 }, 40).unwrap().data;
    let d_pca = max_abs_diff(
        rrm_fit(&Pca, &pts, &zero).unwrap().params.direction().iter().copied(),
        erm_fit(&Pca, &pts).unwrap().direction().iter().copied(),
    );
    let cov_spec = CovarianceSpec {
        eps: 0.2,
        mean: vec![0.0, 0.0],
        sigma_star: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        nu: 1.5,
    };
    let cov = gen_covariance(&mut rng, &cov_spec, 50).unwrap().data;
    let (g_rrm, g_erm) = (rrm_fit(&Gaussian, &cov, &zero).unwrap().params, erm_fit(&Gaussian, &cov).unwrap());
    let d_cov = max_abs_diff(
        g_rrm.mean().iter().chain(g_rrm.covariance().iter()).copied(),
        g_erm.mean().iter().chain(g_erm.covariance().iter()).copied(),
    );
    let cls = gen_logreg(&mut rng, &LogRegSpec::standard(0.05, 0.99), 100).unwrap().data;
    let family = LogisticRegression::default();
    let d_log = max_abs_diff(
        rrm_fit(&family, &cls, &zero).unwrap().params.coefficients.iter().copied(),
        erm_fit(&family, &cls).unwrap().coefficients.iter().copied(),
    );
    let closed = d_lin.max(d_pca).max(d_cov);
    Verdict {
        pass: closed <= REDUCTION_CLOSED_FORM_TOL && d_log <= REDUCTION_LOGISTIC_TOL,
        detail: format!("linreg {d_lin:.1e}, pca {d_pca:.1e}, gaussian {d_cov:.1e}, logistic {d_log:.1e}"),
    }
}

fn descent(reports: &[&ExperimentReport]) -> Verdict {
    let mut traces = 0;
    let mut worst = f64::NEG_INFINITY;
    for report in reports {
        for t in report.trials.iter().filter(|t| t.method == Method::Rrm && !t.excluded) {
            traces += 1;
            worst = worst.max(max_relative_increase(&t.trace));
        }
    }
    Verdict {
        pass: traces > 0 && worst <= DESCENT_TOL,
        detail: format!("{traces} traces, largest relative step increase {worst:.2e}"),
    }
}

fn summary_line(report: &ExperimentReport) -> String {
    let e = report.summary.method(Method::Erm);
    let r = report.summary.method(Method::Rrm);
    format!(
        "ERM mean {:.4} median {:.4}, RRM mean {:.4} median {:.4}, excluded {}/{}",
        e.mean,
        e.q50,
        r.mean,
        r.q50,
        e.excluded + r.excluded,
        2 * report.summary.mc_runs
    )
}

fn timed_experiment(kind: ExperimentKind) -> (ExperimentReport, Duration) {
    let start = Instant::now();
    let report = run_experiment(kind, &ExperimentOverrides::default(), MC_RUNS, BASE_SEED).unwrap();
    (report, start.elapsed())
}

fn linreg(report: &ExperimentReport, elapsed: Duration) -> Verdict {
    let e = report.summary.method(Method::Erm).mean;
    let r = report.summary.method(Method::Rrm).mean;
    Verdict {
        pass: r <= LINREG_RATIO * e && within(elapsed, 60),
        detail: format!("ratio {:.3}; {}; {:.1}s", r / e, summary_line(report), elapsed.as_secs_f64()),
    }
}

fn sweep() -> (Verdict, Vec<ExperimentReport>) {
    let start = Instant::now();
    let report = run_sweep(&ExperimentOverrides::default(), &SWEEP_EPS_GRID, MC_RUNS, BASE_SEED).unwrap();
    let elapsed = start.elapsed();
    let mut gaps = Vec::new();
    let mut dominated = true;
    for &eps in &SWEEP_EPS_GRID {
        let e = report.mean_at(eps, Method::Erm).unwrap();
        let r = report.mean_at(eps, Method::Rrm).unwrap();
        if eps >= SWEEP_MIN_EPS - 1e-12 && r > e {
            dominated = false;
        }
        gaps.push(e - r);
    }
    let violations = gaps.windows(2).filter(|w| w[1] < w[0]).count();
    let gap_text: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    (
        Verdict {
            pass: dominated && violations <= SWEEP_ALLOWED_VIOLATIONS && within(elapsed, 300),
            detail: format!(
                "gaps (ERM - RRM) [{}], monotonicity violations {violations}, RRM <= ERM for eps >= 0.1: {dominated}; {:.1}s",
                gap_text.join(", "),
                elapsed.as_secs_f64()
            ),
        },
        report.reports,
    )
}

fn median_better(report: &ExperimentReport, elapsed: Duration, budget: u64) -> Verdict {
    let e = report.summary.method(Method::Erm).q50;
    let r = report.summary.method(Method::Rrm).q50;
    Verdict {
        pass: r < e && within(elapsed, budget),
        detail: format!("{}; {:.1}s", summary_line(report), elapsed.as_secs_f64()),
    }
}

fn covariance(report: &ExperimentReport, elapsed: Duration) -> Verdict {
    let e = report.summary.method(Method::Erm);
    let r = report.summary.method(Method::Rrm);
    Verdict {
        pass: r.mean < e.mean && r.q75 < e.q75 && within(elapsed, 60),
        detail: format!(
            "q75 ERM {:.4} RRM {:.4}; {}; {:.1}s",
            e.q75,
            r.q75,
            summary_line(report),
            elapsed.as_secs_f64()
        ),
    }
}

fn real_data() -> Verdict {
    let start = Instant::now();
    let path = common::data_path("wisconsin_breast_cancer.csv");
    let bound = RobustnessBound::new(0.15).unwrap();
    let mut erm = Vec::new();
    let mut rrm = Vec::new();
    let mut sizes_ok = true;
    for seed in 0..REAL_DATA_SEEDS {
        let out = run_real_data(&path, 0.6, 40, bound, seed).unwrap();
        sizes_ok &= out.test_size == 274 && out.flipped == 40;
        erm.push(out.erm.accuracy);
        rrm.push(out.rrm.accuracy);
    }
    let elapsed = start.elapsed();
    let (e, r) = (median(&erm), median(&rrm));
    Verdict {
        pass: sizes_ok && r >= e && (r - REAL_DATA_TARGET).abs() <= REAL_DATA_BAND && within(elapsed, 30),
        detail: format!(
            "median accuracy ERM {:.2}% RRM {:.2}% (target 91.24% +/- 2), test size 274: {sizes_ok}; {:.1}s",
            100.0 * e,
            100.0 * r,
            elapsed.as_secs_f64()
        ),
    }
}

fn outlier_weights() -> Verdict {
    let table = rrm_core::experiments::io::read_numeric_csv(common::data_path("outlier_line.csv")).unwrap();
    let data: RegressionData = table.to_regression().unwrap();
    let result = rrm_fit(&LinearRegression, &data, &RrmConfig::new(0.3).unwrap()).unwrap();
    let losses = LinearRegression.losses(&result.params, &data).unwrap();
    let w = result.weights.as_slice();
    let outliers: Vec<usize> = (0..data.len()).filter(|&i| losses[i] > 2500.0).collect();
    let inliers: Vec<f64> = (0..data.len()).filter(|i| !outliers.contains(i)).map(|i| w[i]).collect();
    let median_inlier = median(&inliers);
    let worst = outliers.iter().map(|&i| w[i] / median_inlier).fold(0.0, f64::max);
    Verdict {
        pass: outliers.len() == 2 && worst < OUTLIER_WEIGHT_RATIO,
        detail: format!(
            "{} outliers, largest outlier / median inlier weight {worst:.2e}",
            outliers.len()
        ),
    }
}

fn main() {
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |id: usize, name: &'static str, v: Verdict| {
        println!("{} criterion {id:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((id, name, v));
    };

    report(1, "inner solver oracle", inner_oracle());
    report(2, "reduction identity", reduction());

    let (lin, lin_t) = timed_experiment(ExperimentKind::Linreg);
    let (sweep_verdict, sweep_reports) = sweep();
    let (log, log_t) = timed_experiment(ExperimentKind::Logreg);
    let (pca, pca_t) = timed_experiment(ExperimentKind::Pca);
    let (cov, cov_t) = timed_experiment(ExperimentKind::Covariance);

    let mut all: Vec<&ExperimentReport> = vec![&lin, &log, &pca, &cov];
    all.extend(sweep_reports.iter());
    report(3, "descent property", descent(&all));
    report(4, "linreg error ratio", linreg(&lin, lin_t));
    report(5, "linreg sweep", sweep_verdict);
    report(6, "logreg median angle", median_better(&log, log_t, 120));
    report(7, "pca median misalignment", median_better(&pca, pca_t, 60));
    report(8, "covariance error", covariance(&cov, cov_t));
    report(9, "real data label flips", real_data());
    report(10, "outlier weight suppression", outlier_weights());

    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.2.pass).map(|v| v.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
