//! Independent reference solvers shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Point `(1 - tau) p + tau u` with entropy `target`, found by bisection on `tau`.
fn mix_to_entropy(p: &[f64], target: f64) -> Vec<f64> {
    let n = p.len() as f64;
    let mix = |tau: f64| -> Vec<f64> { p.iter().map(|v| (1.0 - tau) * v + tau / n).collect() };
    if entropy(p) >= target {
        return p.to_vec();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy(&mix(mid)) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(hi)
}

/// Minimizes `sum p_i l_i` over the simplex subject to `H(p) >= target` by
/// scaled gradient projection on the active manifold `{sum p = 1, H(p) = target}`
/// with a retraction toward the uniform point. Returns the weights.
pub fn inner_primal_oracle(losses: &[f64], target: f64) -> Vec<f64> {
    let n = losses.len();
    let best = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if target <= 0.0 {
        let mut p = vec![0.0; n];
        p[best] = 1.0;
        return p;
    }
    let mut vertex = vec![0.0; n];
    vertex[best] = 1.0;
    let mut p = mix_to_entropy(&vertex, target);
    let mut value = dot(&p, losses);
    let mut step = 1.0f64;
    for _ in 0..200_000 {
        let h: Vec<f64> = p.iter().map(|v| -(v.ln() + 1.0)).collect();
        // Solve for the multipliers that keep the scaled direction tangent.
        let s11: f64 = p.iter().sum();
        let s12 = dot(&p, &h);
        let s22: f64 = p.iter().zip(&h).map(|(v, g)| v * g * g).sum();
        let r1 = dot(&p, losses);
        let r2: f64 = p.iter().zip(&h).zip(losses).map(|((v, g), l)| v * g * l).sum();
        let det = s11 * s22 - s12 * s12;
        let (alpha, beta) = if det.abs() > 1e-300 {
            ((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det)
        } else {
            (r1 / s11, 0.0)
        };
        let d: Vec<f64> = (0..n)
            .map(|i| -p[i] * (losses[i] - alpha - beta * h[i]))
            .collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-15 {
            break;
        }
        let mut boundary = f64::INFINITY;
        for i in 0..n {
            if d[i] < 0.0 {
                boundary = boundary.min(-p[i] / d[i]);
            }
        }
        let mut t = step.min(0.5 * boundary);
        let mut moved = false;
        while t > 1e-18 {
            let trial: Vec<f64> = (0..n).map(|i| p[i] + t * d[i]).collect();
            let trial = mix_to_entropy(&trial, target);
            let trial_value = dot(&trial, losses);
            if trial_value < value {
                p = trial;
                value = trial_value;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        step = (2.0 * t).min(1e6);
    }
    p
}

/// Value of the Lagrange dual `max_lambda lambda t - lambda ln sum exp(-l_i / lambda)`
/// by golden-section search over `ln lambda`.
pub fn inner_dual_value(losses: &[f64], target: f64) -> f64 {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let g = |log_lambda: f64| {
        let lambda = log_lambda.exp();
        let z: f64 = losses.iter().map(|l| (-(l - min) / lambda).exp()).sum();
        min + lambda * target - lambda * z.ln()
    };
    let (mut a, mut b) = (-40.0f64, 40.0f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    g(0.5 * (a + b))
}

/// Weighted least squares through the normal equations `X^T W X theta = X^T W y`,
/// solved by Gaussian elimination with partial pivoting.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let mut a = vec![vec![0.0; d + 1]; d];
    for ((x, &yi), &wi) in rows.iter().zip(y).zip(w) {
        for r in 0..d {
            for c in 0..d {
                a[r][c] += wi * x[r] * x[c];
            }
            a[r][d] += wi * x[r] * yi;
        }
    }
    solve_augmented(a)
}

fn solve_augmented(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let d = a.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in col + 1..d {
            let f = a[r][col] / a[col][col];
            for c in col..=d {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][d] - s) / a[r][r];
    }
    x
}

/// Weighted logistic maximum likelihood by plain gradient descent with
/// backtracking, intercept first.
pub fn logistic_gradient_descent(rows: &[Vec<f64>], labels: &[u8], w: &[f64], ridge: f64) -> Vec<f64> {
    let d = rows[0].len() + 1;
    let aug: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let objective = |theta: &[f64]| -> f64 {
        let mut total = 0.5 * ridge * dot(theta, theta);
        for ((x, &y), &wi) in aug.iter().zip(labels).zip(w) {
            let s = dot(x, theta);
            let z = if y == 1 { -s } else { s };
            total += wi * (z.max(0.0) + (-z.abs()).exp().ln_1p());
        }
        total
    };
    let gradient = |theta: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|t| ridge * t).collect();
        for ((x, &y), &wi) in aug.iter().zip(labels).zip(w) {
            let p = 1.0 / (1.0 + (-dot(x, theta)).exp());
            for j in 0..d {
                g[j] += wi * (p - f64::from(y)) * x[j];
            }
        }
        g
    };
    let mut theta = vec![0.0; d];
    let mut value = objective(&theta);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = gradient(&theta);
        let gg = dot(&g, &g);
        if gg.sqrt() < 1e-11 {
            break;
        }
        let mut t = step;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let v = objective(&trial);
            if v <= value - 0.5 * t * gg {
                theta = trial;
                value = v;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return theta;
            }
        }
        step = 2.0 * t;
    }
    theta
}

/// Dominant unit eigenvector of a symmetric 2 x 2 matrix in closed form,
/// oriented so the first nonzero component is positive.
pub fn eigen_2x2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let top = mean + radius;
    let v = if b.abs() > 1e-300 {
        [b, top - a]
    } else if a >= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let mut u = [v[0] / norm, v[1] / norm];
    if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
        u = [-u[0], -u[1]];
    }
    u
}
