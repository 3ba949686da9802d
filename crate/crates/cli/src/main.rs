use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rrm_core::experiments::io::{format_value, read_numeric_csv, summary_json, write_sweep_csv, write_trials_csv};
use rrm_core::experiments::{
    evaluate_label_flips, run_experiment, run_sweep, ExperimentConfig, ExperimentKind, ExperimentOverrides,
    DEFAULTS_VERSION, SWEEP_EPS_GRID, SWEEP_NU,
};
use rrm_core::models::{Gaussian, LinearRegression, LogisticRegression, Pca};
use rrm_core::{erm_fit, rrm_fit, solve_inner, ErrorKind, ModelFamily, RobustnessBound, RrmConfig, RrmError};
use serde::{Deserialize, Serialize};
use serde_json::json;

mod config;

const OUTPUT_DIR_ENV: &str = "RRM_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Linreg,
    Logreg,
    Pca,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Rrm,
    Erm,
}

#[derive(Parser)]
#[command(name = "rrm", version, about = "Robust risk minimization with entropy-constrained sample weights")]
struct Cli {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (fit, real-data, inner-solve; stdout if omitted) or
    /// directory (experiment, sweep; defaults to $RRM_OUTPUT_DIR, then ./results).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Default)]
struct SolverFlags {
    #[arg(long)]
    max_outer_iterations: Option<usize>,
    #[arg(long)]
    objective_rel_tolerance: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct OverrideFlags {
    /// Samples per trial.
    #[arg(long)]
    n: Option<usize>,
    /// True corruption fraction of the generator.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eps_tilde: Option<f64>,
    /// Degrees of freedom of the t-distributed corruption.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Feature correlation of the logistic generator.
    #[arg(long)]
    rho: Option<f64>,
    /// Feature dimension of the regression generator.
    #[arg(long)]
    dim: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
}

impl OverrideFlags {
    fn to_overrides(&self) -> ExperimentOverrides {
        ExperimentOverrides {
            n: self.n,
            eps: self.eps,
            eps_tilde: self.eps_tilde,
            nu: self.nu,
            sigma: self.sigma,
            rho: self.rho,
            dim: self.dim,
            max_outer_iterations: self.solver.max_outer_iterations,
            objective_rel_tolerance: self.solver.objective_rel_tolerance,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model family to a CSV file.
    Fit {
        #[arg(long, value_enum)]
        model: Model,
        /// Numeric CSV. Regression and logistic data carry the outcome in the last column.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        eps_tilde: Option<f64>,
        #[arg(long, value_enum, default_value = "rrm")]
        method: FitMethod,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo benchmark and write raw trials plus a summary.
    Experiment {
        /// One of linreg, logreg, pca, covariance.
        name: String,
        #[arg(long = "mc")]
        mc_runs: Option<usize>,
        #[command(flatten)]
        overrides: OverrideFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Linear-regression benchmark over a grid of corruption levels.
    Sweep {
        #[arg(long = "mc")]
        mc_runs: Option<usize>,
        /// Comma-separated corruption levels.
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        #[command(flatten)]
        overrides: OverrideFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Label-flip evaluation of logistic ERM and RRM on a labeled CSV.
    RealData {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Number of class-1 training labels flipped to 0.
        #[arg(long)]
        flips: Option<usize>,
        #[arg(long)]
        eps_tilde: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal weights for a file of losses, one per line.
    InnerSolve {
        #[arg(long)]
        losses: PathBuf,
        #[arg(long)]
        eps_tilde: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn defaults_help() -> String {
    let mut text = format!("Built-in defaults (version {DEFAULTS_VERSION}):\n");
    for kind in ExperimentKind::ALL {
        let c = ExperimentConfig::defaults(kind);
        let mut line = format!("  {:<11} n={} eps={} eps_tilde={}", kind.as_str(), c.n, c.eps, c.eps_tilde);
        for (name, value) in [("nu", c.nu), ("sigma", c.sigma), ("rho", c.rho)] {
            if let Some(v) = value {
                line.push_str(&format!(" {name}={v}"));
            }
        }
        if let Some(d) = c.dim {
            line.push_str(&format!(" dim={d}"));
        }
        text.push_str(&line);
        text.push('\n');
    }
    text.push_str(&format!(
        "  sweep       linreg with nu={SWEEP_NU}, eps grid {:?}\n",
        SWEEP_EPS_GRID
    ));
    text.push_str(&format!(
        "  solver      max_outer_iterations={} objective_rel_tolerance={:e}\n",
        rrm_core::solver::DEFAULT_MAX_OUTER_ITERATIONS,
        rrm_core::solver::DEFAULT_OBJECTIVE_TOLERANCE
    ));
    text
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let help = defaults_help();
    let command = Cli::command()
        .mut_subcommand("experiment", |c| c.after_help(help.clone()))
        .mut_subcommand("sweep", |c| c.after_help(help.clone()));
    let cli = match command
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let message: Vec<&str> = rendered.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            report_error(ErrorKind::Validation.as_str(), &message.join(" "));
            return ExitCode::from(exit_code(ErrorKind::Validation));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind().as_str(), &e.to_string());
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn run(cli: Cli) -> Result<(), RrmError> {
    let file = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fit { model, data, eps_tilde, method, solver, common } => {
            let eps_tilde = eps_tilde.or(file.fit.eps_tilde).unwrap_or(0.0);
            let mut config = RrmConfig::new(eps_tilde)?;
            if let Some(k) = solver.max_outer_iterations.or(file.fit.max_outer_iterations) {
                config = config.with_max_outer_iterations(k);
            }
            if let Some(t) = solver.objective_rel_tolerance.or(file.fit.objective_rel_tolerance) {
                config = config.with_tolerance(t);
            }
            config.validate()?;
            let format = common.format.or(file.format).unwrap_or(Format::Json);
            let table = read_numeric_csv(&data)?;
            let text = match model {
                Model::Linreg => fit_output(&LinearRegression, &table.to_regression()?, method, &config, format)?,
                Model::Logreg => fit_output(
                    &LogisticRegression::default(),
                    &table.to_classification()?,
                    method,
                    &config,
                    format,
                )?,
                Model::Pca => fit_output(&Pca, &table.to_points()?, method, &config, format)?,
                Model::Gaussian => fit_output(&Gaussian, &table.to_points()?, method, &config, format)?,
            };
            emit(common.output.as_deref().or(file.output.as_deref()), &text)
        }
        Command::Experiment { name, mc_runs, overrides, common } => {
            let kind: ExperimentKind = name.parse()?;
            let merged = file.experiment.overrides(kind).merged_with(&overrides.to_overrides());
            let mc = mc_runs.or(file.experiment.mc_runs).unwrap_or(100);
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let format = common.format.or(file.format).unwrap_or(Format::Csv);
            // Resolve before running so that configuration errors surface first.
            ExperimentConfig::resolve(kind, &merged)?;
            let dir = output_dir(common.output.or(file.output))?;
            let report = run_experiment(kind, &merged, mc, seed)?;
            let trials_path = dir.join(format!("{kind}_trials.{}", extension(format)));
            let trials = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_trials_csv(&mut buf, &report.trials)?;
                    String::from_utf8(buf).expect("csv output is UTF-8")
                }
                Format::Json => to_json(&report.trials)?,
            };
            write_file(&trials_path, &trials)?;
            let summary_path = dir.join(format!("{kind}_summary.json"));
            write_file(&summary_path, &(summary_json(&report.summary)? + "\n"))?;
            println!("{}", trials_path.display());
            println!("{}", summary_path.display());
            Ok(())
        }
        Command::Sweep { mc_runs, eps_grid, overrides, common } => {
            let base = file
                .sweep
                .linreg
                .clone()
                .unwrap_or_default()
                .merged_with(&overrides.to_overrides());
            if base.eps.is_some() {
                return Err(RrmError::Config("sweep takes --eps-grid, not --eps".into()));
            }
            let grid = eps_grid.or(file.sweep.eps_grid.clone()).unwrap_or(SWEEP_EPS_GRID.to_vec());
            if grid.is_empty() {
                return Err(RrmError::Config("eps grid is empty".into()));
            }
            let mc = mc_runs.or(file.sweep.mc_runs).unwrap_or(100);
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let format = common.format.or(file.format).unwrap_or(Format::Csv);
            for &eps in &grid {
                let level = ExperimentOverrides {
                    eps: Some(eps),
                    nu: base.nu.or(Some(SWEEP_NU)),
                    ..base.clone()
                };
                ExperimentConfig::resolve(ExperimentKind::Linreg, &level)?;
            }
            let dir = output_dir(common.output.or(file.output))?;
            let report = run_sweep(&base, &grid, mc, seed)?;
            let path = dir.join(format!("sweep.{}", extension(format)));
            let text = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&mut buf, &report.points)?;
                    String::from_utf8(buf).expect("csv output is UTF-8")
                }
                Format::Json => to_json(&report.points)?,
            };
            write_file(&path, &text)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::RealData { data, train_fraction, flips, eps_tilde, common } => {
            let bound = RobustnessBound::new(eps_tilde.or(file.real_data.eps_tilde).unwrap_or(0.15))?;
            let fraction = train_fraction.or(file.real_data.train_fraction).unwrap_or(0.6);
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(RrmError::Config(format!("train fraction must lie in (0, 1), got {fraction}")));
            }
            let flips = flips.or(file.real_data.flips).unwrap_or(40);
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let format = common.format.or(file.format).unwrap_or(Format::Json);
            let table = read_numeric_csv(&data)?.to_classification()?;
            let out = evaluate_label_flips(&table, fraction, flips, bound, seed)?;
            let text = match format {
                Format::Json => to_json(&out)?,
                Format::Csv => {
                    let mut s = String::from("method,tp,fn,fp,tn,accuracy\n");
                    for (name, cm) in [("ERM", &out.erm), ("RRM", &out.rrm)] {
                        s.push_str(&format!(
                            "{name},{},{},{},{},{}\n",
                            cm.tp,
                            cm.fn_,
                            cm.fp,
                            cm.tn,
                            format_value(cm.accuracy)
                        ));
                    }
                    s
                }
            };
            emit(common.output.as_deref().or(file.output.as_deref()), &text)
        }
        Command::InnerSolve { losses, eps_tilde, common } => {
            let bound = RobustnessBound::new(eps_tilde.or(file.inner_solve.eps_tilde).unwrap_or(0.0))?;
            let format = common.format.or(file.format).unwrap_or(Format::Csv);
            let table = read_numeric_csv(&losses)?;
            if table.rows.iter().any(|r| r.len() != 1) {
                return Err(RrmError::Input("expected one loss per line".into()));
            }
            let values: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
            let sol = solve_inner(&values, bound)?;
            let text = match format {
                Format::Json => to_json(&json!({
                    "weights": sol.weights.as_slice(),
                    "lambda_star": finite_or_string(sol.lambda_star),
                    "achieved_entropy": sol.achieved_entropy,
                    "target_entropy": sol.target_entropy,
                }))?,
                Format::Csv => {
                    let weights: Vec<String> = sol.weights.as_slice().iter().map(|w| format_value(*w)).collect();
                    format!(
                        "weights,{}\nlambda_star,{}\nachieved_entropy,{}\ntarget_entropy,{}\n",
                        weights.join(","),
                        format_value(sol.lambda_star),
                        format_value(sol.achieved_entropy),
                        format_value(sol.target_entropy)
                    )
                }
            };
            emit(common.output.as_deref().or(file.output.as_deref()), &text)
        }
    }
}

/// JSON has no infinity; an unbounded multiplier is written as the string "inf".
fn finite_or_string(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

#[derive(Serialize)]
struct FitReport<'a, P: Serialize> {
    model: &'a str,
    method: &'a str,
    params: &'a P,
    weights: &'a [f64],
    losses: &'a [f64],
    lambda_star: serde_json::Value,
    iterations: usize,
    converged: bool,
    trace: &'a [rrm_core::TraceEntry],
}

fn fit_output<F>(family: &F, data: &F::Data, method: FitMethod, config: &RrmConfig, format: Format) -> Result<String, RrmError>
where
    F: ModelFamily,
    F::Params: Serialize,
{
    let (params, weights, lambda_star, iterations, converged, trace) = match method {
        FitMethod::Erm => {
            let p = erm_fit(family, data)?;
            let n = family.num_samples(data);
            (p, rrm_core::Weights::uniform(n), f64::INFINITY, 1, true, Vec::new())
        }
        FitMethod::Rrm => {
            let r = rrm_fit(family, data, config)?;
            (r.params, r.weights, r.lambda_star, r.iterations, r.converged, r.trace)
        }
    };
    let losses = family.losses(&params, data)?;
    let report = FitReport {
        model: family.name(),
        method: if method == FitMethod::Rrm { "RRM" } else { "ERM" },
        params: &params,
        weights: weights.as_slice(),
        losses: &losses,
        lambda_star: finite_or_string(lambda_star),
        iterations,
        converged,
        trace: &trace,
    };
    match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            // Long format: one (field, index, value) triple per number.
            let mut s = String::from("field,index,value\n");
            let params = serde_json::to_value(&params).map_err(|e| RrmError::Numerical(e.to_string()))?;
            let mut flat = Vec::new();
            flatten_numbers(&params, &mut flat);
            for (i, v) in flat.iter().enumerate() {
                s.push_str(&format!("param,{i},{}\n", format_value(*v)));
            }
            for (i, (w, l)) in weights.as_slice().iter().zip(&losses).enumerate() {
                s.push_str(&format!("weight,{i},{}\n", format_value(*w)));
                s.push_str(&format!("loss,{i},{}\n", format_value(*l)));
            }
            s.push_str(&format!("lambda_star,0,{}\n", format_value(lambda_star)));
            s.push_str(&format!("iterations,0,{iterations}\n"));
            s.push_str(&format!("converged,0,{}\n", u8::from(converged)));
            for t in &trace {
                s.push_str(&format!("objective,{},{}\n", t.iteration, format_value(t.objective)));
            }
            Ok(s)
        }
    }
}

fn flatten_numbers(value: &serde_json::Value, out: &mut Vec<f64>) {
    match value {
        serde_json::Value::Number(n) => out.push(n.as_f64().unwrap_or(f64::NAN)),
        serde_json::Value::Array(items) => items.iter().for_each(|v| flatten_numbers(v, out)),
        serde_json::Value::Object(map) => map.values().for_each(|v| flatten_numbers(v, out)),
        _ => {}
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, RrmError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| RrmError::Numerical(e.to_string()))
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn output_dir(flag: Option<PathBuf>) -> Result<PathBuf, RrmError> {
    let dir = flag
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir).map_err(|source| RrmError::Io { path: dir.clone(), source })?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), RrmError> {
    std::fs::write(path, text).map_err(|source| RrmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), RrmError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
