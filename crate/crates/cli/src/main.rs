//! Command-line frontend: estimate a robust mean from a CSV matrix, generate
//! contaminated samples, or run the benchmark experiments.
//!
//! Exit codes: 0 success, 2 input parse failure, 3 configuration error,
//! 4 internal numeric failure.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use irmean::adaptive::{adaptive_ir_mean, LepskiConfig};
use irmean::estimator::{ir_mean, IRConfig};
use irmean::linalg::{self, SymMatrix};
use irmean::simulate::{
    run_experiment, sample_gac, ContaminationScheme, ContaminationSpec, ExperimentKind,
    ExperimentParams,
};
use irmean::types::{CovarianceSpec, Dataset};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "irmean",
    about = "Iteratively reweighted robust mean estimation",
    long_about = "Estimates the mean of contaminated multivariate data by iterative \
reweighting, generates synthetic contaminated samples, and reproduces the benchmark \
experiments. The command may also come from a JSON config file (--config); explicit \
flags override file values."
)]
struct Cli {
    /// estimate | simulate | bench (may be supplied via --config instead)
    command: Option<String>,

    /// JSON config file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input CSV matrix (headerless, rows = observations)
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output path (JSON report for estimate, CSV for simulate/bench;
    /// estimate prints to stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,

    /// Contamination rate in [0, 1/2)
    #[arg(long)]
    epsilon: Option<f64>,

    /// Covariance mode: known | isotropic | arbitrary
    #[arg(long)]
    cov: Option<String>,

    /// p x p covariance CSV for --cov known (identity when omitted)
    #[arg(long)]
    sigma: Option<PathBuf>,

    /// Adapt to an unknown contamination rate (forbids --epsilon)
    #[arg(long)]
    adaptive: Option<bool>,

    /// Lepski grid ratio in (0, 1)
    #[arg(long)]
    a: Option<f64>,

    /// Lepski tolerance level in (0, 1)
    #[arg(long)]
    delta: Option<f64>,

    /// Lepski radius constant A_5
    #[arg(long)]
    a5: Option<f64>,

    /// Seeds: comma list ("1,2,7") and/or ranges ("0..20")
    #[arg(long)]
    seeds: Option<String>,

    /// Experiment for bench: decay | breakdown | compare
    #[arg(long)]
    experiment: Option<String>,

    /// Contamination scheme: uniform | eigen | none
    #[arg(long)]
    scheme: Option<String>,

    /// Lower bound of the uniform-outlier location
    #[arg(long = "scheme-a")]
    scheme_a: Option<f64>,

    /// Upper bound of the uniform-outlier location
    #[arg(long = "scheme-b")]
    scheme_b: Option<f64>,

    /// Sample size for simulate/bench
    #[arg(long)]
    n: Option<usize>,

    /// Dimension for simulate/bench
    #[arg(long)]
    p: Option<usize>,

    /// Epsilon grid for the breakdown sweep, e.g. "0.05,0.10,0.15"
    #[arg(long = "epsilon-grid")]
    epsilon_grid: Option<String>,

    /// Force the outer iteration count
    #[arg(long = "k-override")]
    k_override: Option<usize>,

    /// Stop outer iterations once the weight certificate fires (known cov)
    #[arg(long = "early-stop")]
    early_stop: Option<bool>,
}

/// The same knobs, as an optional-field JSON document.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    epsilon: Option<f64>,
    cov: Option<String>,
    sigma: Option<PathBuf>,
    adaptive: Option<bool>,
    a: Option<f64>,
    delta: Option<f64>,
    a5: Option<f64>,
    seeds: Option<String>,
    experiment: Option<String>,
    scheme: Option<String>,
    scheme_a: Option<f64>,
    scheme_b: Option<f64>,
    n: Option<usize>,
    p: Option<usize>,
    epsilon_grid: Option<String>,
    k_override: Option<usize>,
    early_stop: Option<bool>,
}

enum CliError {
    Parse(String),
    Config(String),
    Numeric(String),
}

impl CliError {
    fn exit(self) -> ExitCode {
        let (code, kind, msg) = match self {
            CliError::Parse(m) => (2, "parse error", m),
            CliError::Config(m) => (3, "config error", m),
            CliError::Numeric(m) => (4, "numeric error", m),
        };
        eprintln!("irmean: {kind}: {msg}");
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}

fn run(mut cli: Cli) -> Result<(), CliError> {
    if let Some(path) = cli.config.clone() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut cli, file);
    }
    let command = cli
        .command
        .clone()
        .ok_or_else(|| CliError::Config("no command given (or found in --config)".into()))?;
    match command.as_str() {
        "estimate" => cmd_estimate(&cli),
        "simulate" => cmd_simulate(&cli),
        "bench" => cmd_bench(&cli),
        other => Err(CliError::Config(format!(
            "unknown command '{other}' (expected estimate, simulate or bench)"
        ))),
    }
}

fn merge(cli: &mut Cli, file: FileConfig) {
    macro_rules! fill {
        ($($field:ident),*) => {
            $(if cli.$field.is_none() { cli.$field = file.$field; })*
        };
    }
    fill!(
        command, input, output, epsilon, cov, sigma, adaptive, a, delta, a5, seeds, experiment,
        scheme, scheme_a, scheme_b, n, p, epsilon_grid, k_override, early_stop
    );
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo
                .trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad seed range '{part}': {e}")))?;
            let hi: u64 = hi
                .trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad seed range '{part}': {e}")))?;
            seeds.extend(lo..hi);
        } else {
            seeds.push(
                part.parse()
                    .map_err(|e| CliError::Config(format!("bad seed '{part}': {e}")))?,
            );
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Config(format!("no seeds in '{spec}'")));
    }
    Ok(seeds)
}

fn parse_scheme(cli: &Cli) -> Result<ContaminationScheme, CliError> {
    match cli.scheme.as_deref() {
        Some("uniform") => Ok(ContaminationScheme::UniformOutliers {
            a: cli.scheme_a.unwrap_or(4.0),
            b: cli.scheme_b.unwrap_or(10.0),
        }),
        Some("eigen") => Ok(ContaminationScheme::SmallestEigenvector),
        Some("none") | None => Ok(ContaminationScheme::None),
        Some(other) => Err(CliError::Config(format!(
            "unknown scheme '{other}' (expected uniform, eigen or none)"
        ))),
    }
}

fn load_sigma(path: &Path, p: usize) -> Result<SymMatrix, CliError> {
    let rows = io::read_matrix_csv(path).map_err(CliError::Parse)?;
    if rows.len() != p || rows[0].len() != p {
        return Err(CliError::Config(format!(
            "covariance in {} is {}x{}, expected {p}x{p}",
            path.display(),
            rows.len(),
            rows[0].len()
        )));
    }
    let mut m = ndarray::Array2::zeros((p, p));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    SymMatrix::new(m).map_err(|e| CliError::Config(e.to_string()))
}

fn covariance_from(cli: &Cli, p: usize) -> Result<CovarianceSpec, CliError> {
    match cli.cov.as_deref() {
        Some("known") | None => {
            let sigma = match &cli.sigma {
                Some(path) => load_sigma(path, p)?,
                None => SymMatrix::identity(p),
            };
            Ok(CovarianceSpec::Known(sigma))
        }
        Some("isotropic") => Ok(CovarianceSpec::UnknownIsotropic),
        Some("arbitrary") => Ok(CovarianceSpec::UnknownArbitrary),
        Some(other) => Err(CliError::Config(format!(
            "unknown covariance mode '{other}' (expected known, isotropic or arbitrary)"
        ))),
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    estimate: Vec<f64>,
    initial_estimate: Vec<f64>,
    iterations: usize,
    k_budget: usize,
    objective_trace: Vec<f64>,
    stopped_early: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_grid: Option<Vec<f64>>,
}

fn cmd_estimate(cli: &Cli) -> Result<(), CliError> {
    let input = cli
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("estimate requires --input".into()))?;
    let rows = io::read_matrix_csv(input).map_err(CliError::Parse)?;
    let data = Dataset::from_rows(&rows).map_err(|e| CliError::Parse(e.to_string()))?;
    let p = data.p();
    let cov = covariance_from(cli, p)?;
    let adaptive = cli.adaptive.unwrap_or(false);

    let output = if adaptive {
        if cli.epsilon.is_some() {
            return Err(CliError::Config(
                "--adaptive estimates the contamination rate; --epsilon is not allowed".into(),
            ));
        }
        let sigma_op = match &cov {
            CovarianceSpec::Known(sigma) => linalg::lambda_max(sigma, 1e-10).max(1e-12),
            _ => 1.0,
        };
        let cfg = LepskiConfig::new(
            cli.a.unwrap_or(0.9),
            cli.delta.unwrap_or(0.1),
            cli.a5.unwrap_or(1.0),
            sigma_op,
            cov,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let report = adaptive_ir_mean(&data, &cfg).map_err(|e| CliError::Numeric(e.to_string()))?;
        let selected = &report.per_level[report.selected_level - 1];
        EstimateOutput {
            estimate: report.estimate.to_vec(),
            initial_estimate: selected.initial_estimate.clone(),
            iterations: selected.iterations_run,
            k_budget: selected.k_budget,
            objective_trace: selected.objective_trace(),
            stopped_early: selected.stopped_early,
            selected_epsilon: Some(report.selected_epsilon),
            selected_level: Some(report.selected_level),
            epsilon_grid: Some(report.grid.clone()),
        }
    } else {
        let epsilon = cli
            .epsilon
            .ok_or_else(|| CliError::Config("estimate requires --epsilon (or --adaptive)".into()))?;
        let cfg = IRConfig::new(epsilon, cov)
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_early_stop(cli.early_stop.unwrap_or(false))
            .with_k_override(cli.k_override);
        let report = ir_mean(&data, &cfg).map_err(|e| CliError::Numeric(e.to_string()))?;
        EstimateOutput {
            estimate: report.estimate.clone(),
            initial_estimate: report.initial_estimate.clone(),
            iterations: report.iterations_run,
            k_budget: report.k_budget,
            objective_trace: report.objective_trace(),
            stopped_early: report.stopped_early,
            selected_epsilon: None,
            selected_level: None,
            epsilon_grid: None,
        }
    };

    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    match &cli.output {
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateMeta {
    seed: u64,
    n: usize,
    p: usize,
    epsilon: f64,
    epsilon_actual: f64,
    scheme: String,
    true_mean: Vec<f64>,
    inlier_mask: Vec<bool>,
}

fn cmd_simulate(cli: &Cli) -> Result<(), CliError> {
    let n = cli
        .n
        .ok_or_else(|| CliError::Config("simulate requires --n".into()))?;
    let p = cli
        .p
        .ok_or_else(|| CliError::Config("simulate requires --p".into()))?;
    let output = cli
        .output
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate requires --output".into()))?;
    let epsilon = cli.epsilon.unwrap_or(0.0);
    let scheme = parse_scheme(cli)?;
    let spec = ContaminationSpec::new(scheme, epsilon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let seed = match &cli.seeds {
        Some(s) => parse_seeds(s)?[0],
        None => 0,
    };
    let sigma = match &cli.sigma {
        Some(path) => load_sigma(path, p)?,
        None => SymMatrix::identity(p),
    };
    let mu_star = ndarray::Array1::zeros(p);
    let sample = sample_gac(n, p, &mu_star, &sigma, &spec, seed)
        .map_err(|e| CliError::Numeric(e.to_string()))?;

    io::write_matrix_csv(output, &sample.data).map_err(CliError::Config)?;
    let meta = SimulateMeta {
        seed,
        n,
        p,
        epsilon,
        epsilon_actual: sample.epsilon_actual,
        scheme: scheme.label().to_string(),
        true_mean: sample.true_mean.to_vec(),
        inlier_mask: sample.inlier_mask.clone(),
    };
    let meta_path = output.with_extension("meta.json");
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Numeric(e.to_string()))?;
    std::fs::write(&meta_path, json + "\n")
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", meta_path.display())))
}

fn parse_epsilon_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let grid: Result<Vec<f64>, _> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect();
    let grid = grid.map_err(|e| CliError::Config(format!("bad epsilon grid '{spec}': {e}")))?;
    if grid.is_empty() {
        return Err(CliError::Config(format!("empty epsilon grid '{spec}'")));
    }
    Ok(grid)
}

fn cmd_bench(cli: &Cli) -> Result<(), CliError> {
    let experiment = cli
        .experiment
        .as_deref()
        .ok_or_else(|| CliError::Config("bench requires --experiment".into()))?;
    let kind = match experiment {
        "decay" => ExperimentKind::Decay,
        "breakdown" => ExperimentKind::Breakdown,
        "compare" => ExperimentKind::Compare,
        other => {
            return Err(CliError::Config(format!(
                "unknown experiment '{other}' (expected decay, breakdown or compare)"
            )))
        }
    };
    let n = cli
        .n
        .ok_or_else(|| CliError::Config("bench requires --n".into()))?;
    let p = cli
        .p
        .ok_or_else(|| CliError::Config("bench requires --p".into()))?;
    let output = cli
        .output
        .as_ref()
        .ok_or_else(|| CliError::Config("bench requires --output".into()))?;
    if cli.scheme.is_none() {
        return Err(CliError::Config("bench requires --scheme".into()));
    }
    let scheme = parse_scheme(cli)?;
    let seeds = match &cli.seeds {
        Some(s) => parse_seeds(s)?,
        None => (0..10).collect(),
    };

    let mut params = ExperimentParams::new(n, p, cli.epsilon.unwrap_or(0.0), scheme);
    match kind {
        ExperimentKind::Breakdown => {
            let grid = match &cli.epsilon_grid {
                Some(spec) => parse_epsilon_grid(spec)?,
                // default sweep from well below to well past the threshold
                None => (1..=8).map(|k| 0.05 * k as f64).collect(),
            };
            params = params.with_epsilon_grid(grid);
        }
        ExperimentKind::Decay | ExperimentKind::Compare => {
            if cli.epsilon.is_none() {
                return Err(CliError::Config(format!(
                    "{experiment} requires --epsilon"
                )));
            }
        }
    }

    let table = run_experiment(kind, &params, &seeds).map_err(|e| match e {
        irmean::simulate::SimulateError::InvalidParams(m) => CliError::Config(m),
        other => CliError::Numeric(other.to_string()),
    })?;
    io::write_records_csv(output, &table.records).map_err(CliError::Config)?;
    io::write_summary_csv(&io::summary_path(output), &table.cells).map_err(CliError::Config)
}
