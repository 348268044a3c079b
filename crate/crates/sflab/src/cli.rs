//! Scenario runner: loads a config, executes one experiment, writes a CSV
//! or JSON report, and reports pass/fail through the exit code.
//!
//! Exit codes: `0` all checks pass, `1` a numerical check failed (the
//! report or stderr names it), `2` config/usage error.  Reports are
//! deterministic for a fixed config: randomized sweeps derive from the
//! config seed and all summations run in a fixed order, so re-running
//! byte-reproduces the output.  CSV and JSON carry the same numbers
//! rendered by the same formatter.
//!
//! Per-experiment CSV schemas:
//!
//! | experiment   | columns                                                        |
//! |--------------|----------------------------------------------------------------|
//! | `flow`       | `flow,t0,intervals,margin`                                     |
//! | `ssf`        | `breakpoint,value_right` (the step function `xi(.;A_+,A_-)`)   |
//! | `index`      | `index,flow,gap`                                               |
//! | `trace-check`| `z_re,z_im,lhs_re,lhs_im,rhs_re,rhs_im,residual`               |
//! | `pushnitski` | `lambda,abel_closed,xi_h_discrete`                             |
//! | `doi-check`  | `case,dim,residual`                                            |
//! | `eta`        | `m,eta_closed,eta_zeta,eta_heat`                               |
//! | `chain`      | `spectral_flow,pair_index,morse_trace,xi0,xi0_H_median,det_xi0,pass` |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dirac::{build_dirac, Boundary, Scheme, TimeGrid};
use crate::doi;
use crate::flow::{morse_chain_report, spectral_flow, ChainConfig, FlowConfig};
use crate::oppath::scenario::{from_config, ScenarioConfig};
use crate::oppath::OperatorPath;
use crate::ssf;
use crate::transforms;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Numerical(String),
}

macro_rules! numerical_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical_from!(
    crate::matlin::MatlinError,
    crate::ssf::SsfError,
    crate::dirac::DiracError,
    crate::flow::FlowError,
    crate::doi::DoiError,
    crate::transforms::TransformsError
);

impl From<crate::oppath::PathError> for CliError {
    fn from(e: crate::oppath::PathError) -> Self {
        match e {
            crate::oppath::PathError::Config(msg) => CliError::Config(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Flow,
    Ssf,
    Index,
    TraceCheck,
    Pushnitski,
    DoiCheck,
    Eta,
    Chain,
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "flow" => Ok(Experiment::Flow),
            "ssf" => Ok(Experiment::Ssf),
            "index" => Ok(Experiment::Index),
            "trace-check" => Ok(Experiment::TraceCheck),
            "pushnitski" => Ok(Experiment::Pushnitski),
            "doi-check" => Ok(Experiment::DoiCheck),
            "eta" => Ok(Experiment::Eta),
            "chain" => Ok(Experiment::Chain),
            other => Err(CliError::Config(format!(
                "unknown experiment '{other}'; expected one of flow, ssf, index, trace-check, pushnitski, doi-check, eta, chain"
            ))),
        }
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Flow => "flow",
            Experiment::Ssf => "ssf",
            Experiment::Index => "index",
            Experiment::TraceCheck => "trace-check",
            Experiment::Pushnitski => "pushnitski",
            Experiment::DoiCheck => "doi-check",
            Experiment::Eta => "eta",
            Experiment::Chain => "chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Config(format!(
                "unknown format '{other}'; expected csv or json"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub t: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t: 12.0, n: 400 }
    }
}

/// One run: scenario, experiment, grid, tolerances, output destination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: ScenarioConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_scenario() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "tanh2".to_string(),
        params: Value::Null,
        dim: None,
        support_hint: None,
    }
}

fn default_format() -> Format {
    Format::Csv
}

fn default_seed() -> u64 {
    42
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

/// Finished experiment: tabular data plus the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub pass: bool,
    pub notes: Vec<String>,
    /// Structured extras (e.g. the flow certificate) carried by JSON output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

fn num(v: f64) -> Value {
    json!(v)
}

fn int(v: i64) -> Value {
    json!(v)
}

/// Executes the configured experiment.  Pure computation; writing the
/// report is [`write_report`]'s job.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    let path = from_config(&config.scenario)?;
    match config.experiment {
        Experiment::Flow => run_flow(config, &path),
        Experiment::Ssf => run_ssf(config, &path),
        Experiment::Index => run_index(config, &path),
        Experiment::TraceCheck => run_trace_check(config, &path),
        Experiment::Pushnitski => run_pushnitski(config, &path),
        Experiment::DoiCheck => run_doi_check(config),
        Experiment::Eta => run_eta(config, &path),
        Experiment::Chain => run_chain(config, &path),
    }
}

fn run_flow(_config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let (flow, cert) = spectral_flow(path, &FlowConfig::default())?;
    Ok(RunReport {
        experiment: "flow".into(),
        columns: vec!["flow".into(), "t0".into(), "intervals".into(), "margin".into()],
        rows: vec![vec![
            int(flow),
            num(*cert.t_levels.last().unwrap()),
            int(cert.epsilons.len() as i64),
            num(cert.margin),
        ]],
        pass: cert.margin > 0.0,
        notes: vec![],
        extra: Some(serde_json::to_value(&cert).unwrap()),
    })
}

fn run_ssf(_config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let a_plus = path.asymptote_plus()?;
    let a_minus = path.a_minus();
    let by_counting = ssf::xi_counting(&a_plus, a_minus)?;
    let by_invariance = ssf::xi_invariance(&a_plus, a_minus)?;
    let agree = by_counting.approx_eq(&by_invariance, 1e-8);
    let rows = by_counting
        .breakpoints()
        .iter()
        .zip(by_counting.values()[1..].iter())
        .map(|(&b, &v)| vec![num(b), num(v)])
        .collect();
    Ok(RunReport {
        experiment: "ssf".into(),
        columns: vec!["breakpoint".into(), "value_right".into()],
        rows,
        pass: agree,
        notes: if agree {
            vec![]
        } else {
            vec!["invariance-principle route disagrees with counting".into()]
        },
        extra: Some(by_counting.to_json()),
    })
}

fn run_index(config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let grid = TimeGrid::new(config.grid.t, config.grid.n)?;
    let dd = build_dirac(path, grid, Scheme::Upwind, Boundary::Dirichlet)?;
    let index = dd.numeric_index(config.tol("index_tol_factor", 1e-6))?;
    let (flow, _) = spectral_flow(path, &FlowConfig::default())?;
    let pass = index == flow;
    Ok(RunReport {
        experiment: "index".into(),
        columns: vec!["index".into(), "flow".into(), "gap".into()],
        rows: vec![vec![int(index), int(flow), num(dd.asymptote_gap())]],
        pass,
        notes: if pass {
            vec![]
        } else {
            vec![format!("numeric index {index} disagrees with spectral flow {flow}")]
        },
        extra: None,
    })
}

fn run_trace_check(config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let grid = TimeGrid::new(config.grid.t, config.grid.n)?;
    let dd = build_dirac(path, grid, Scheme::Upwind, Boundary::Dirichlet)?;
    let tol = config.tol("trace", 0.05);
    let zs = [
        Complex64::new(-1.0, 0.0),
        Complex64::new(-4.0, 0.0),
        Complex64::new(-2.0, 1.5),
    ];
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for z in zs {
        let lhs = dd.resolvent_trace_diff(z)?;
        let rhs = ssf::trace_gz_diff(dd.a_plus(), dd.a_minus(), z)? / (2.0 * z);
        let residual = (lhs - rhs).norm();
        worst = worst.max(residual);
        rows.push(vec![
            num(z.re),
            num(z.im),
            num(lhs.re),
            num(lhs.im),
            num(rhs.re),
            num(rhs.im),
            num(residual),
        ]);
    }
    Ok(RunReport {
        experiment: "trace-check".into(),
        columns: vec![
            "z_re".into(),
            "z_im".into(),
            "lhs_re".into(),
            "lhs_im".into(),
            "rhs_re".into(),
            "rhs_im".into(),
            "residual".into(),
        ],
        rows,
        pass: worst < tol,
        notes: if worst < tol {
            vec![]
        } else {
            vec![format!("trace-formula residual {worst:.3e} exceeds {tol:.3e}")]
        },
        extra: None,
    })
}

fn run_pushnitski(config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let grid = TimeGrid::new(config.grid.t, config.grid.n)?;
    let dd = build_dirac(path, grid, Scheme::Upwind, Boundary::Dirichlet)?;
    let a_plus = path.asymptote_plus()?;
    let xi_a = ssf::xi_counting(&a_plus, path.a_minus())?;
    let xi_h = dd.xi_h_counting()?;
    let gap2 = dd.asymptote_gap().powi(2);
    let tol = config.tol("pushnitski", 1e-6);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for k in 1..=40 {
        let lambda = gap2 * k as f64 / 20.0;
        let abel = transforms::abel_forward(&xi_a, lambda)?;
        let discrete = xi_h.value_at(lambda);
        if lambda > 0.1 * gap2 && lambda < 0.9 * gap2 {
            worst = worst.max((abel - discrete).abs());
        }
        rows.push(vec![num(lambda), num(abel), num(discrete)]);
    }
    Ok(RunReport {
        experiment: "pushnitski".into(),
        columns: vec!["lambda".into(), "abel_closed".into(), "xi_h_discrete".into()],
        rows,
        pass: worst <= tol,
        notes: if worst <= tol {
            vec![]
        } else {
            vec![format!(
                "discrete xi_H deviates from the Abel transform by {worst:.3e} inside the gap"
            )]
        },
        extra: None,
    })
}

fn run_doi_check(config: &RunConfig) -> Result<RunReport, CliError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let quad = doi::DoiQuadrature::default_acceptance();
    let tol = config.tol("doi", 1e-6);
    let tol_scalar = config.tol("doi_scalar", 1e-8);

    let mut rows = Vec::new();
    // scalar closed-form case
    let am = crate::matlin::eig_sym(nalgebra::dmatrix![1.0])?;
    let ap = crate::matlin::eig_sym(nalgebra::dmatrix![3.0])?;
    let (_, scalar_res) = doi::g_diff_via_doi_with(&ap, &am, &quad)?;
    rows.push(vec![json!("scalar"), int(1), num(scalar_res)]);

    let mut worst = 0.0f64;
    for case in 0..25 {
        use rand::Rng;
        let n = rng.gen_range(2..=8usize);
        let (ap, am) = crate::sampling::random_pair(&mut rng, n, 2.0, 1.0);
        let (_, residual) = doi::g_diff_via_doi_with(&ap, &am, &quad)?;
        worst = worst.max(residual);
        rows.push(vec![json!(format!("random-{case}")), int(n as i64), num(residual)]);
    }
    let pass = worst < tol && scalar_res < tol_scalar;
    Ok(RunReport {
        experiment: "doi-check".into(),
        columns: vec!["case".into(), "dim".into(), "residual".into()],
        rows,
        pass,
        notes: if pass {
            vec![]
        } else {
            vec![format!(
                "double-operator-integral residual too large: scalar {scalar_res:.3e}, worst random {worst:.3e}"
            )]
        },
        extra: None,
    })
}

fn run_eta(config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let a_plus = path.asymptote_plus()?;
    let xi = ssf::xi_counting(&a_plus, path.a_minus())?;
    let m = config.tol("eta_m", 1.0);
    let closed = transforms::eta_closed(&xi, m)?;
    let zeta_reg = transforms::eta_zeta(&xi, m, 1e-3)?;
    let heat_reg = transforms::eta_heat(&xi, m, 1e-3)?;
    let tol_zeta = config.tol("eta_zeta", 1e-3);
    let tol_heat = config.tol("eta_heat", 5e-2);
    let pass = (zeta_reg - closed).abs() < tol_zeta && (heat_reg - closed).abs() < tol_heat;
    Ok(RunReport {
        experiment: "eta".into(),
        columns: vec![
            "m".into(),
            "eta_closed".into(),
            "eta_zeta".into(),
            "eta_heat".into(),
        ],
        rows: vec![vec![num(m), num(closed), num(zeta_reg), num(heat_reg)]],
        pass,
        notes: if pass {
            vec![]
        } else {
            vec![format!(
                "regularized eta drifted from the closed form: zeta {zeta_reg}, heat {heat_reg}, closed {closed}"
            )]
        },
        extra: None,
    })
}

fn run_chain(config: &RunConfig, path: &OperatorPath) -> Result<RunReport, CliError> {
    let chain_config = ChainConfig {
        det_eps: config.tol("det_eps", 1e-4),
        ..ChainConfig::default()
    };
    let report = morse_chain_report(path, &chain_config)?;
    Ok(RunReport {
        experiment: "chain".into(),
        columns: vec![
            "spectral_flow".into(),
            "pair_index".into(),
            "morse_trace".into(),
            "xi0".into(),
            "xi0_H_median".into(),
            "det_xi0".into(),
            "pass".into(),
        ],
        rows: vec![vec![
            int(report.spectral_flow),
            int(report.pair_index),
            int(report.morse_trace),
            num(report.xi0),
            num(report.xi0_h_median),
            num(report.det_xi0),
            json!(report.all_equal),
        ]],
        pass: report.all_equal,
        notes: if report.all_equal {
            vec![]
        } else {
            vec!["equality chain broken".into()]
        },
        extra: Some(serde_json::to_value(&report).unwrap()),
    })
}

fn render_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV rendering of a report.
pub fn to_csv(report: &RunReport) -> String {
    let mut out = report.columns.join(",");
    out.push('\n');
    for row in &report.rows {
        let line: Vec<String> = row.iter().map(render_cell).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// JSON rendering of a report (carries the same numbers as the CSV).
pub fn to_json(report: &RunReport) -> String {
    let mut doc = serde_json::to_value(report).unwrap();
    doc["rows_as_objects"] = Value::Array(
        report
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (c, v) in report.columns.iter().zip(row) {
                    obj.insert(c.clone(), v.clone());
                }
                Value::Object(obj)
            })
            .collect(),
    );
    serde_json::to_string_pretty(&doc).unwrap()
}

/// Writes the report to `out` (or stdout when absent).
pub fn write_report(
    report: &RunReport,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => to_csv(report),
        Format::Json => to_json(report),
    };
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Runs and writes, mapping the outcome to the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    match run(config) {
        Ok(report) => {
            if let Err(e) = write_report(&report, config.output.as_deref(), config.format) {
                eprintln!("sflab: {e}");
                return 2;
            }
            if report.pass {
                0
            } else {
                for note in &report.notes {
                    eprintln!("sflab: check failed: {note}");
                }
                1
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("sflab: config error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("sflab: numerical failure: {e}");
            1
        }
    }
}
