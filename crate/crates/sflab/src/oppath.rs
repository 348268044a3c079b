//! Operator paths `A(t) = A_- + B(t)` with asymptote construction, spectral
//! truncation, and hypothesis diagnostics.
//!
//! A path is described by its left asymptote `A_-`, evaluators for `B(t)` and
//! `B'(t)`, an optional explicit `B(+infinity)`, and a decay hint `T` beyond
//! which `||B'(t)||` is negligible.  The normalization is `B(-infinity) = 0`,
//! so `A_+ = A_- + B(+infinity)` and `B(t)` is the integral of `B'` from
//! `-infinity` to `t`; [`OperatorPath::hypothesis_report`] measures how well
//! a concrete path honors those relations.
//!
//! The [`scenario`] submodule ships the built-in model paths used by the
//! integration tests and the CLI (`tanh2`, `tanh-mixed`, `rot2`,
//! `lattice1d`), plus a JSON config loader for custom polynomial-in-tanh
//! paths.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::matlin::{eig_sym, MatlinError, SymOp};
use crate::quad::{adaptive_simpson, trapezoid_on_grid};

const EVAL_SYM_TOL: f64 = 1e-10;
/// Absolute tolerance of the asymptote quadrature.
const ASYMPTOTE_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PathError {
    #[error(transparent)]
    Matlin(#[from] MatlinError),
    #[error("evaluator output at t = {t} is not symmetric: defect {defect:.3e} > {tolerance:.3e}")]
    NonSymmetricEvaluator { t: f64, defect: f64, tolerance: f64 },
    #[error("evaluator output at t = {t} has dimension {got}, path dimension is {expected}")]
    DimensionMismatch { t: f64, expected: usize, got: usize },
    #[error("tail of the B' integral does not decay beyond the support hint: estimated magnitude {magnitude:.3e}")]
    DivergentTail { magnitude: f64 },
    #[error("scenario config error: {0}")]
    Config(String),
}

type Evaluator = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// The path `t -> A(t) = A_- + B(t)` of real symmetric matrices.
#[derive(Clone)]
pub struct OperatorPath {
    a_minus: SymOp,
    b_at: Evaluator,
    bprime_at: Evaluator,
    b_plus: Option<DMatrix<f64>>,
    support_hint: f64,
}

/// Defect report for the standing hypotheses on a path.
///
/// All entries are nonnegative; an honest path keeps every defect at the
/// level of quadrature noise.  The weak-measurability clause of the
/// continuum hypothesis has no finite-dimensional content and is omitted.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisReport {
    /// max over the sample grid of the asymmetry of `B(t)`.
    pub sym_defect_b: f64,
    /// max over the sample grid of the asymmetry of `B'(t)`.
    pub sym_defect_bprime: f64,
    /// quadrature estimate of `Int ||B'(t) (|A_-| + I)^{-1}||_tr dt`.
    pub trace_integral: f64,
    /// max over the grid of `||B(t) - Int_{-inf}^t B'(s) ds||_F`.
    pub consistency_defect: f64,
    /// `||A_+ - A_- - Int B'||_F`.
    pub asymptote_gap: f64,
}

impl OperatorPath {
    /// Builds a path from its parts.  `b_at`/`bprime_at` must be pure
    /// functions of `t` returning `dim x dim` matrices.
    pub fn new(
        a_minus: SymOp,
        b_at: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        bprime_at: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        b_plus: Option<DMatrix<f64>>,
        support_hint: f64,
    ) -> Self {
        OperatorPath {
            a_minus,
            b_at: Arc::new(b_at),
            bprime_at: Arc::new(bprime_at),
            b_plus,
            support_hint,
        }
    }

    pub fn dim(&self) -> usize {
        self.a_minus.dim()
    }

    pub fn a_minus(&self) -> &SymOp {
        &self.a_minus
    }

    pub fn support_hint(&self) -> f64 {
        self.support_hint
    }

    /// Raw evaluator output `B(t)` (dimension-checked, symmetry unchecked).
    pub fn b_at(&self, t: f64) -> Result<DMatrix<f64>, PathError> {
        self.checked_eval(&self.b_at, t)
    }

    /// Raw evaluator output `B'(t)`.
    pub fn bprime_at(&self, t: f64) -> Result<DMatrix<f64>, PathError> {
        self.checked_eval(&self.bprime_at, t)
    }

    fn checked_eval(&self, f: &Evaluator, t: f64) -> Result<DMatrix<f64>, PathError> {
        let m = f(t);
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(PathError::DimensionMismatch {
                t,
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        Ok(m)
    }

    /// `A(t) = A_- + B(t)` with its spectral decomposition.
    ///
    /// Rejects evaluator output whose asymmetry exceeds `1e-10` (relative to
    /// the entry scale).
    pub fn a_of(&self, t: f64) -> Result<SymOp, PathError> {
        let b = self.b_at(t)?;
        let defect = sym_defect(&b);
        let tol = EVAL_SYM_TOL * (1.0 + b.norm());
        if defect > tol {
            return Err(PathError::NonSymmetricEvaluator {
                t,
                defect,
                tolerance: tol,
            });
        }
        let sym = (&b + b.transpose()) * 0.5;
        Ok(eig_sym(self.a_minus.entries() + sym)?)
    }

    /// The right asymptote `A_+ = A_- + B(+infinity)`.
    ///
    /// Uses `b_plus` when supplied; otherwise integrates `B'` over
    /// `[-T, T]` (adaptive Simpson, absolute tolerance `1e-10`) with `T` the
    /// support hint, after checking that `||B'||` actually decays past `T`.
    pub fn asymptote_plus(&self) -> Result<SymOp, PathError> {
        let b_inf = match &self.b_plus {
            Some(b) => b.clone(),
            None => self.integrate_bprime()?,
        };
        let sym = (&b_inf + b_inf.transpose()) * 0.5;
        Ok(eig_sym(self.a_minus.entries() + sym)?)
    }

    fn integrate_bprime(&self) -> Result<DMatrix<f64>, PathError> {
        let t_max = self.support_hint;
        let at_t = self
            .bprime_at(t_max)?
            .norm()
            .max(self.bprime_at(-t_max)?.norm());
        let at_2t = self
            .bprime_at(2.0 * t_max)?
            .norm()
            .max(self.bprime_at(-2.0 * t_max)?.norm());
        if at_2t > 1e-10 && at_2t > 0.5 * at_t {
            return Err(PathError::DivergentTail {
                magnitude: 2.0 * t_max * at_2t,
            });
        }
        let f = self.bprime_at.clone();
        Ok(adaptive_simpson(
            &move |s| f(s),
            -t_max,
            t_max,
            ASYMPTOTE_QUAD_TOL,
        ))
    }

    /// Conjugates the whole path by the spectral projection
    /// `P_n = E_{A_-}((-n, n))`, staying on the full space.
    ///
    /// The truncated path has `A_- -> P_n A_- P_n` and both evaluators
    /// replaced by `t -> P_n X(t) P_n`; for `n` above the spectral radius of
    /// `A_-` the path is unchanged.
    pub fn truncate(&self, n_level: f64) -> OperatorPath {
        // full-rank truncation must be the identity exactly, not a
        // numerically reassembled projection
        let p = if self.a_minus.spectrum().iter().all(|l| l.abs() < n_level) {
            DMatrix::identity(self.dim(), self.dim())
        } else {
            self.a_minus.spectral_projection(|l| l.abs() < n_level)
        };
        let a_minus_trunc = eig_sym(&p * self.a_minus.entries() * &p)
            .expect("projection conjugation stays symmetric");
        let b = self.b_at.clone();
        let bp = self.bprime_at.clone();
        let p_b = p.clone();
        let p_bp = p.clone();
        OperatorPath {
            a_minus: a_minus_trunc,
            b_at: Arc::new(move |t| &p_b * b(t) * &p_b),
            bprime_at: Arc::new(move |t| &p_bp * bp(t) * &p_bp),
            b_plus: self.b_plus.as_ref().map(|bpl| &p * bpl * &p),
            support_hint: self.support_hint,
        }
    }

    /// Hypothesis diagnostics over a sample grid.  Defects are reported,
    /// never raised as errors.
    pub fn hypothesis_report(&self, sample_grid: &[f64]) -> Result<HypothesisReport, PathError> {
        assert!(!sample_grid.is_empty(), "sample grid must be nonempty");
        let mut grid: Vec<f64> = sample_grid.to_vec();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let weight = self
            .a_minus
            .apply_fn(|l| (l.abs() + 1.0).recip())
            .expect("finite on the spectrum");

        let mut sym_b = 0.0f64;
        let mut sym_bp = 0.0f64;
        let mut tr_vals = Vec::with_capacity(grid.len());
        for &t in &grid {
            let b = self.b_at(t)?;
            let bp = self.bprime_at(t)?;
            sym_b = sym_b.max(sym_defect(&b));
            sym_bp = sym_bp.max(sym_defect(&bp));
            tr_vals.push(crate::matlin::trace_norm(&(&bp * &weight)));
        }
        let trace_integral = trapezoid_on_grid(&grid, &tr_vals);

        // B(t) against the running integral of B', accumulated left to right
        // from a point far inside the flat region.
        let lo = -(self.support_hint + 8.0).max(grid[0].abs() + 8.0);
        let bp_eval = self.bprime_at.clone();
        let mut acc = adaptive_simpson(&move |s| bp_eval(s), lo, grid[0], ASYMPTOTE_QUAD_TOL);
        let mut consistency = (self.b_at(grid[0])? - &acc).norm();
        for w in grid.windows(2) {
            let bp_eval = self.bprime_at.clone();
            acc += adaptive_simpson(&move |s| bp_eval(s), w[0], w[1], ASYMPTOTE_QUAD_TOL);
            consistency = consistency.max((self.b_at(w[1])? - &acc).norm());
        }

        let a_plus = self.asymptote_plus()?;
        let bp_eval = self.bprime_at.clone();
        let hint = self.support_hint;
        let int_bprime = adaptive_simpson(&move |s| bp_eval(s), -hint, hint, ASYMPTOTE_QUAD_TOL);
        let asymptote_gap = (a_plus.entries() - self.a_minus.entries() - int_bprime).norm();

        Ok(HypothesisReport {
            sym_defect_b: sym_b,
            sym_defect_bprime: sym_bp,
            trace_integral,
            consistency_defect: consistency,
            asymptote_gap,
        })
    }
}

fn sym_defect(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Built-in model paths and the JSON scenario loader.
pub mod scenario {
    use super::*;
    use serde::{Deserialize, Serialize};

    /// `A(t) = tanh(t) I_2`: asymptotes `-I_2` and `+I_2`, two eigenvalues
    /// crossing zero upward.  Spectral flow 2.
    pub fn tanh2() -> OperatorPath {
        let a_minus = eig_sym(-DMatrix::identity(2, 2)).unwrap();
        OperatorPath::new(
            a_minus,
            |t: f64| DMatrix::identity(2, 2) * (1.0 + t.tanh()),
            |t: f64| DMatrix::identity(2, 2) * t.cosh().powi(-2),
            Some(DMatrix::identity(2, 2) * 2.0),
            12.0,
        )
    }

    /// `A(t) = diag(tanh t, -tanh t)`: one up-crossing cancels one
    /// down-crossing.  Spectral flow 0.
    pub fn tanh_mixed() -> OperatorPath {
        let a_minus = eig_sym(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 1.0])).unwrap();
        let b = |t: f64| {
            DMatrix::from_diagonal(&nalgebra::dvector![1.0 + t.tanh(), -(1.0 + t.tanh())])
        };
        let bp = |t: f64| {
            let s = t.cosh().powi(-2);
            DMatrix::from_diagonal(&nalgebra::dvector![s, -s])
        };
        OperatorPath::new(
            a_minus,
            b,
            bp,
            Some(DMatrix::from_diagonal(&nalgebra::dvector![2.0, -2.0])),
            12.0,
        )
    }

    /// Eigenvector rotation with frozen spectrum `diag(d1, d2)`: the frame
    /// turns by `theta_max` as `t` runs over the line, no eigenvalue moves.
    /// Spectral flow 0 whenever `0` is not an eigenvalue.
    pub fn rot2(d1: f64, d2: f64, theta_max: f64) -> OperatorPath {
        let d = DMatrix::from_diagonal(&nalgebra::dvector![d1, d2]);
        let a_minus = eig_sym(d.clone()).unwrap();
        let d_b = d.clone();
        let b = move |t: f64| {
            let theta = theta_max * 0.5 * (1.0 + t.tanh());
            rotate(&d_b, theta) - &d_b
        };
        let d_bp = d.clone();
        let bp = move |t: f64| {
            let theta = theta_max * 0.5 * (1.0 + t.tanh());
            let rate = theta_max * 0.5 * t.cosh().powi(-2);
            let (s, c) = theta.sin_cos();
            let r = nalgebra::dmatrix![c, -s; s, c];
            let rp = nalgebra::dmatrix![-s, -c; c, -s];
            (&rp * &d_bp * r.transpose() + &r * &d_bp * rp.transpose()) * rate
        };
        let b_plus = rotate(&d, theta_max) - &d;
        OperatorPath::new(a_minus, b, bp, Some(b_plus), 12.0)
    }

    fn rotate(d: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        let r = nalgebra::dmatrix![c, -s; s, c];
        &r * d * r.transpose()
    }

    /// Discrete chain analog of a Schroedinger path: on `k` sites,
    /// `A_- = (L^T L)^p + V_- + eps I` with `L^T L` the 1-D discrete
    /// Laplacian, `V_-` a Gaussian on-site potential, perturbed by a
    /// spatially decaying diagonal potential switched on like `tanh`.
    pub fn lattice1d(sites: usize, p: u32, eps: f64, coupling: f64) -> OperatorPath {
        let lap = discrete_laplacian(sites);
        let mut lap_p = DMatrix::identity(sites, sites);
        for _ in 0..p {
            lap_p = &lap_p * &lap;
        }
        let center = (sites as f64 - 1.0) / 2.0;
        let v_minus = DMatrix::from_fn(sites, sites, |i, j| {
            if i == j {
                let x = i as f64 - center;
                (-(x / (sites as f64 / 6.0)).powi(2)).exp()
            } else {
                0.0
            }
        });
        let a_minus = eig_sym(lap_p + v_minus + DMatrix::identity(sites, sites) * eps).unwrap();
        let w = DMatrix::from_fn(sites, sites, |i, j| {
            if i == j {
                let x = i as f64 - center;
                coupling / (1.0 + x * x)
            } else {
                0.0
            }
        });
        let w_b = w.clone();
        let w_bp = w.clone();
        let b = move |t: f64| &w_b * (0.5 * (1.0 + t.tanh()));
        let bp = move |t: f64| &w_bp * (0.5 * t.cosh().powi(-2));
        OperatorPath::new(a_minus, b, bp, Some(w), 12.0)
    }

    /// `lattice1d` with the parameters used by the acceptance runs.
    pub fn lattice1d_default() -> OperatorPath {
        lattice1d(32, 1, 0.5, 1.0)
    }

    fn discrete_laplacian(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// JSON scenario description consumed by the CLI.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ScenarioConfig {
        pub scenario: String,
        #[serde(default)]
        pub params: serde_json::Value,
        #[serde(default)]
        pub dim: Option<usize>,
        #[serde(default)]
        pub support_hint: Option<f64>,
    }

    #[derive(Debug, Deserialize)]
    struct Rot2Params {
        #[serde(default = "default_d1")]
        d1: f64,
        #[serde(default = "default_d2")]
        d2: f64,
        #[serde(default = "default_theta")]
        theta_max: f64,
    }

    fn default_d1() -> f64 {
        -1.0
    }
    fn default_d2() -> f64 {
        2.0
    }
    fn default_theta() -> f64 {
        std::f64::consts::FRAC_PI_2
    }

    #[derive(Debug, Deserialize)]
    struct LatticeParams {
        #[serde(default = "default_p")]
        p: u32,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_coupling")]
        coupling: f64,
    }

    fn default_p() -> u32 {
        1
    }
    fn default_eps() -> f64 {
        0.5
    }
    fn default_coupling() -> f64 {
        1.0
    }

    #[derive(Debug, Deserialize)]
    struct CustomParams {
        a_minus: Vec<Vec<f64>>,
        /// Coefficient matrices `C_k` of `B(t) = sum_k C_k tanh(t)^k`.
        b_poly: Vec<Vec<Vec<f64>>>,
    }

    /// Instantiates a path from a config document.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<OperatorPath, PathError> {
        let mut path = match cfg.scenario.as_str() {
            "tanh2" => tanh2(),
            "tanh-mixed" => tanh_mixed(),
            "rot2" => {
                let p: Rot2Params = parse_params(&cfg.params)?;
                rot2(p.d1, p.d2, p.theta_max)
            }
            "lattice1d" => {
                let p: LatticeParams = parse_params(&cfg.params)?;
                lattice1d(cfg.dim.unwrap_or(32), p.p, p.eps, p.coupling)
            }
            "custom" => {
                let p: CustomParams = parse_params(&cfg.params)?;
                custom_tanh_poly(p)?
            }
            other => {
                return Err(PathError::Config(format!(
                    "unknown scenario '{other}' (expected tanh2, tanh-mixed, rot2, lattice1d, custom)"
                )))
            }
        };
        if let Some(dim) = cfg.dim {
            if dim != path.dim() {
                return Err(PathError::Config(format!(
                    "config dim {dim} does not match scenario dimension {}",
                    path.dim()
                )));
            }
        }
        if let Some(hint) = cfg.support_hint {
            if hint <= 0.0 {
                return Err(PathError::Config("support_hint must be positive".into()));
            }
            path.support_hint = hint;
        }
        Ok(path)
    }

    fn parse_params<T: serde::de::DeserializeOwned>(
        v: &serde_json::Value,
    ) -> Result<T, PathError> {
        let v = if v.is_null() {
            serde_json::json!({})
        } else {
            v.clone()
        };
        serde_json::from_value(v).map_err(|e| PathError::Config(e.to_string()))
    }

    fn custom_tanh_poly(p: CustomParams) -> Result<OperatorPath, PathError> {
        let a_minus_m = matrix_from_rows(&p.a_minus)?;
        let n = a_minus_m.nrows();
        let coeffs: Vec<DMatrix<f64>> = p
            .b_poly
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<_, _>>()?;
        for c in &coeffs {
            if c.nrows() != n {
                return Err(PathError::Config(
                    "b_poly coefficient dimension differs from a_minus".into(),
                ));
            }
            if sym_defect(c) > 1e-12 * (1.0 + c.norm()) {
                return Err(PathError::Config(
                    "b_poly coefficients must be symmetric".into(),
                ));
            }
        }
        // B(-infinity) = sum_k C_k (-1)^k must vanish.
        let mut at_minus_inf = DMatrix::zeros(n, n);
        for (k, c) in coeffs.iter().enumerate() {
            at_minus_inf += c * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        if at_minus_inf.norm() > 1e-10 * (1.0 + a_minus_m.norm()) {
            return Err(PathError::Config(
                "b_poly violates the B(-infinity) = 0 normalization".into(),
            ));
        }
        let mut at_plus_inf = DMatrix::zeros(n, n);
        for c in &coeffs {
            at_plus_inf += c;
        }
        let a_minus = eig_sym(a_minus_m)?;
        let coeffs_b = coeffs.clone();
        let nb = n;
        let b = move |t: f64| {
            let u = t.tanh();
            let mut acc = DMatrix::zeros(nb, nb);
            let mut pow = 1.0;
            for c in &coeffs_b {
                acc += c * pow;
                pow *= u;
            }
            acc
        };
        let bp = move |t: f64| {
            let u = t.tanh();
            let du = t.cosh().powi(-2);
            let mut acc = DMatrix::zeros(n, n);
            let mut pow = 1.0;
            for (k, c) in coeffs.iter().enumerate() {
                if k >= 1 {
                    acc += c * (k as f64 * pow * du);
                    pow *= u;
                }
            }
            acc
        };
        Ok(OperatorPath::new(a_minus, b, bp, Some(at_plus_inf), 12.0))
    }

    fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, PathError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(PathError::Config("matrix rows must be square".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}
