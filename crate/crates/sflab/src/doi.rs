//! Double operator integrals: the divided-difference kernels `psi` and
//! `phi`, the sech Fourier representation, the `T_psi` transformer, and the
//! identity `g(A_+) - g(A_-) = T_phi(K)`.
//!
//! The kernel
//!
//! ```text
//! phi(l, m) = (g(l) - g(m)) / ( (l^2+1)^{-1/4} (l - m) (m^2+1)^{-1/4} )
//! ```
//!
//! splits as `phi = psi (1 + (1 - l m) / (kappa(l) kappa(m)))` with
//! `kappa(x) = (x^2+1)^{1/2}` and
//!
//! ```text
//! psi(l, m) = (l^2+1)^{1/4} (m^2+1)^{1/4}
//!             / ((l^2+1)^{1/2} + (m^2+1)^{1/2})
//!           = zeta( log kappa(l) - log kappa(m) ),
//!           zeta(x) = 1 / (e^{x/2} + e^{-x/2}),
//! ```
//!
//! so the Fourier transform of `zeta` turns `T_psi` into an absolutely
//! convergent integral of sandwiched imaginary matrix powers,
//!
//! ```text
//! T_psi(K) = (1/2pi) Int (A_+^2+I)^{is/2} K (A_-^2+I)^{-is/2}
//!            zeta_hat(s) ds,      zeta_hat(s) = pi sech(pi s).
//! ```
//!
//! The closed form `pi sech(pi s)` is a derivation, not a quotation; the
//! tests validate it against a numerical Fourier transform of `zeta`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::matlin::{trace_norm, MatlinError, SymOp};
use crate::quad::composite_gl10;
use crate::ssf::g;

#[derive(Debug, Error)]
pub enum DoiError {
    #[error(transparent)]
    Matlin(#[from] MatlinError),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("quadrature tail bound {bound:.3e} exceeds requested tolerance {tol:.3e}")]
    TailTooLarge { bound: f64, tol: f64 },
}

/// `zeta(x) = 1/(e^{x/2} + e^{-x/2})`.
pub fn zeta(x: f64) -> f64 {
    1.0 / ((x / 2.0).exp() + (-x / 2.0).exp())
}

/// Fourier transform of [`zeta`]: `zeta_hat(s) = pi sech(pi s)`.
pub fn zeta_hat(s: f64) -> f64 {
    let p = std::f64::consts::PI * s;
    std::f64::consts::PI / p.cosh()
}

/// `psi(lambda, mu)`, symmetric with values in `(0, 1/2]`.
pub fn psi_eval(lambda: f64, mu: f64) -> f64 {
    let kl = (lambda * lambda + 1.0).sqrt();
    let km = (mu * mu + 1.0).sqrt();
    kl.sqrt() * km.sqrt() / (kl + km)
}

/// `phi(lambda, mu)`: the direct divided-difference quotient away from the
/// diagonal, the cancellation-free split form
/// `psi (1 + (1 - lambda mu)/(kappa_l kappa_m))` within `1e-6` of it.
pub fn phi_eval(lambda: f64, mu: f64) -> f64 {
    if (lambda - mu).abs() >= 1e-6 {
        let alpha = (lambda * lambda + 1.0).powf(-0.25);
        let beta = (mu * mu + 1.0).powf(-0.25);
        (g(lambda) - g(mu)) / (alpha * (lambda - mu) * beta)
    } else {
        phi_split(lambda, mu)
    }
}

/// The split form of `phi`, exact for all arguments.
pub fn phi_split(lambda: f64, mu: f64) -> f64 {
    let kl = (lambda * lambda + 1.0).sqrt();
    let km = (mu * mu + 1.0).sqrt();
    psi_eval(lambda, mu) * (1.0 + (1.0 - lambda * mu) / (kl * km))
}

/// Quadrature rule for the Fourier representation of `T_psi`: composite
/// 10-point Gauss-Legendre panels on `[-s_max, s_max]` with the
/// `zeta_hat` factor tabulated at the nodes.
#[derive(Debug, Clone)]
pub struct DoiQuadrature {
    s_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    zeta_hat_values: Vec<f64>,
}

impl DoiQuadrature {
    /// Rule with the given truncation and roughly `n_nodes` nodes
    /// (rounded up to whole 10-point panels).
    pub fn new(s_max: f64, n_nodes: usize) -> Self {
        assert!(s_max > 0.0);
        let panels = n_nodes.div_ceil(10).max(1);
        let (nodes, weights) = composite_gl10(-s_max, s_max, panels);
        let zeta_hat_values = nodes.iter().map(|&s| zeta_hat(s)).collect();
        DoiQuadrature {
            s_max,
            nodes,
            weights,
            zeta_hat_values,
        }
    }

    /// The defaults of the acceptance runs: `s_max = 8`, 400 nodes.
    pub fn default_acceptance() -> Self {
        Self::new(8.0, 400)
    }

    /// Chooses `s_max` so the truncation tail sits well under `tol`, with
    /// panel width about `0.4`.
    pub fn for_tolerance(tol: f64) -> Result<Self, DoiError> {
        assert!(tol >= 1e-12);
        // tail bound: 2 Int_{s_max}^inf pi sech(pi s) ds/(2pi) <= sech(pi s_max)
        let s_needed = ((20.0 * std::f64::consts::PI / tol).acosh()) / std::f64::consts::PI;
        let s_max = s_needed.max(8.0);
        let rule = Self::new(s_max, (s_max * 50.0) as usize);
        if rule.tail_bound() > tol {
            return Err(DoiError::TailTooLarge {
                bound: rule.tail_bound(),
                tol,
            });
        }
        Ok(rule)
    }

    /// Crude bound on the neglected tail `2 pi sech(pi s_max)`.
    pub fn tail_bound(&self) -> f64 {
        2.0 * zeta_hat(self.s_max)
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_dims(a_plus: &SymOp, a_minus: &SymOp) -> Result<(), DoiError> {
    if a_plus.dim() != a_minus.dim() {
        Err(DoiError::DimensionMismatch(a_plus.dim(), a_minus.dim()))
    } else {
        Ok(())
    }
}

/// `K = (A_+^2 + I)^{-1/4} (A_+ - A_-) (A_-^2 + I)^{-1/4}`.
pub fn k_operator(a_plus: &SymOp, a_minus: &SymOp) -> Result<DMatrix<f64>, DoiError> {
    check_dims(a_plus, a_minus)?;
    let left = a_plus.apply_fn(|x| (x * x + 1.0).powf(-0.25))?;
    let right = a_minus.apply_fn(|x| (x * x + 1.0).powf(-0.25))?;
    Ok(left * (a_plus.entries() - a_minus.entries()) * right)
}

/// `T_psi(K)`: quadrature sum of
/// `(A_+^2+I)^{is/2} K (A_-^2+I)^{-is/2} zeta_hat(s) / (2 pi)`
/// over the rule's nodes, in fixed node order.
pub fn t_psi(
    a_plus: &SymOp,
    a_minus: &SymOp,
    k: &DMatrix<f64>,
    quad: &DoiQuadrature,
) -> Result<DMatrix<f64>, DoiError> {
    check_dims(a_plus, a_minus)?;
    if k.nrows() != a_plus.dim() || k.ncols() != a_minus.dim() {
        return Err(DoiError::DimensionMismatch(k.nrows(), a_plus.dim()));
    }
    let k_c: crate::matlin::CMatrix = k.map(|x| Complex64::new(x, 0.0));
    let n = a_plus.dim();
    let mut acc = crate::matlin::CMatrix::zeros(n, n);
    for i in 0..quad.len() {
        let s = quad.nodes[i];
        let w = quad.weights[i] * quad.zeta_hat_values[i] / (2.0 * std::f64::consts::PI);
        let left = a_plus.apply_fn_complex(|x| {
            Complex64::new(0.0, 0.5 * s * (x * x + 1.0).ln()).exp()
        })?;
        let right = a_minus.apply_fn_complex(|x| {
            Complex64::new(0.0, -0.5 * s * (x * x + 1.0).ln()).exp()
        })?;
        acc += (&left * &k_c * &right) * Complex64::new(w, 0.0);
    }
    // psi is real and the rule is symmetric in s, so the imaginary part is
    // pure roundoff
    Ok(acc.map(|c| c.re))
}

/// Assembles `T_phi(K) = T_psi(K) + kappa_+^{-1} T_psi(K) kappa_-^{-1}
/// - g(A_+) T_psi(K) g(A_-)` and returns it together with the trace-norm
/// residual against `g(A_+) - g(A_-)`.
pub fn g_diff_via_doi(
    a_plus: &SymOp,
    a_minus: &SymOp,
    tol: f64,
) -> Result<(DMatrix<f64>, f64), DoiError> {
    assert!(tol >= 1e-10, "tolerances below 1e-10 are not reachable");
    let quad = DoiQuadrature::for_tolerance(tol)?;
    g_diff_via_doi_with(a_plus, a_minus, &quad)
}

/// [`g_diff_via_doi`] with an explicit quadrature rule.
pub fn g_diff_via_doi_with(
    a_plus: &SymOp,
    a_minus: &SymOp,
    quad: &DoiQuadrature,
) -> Result<(DMatrix<f64>, f64), DoiError> {
    check_dims(a_plus, a_minus)?;
    let k = k_operator(a_plus, a_minus)?;
    let t = t_psi(a_plus, a_minus, &k, quad)?;
    let kappa_inv_plus = a_plus.apply_fn(|x| (x * x + 1.0).powf(-0.5))?;
    let kappa_inv_minus = a_minus.apply_fn(|x| (x * x + 1.0).powf(-0.5))?;
    let g_plus = a_plus.apply_fn(g)?;
    let g_minus = a_minus.apply_fn(g)?;
    let t_phi = &t + &kappa_inv_plus * &t * &kappa_inv_minus - &g_plus * &t * &g_minus;
    let residual = trace_norm(&(&t_phi - (&g_plus - &g_minus)));
    Ok((t_phi, residual))
}
