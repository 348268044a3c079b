//! Spectral shift functions for a pair `(A_+, A_-)` of symmetric matrices.
//!
//! For matrices, the spectral shift function is the integer-valued step
//! function
//!
//! ```text
//! xi(nu) = #{ eigenvalues of A_- <= nu } - #{ eigenvalues of A_+ <= nu },
//! ```
//!
//! compactly supported and right-continuous.  This module computes it three
//! ways and provides the trace-formula residuals that tie them together:
//!
//! * [`xi_counting`] - directly from the counting functions;
//! * [`xi_invariance`] - through the invariance principle: count for the
//!   pair `(g(A_+), g(A_-))` with `g(x) = x (x^2 + 1)^{-1/2}`, then pull the
//!   breakpoints back through `g^{-1}`;
//! * [`xi_from_det`] - as `pi^{-1} Im ln det((A_+ - z)(A_- - z)^{-1})` with
//!   the branch of the logarithm continued down from `+i inf`, where it is
//!   normalized to vanish ([`logdet_branch`]).
//!
//! The residual functions ([`krein_residual`], [`gz_trace_residual`],
//! [`dz_trace_residual`], [`resolvent_trace_residual`]) evaluate both sides
//! of the corresponding trace formulas by deliberately independent routes
//! (spectral sums versus quadrature against `xi`), so a small residual is
//! evidence, not tautology.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::matlin::{log_det, wrap_principal, CMatrix, MatlinError, SymOp};
use crate::quad::adaptive_simpson;

#[derive(Debug, Error)]
pub enum SsfError {
    #[error(transparent)]
    Matlin(#[from] MatlinError),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("z = {z} lies on the spectrum of A_+ or A_- (distance {distance:.3e})")]
    OnSpectrum { z: Complex64, distance: f64 },
    #[error("target must lie in the open upper half-plane, got {z}")]
    NotUpperHalfPlane { z: Complex64 },
    #[error("branch walk exceeded {max_steps} steps near the real axis")]
    BranchWalkStalled { max_steps: usize },
    #[error("breakpoint |omega| >= 1 cannot be pulled back through g: {omega}")]
    BreakpointOutOfRange { omega: f64 },
}

/// Right-open piecewise-constant function with finitely many breakpoints.
///
/// `values[k]` is the value on `[breakpoints[k-1], breakpoints[k])`;
/// `values[0]` rules left of the first breakpoint and `values[m]` right of
/// the last.  Adjacent equal values are merged on construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function, merging adjacent equal values.
    ///
    /// Requires strictly ascending breakpoints and `values.len() ==
    /// breakpoints.len() + 1`.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), breakpoints.len() + 1, "values/breakpoints mismatch");
        assert!(
            breakpoints.windows(2).all(|w| w[0] < w[1]),
            "breakpoints must be strictly ascending"
        );
        let mut bp = Vec::with_capacity(breakpoints.len());
        let mut vals = vec![values[0]];
        for (b, v) in breakpoints.iter().zip(values[1..].iter()) {
            if *v != *vals.last().unwrap() {
                bp.push(*b);
                vals.push(*v);
            }
        }
        StepFunction {
            breakpoints: bp,
            values: vals,
        }
    }

    /// The identically-zero function.
    pub fn zero() -> Self {
        StepFunction {
            breakpoints: vec![],
            values: vec![0.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x` (right-continuous: at a breakpoint the value to the
    /// right applies).
    pub fn value_at(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        self.values[idx]
    }

    /// True when the function vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Piece list `(lo, hi, value)` over the support, excluding the two
    /// unbounded end pieces (whose values are `values[0]` and `values[m]`).
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        (1..self.values.len().saturating_sub(1))
            .map(|k| (self.breakpoints[k - 1], self.breakpoints[k], self.values[k]))
            .collect()
    }

    /// `Int f'(nu) xi(nu) dnu` with the integral of `weight` evaluated per
    /// piece by the supplied integrator.
    pub fn integrate_against(&self, mut piece_integral: impl FnMut(f64, f64) -> f64) -> f64 {
        self.pieces()
            .iter()
            .map(|&(lo, hi, v)| v * piece_integral(lo, hi))
            .sum()
    }

    /// Complex-valued variant of [`Self::integrate_against`].
    pub fn integrate_against_c(
        &self,
        mut piece_integral: impl FnMut(f64, f64) -> Complex64,
    ) -> Complex64 {
        self.pieces()
            .iter()
            .map(|&(lo, hi, v)| piece_integral(lo, hi) * v)
            .sum()
    }

    /// Pointwise negation.
    pub fn negate(&self) -> StepFunction {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Structural comparison: identical values, breakpoints within `tol`.
    pub fn approx_eq(&self, other: &StepFunction, tol: f64) -> bool {
        self.values == other.values
            && self.breakpoints.len() == other.breakpoints.len()
            && self
                .breakpoints
                .iter()
                .zip(&other.breakpoints)
                .all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs().powi(3)))
    }

    /// CSV rows `breakpoint,value_right`, one per breakpoint.  The value
    /// left of the first breakpoint is `values()[0]` (zero for any spectral
    /// shift function of a matrix pair).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("breakpoint,value_right\n");
        for (b, v) in self.breakpoints.iter().zip(self.values[1..].iter()) {
            out.push_str(&format!("{b:.17e},{v:.17e}\n"));
        }
        out
    }

    /// JSON mirror of the CSV serialization, carrying the full arrays.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "breakpoints": self.breakpoints,
            "values": self.values,
        })
    }
}

fn check_dims(a_plus: &SymOp, a_minus: &SymOp) -> Result<(), SsfError> {
    if a_plus.dim() != a_minus.dim() {
        Err(SsfError::DimensionMismatch(a_plus.dim(), a_minus.dim()))
    } else {
        Ok(())
    }
}

/// Spectral shift function by eigenvalue counting:
/// `xi(nu) = counting(A_-, nu) - counting(A_+, nu)`.
pub fn xi_counting(a_plus: &SymOp, a_minus: &SymOp) -> Result<StepFunction, SsfError> {
    check_dims(a_plus, a_minus)?;
    xi_from_spectra(a_plus.spectrum().as_slice(), a_minus.spectrum().as_slice())
}

/// Builds the counting-difference step function from two sorted spectra.
pub(crate) fn xi_from_spectra(plus: &[f64], minus: &[f64]) -> Result<StepFunction, SsfError> {
    // events: +1 at eigenvalues of A_-, -1 at eigenvalues of A_+
    let mut events: Vec<(f64, f64)> = minus
        .iter()
        .map(|&l| (l, 1.0))
        .chain(plus.iter().map(|&l| (l, -1.0)))
        .collect();
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut breakpoints = Vec::new();
    let mut values = vec![0.0];
    let mut level = 0.0;
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        let mut delta = 0.0;
        while i < events.len() && events[i].0 == x {
            delta += events[i].1;
            i += 1;
        }
        if delta != 0.0 {
            level += delta;
            breakpoints.push(x);
            values.push(level);
        }
    }
    Ok(StepFunction::new(breakpoints, values))
}

/// The function `g(x) = x (x^2 + 1)^{-1/2}` used by the invariance
/// principle.
pub fn g(x: f64) -> f64 {
    x / (x * x + 1.0).sqrt()
}

/// Inverse of [`g`] on `(-1, 1)`.
pub fn g_inv(omega: f64) -> f64 {
    omega / (1.0 - omega * omega).sqrt()
}

/// `g_z(x) = x (x^2 - z)^{-1/2}` with the principal square root.
pub fn g_z(x: f64, z: Complex64) -> Complex64 {
    Complex64::new(x, 0.0) / (Complex64::new(x * x, 0.0) - z).sqrt()
}

/// Spectral shift function through the invariance principle:
/// count for the pair `(g(A_+), g(A_-))`, then pull breakpoints back through
/// `g^{-1}(omega) = omega (1 - omega^2)^{-1/2}`.
///
/// Coincides with [`xi_counting`] because `g` is strictly increasing; the
/// two routes share no code past this comment.
pub fn xi_invariance(a_plus: &SymOp, a_minus: &SymOp) -> Result<StepFunction, SsfError> {
    check_dims(a_plus, a_minus)?;
    let g_plus = SymOp::new(a_plus.apply_fn(g)?)?;
    let g_minus = SymOp::new(a_minus.apply_fn(g)?)?;
    let in_omega = xi_from_spectra(
        g_plus.spectrum().as_slice(),
        g_minus.spectrum().as_slice(),
    )?;
    let mut pulled = Vec::with_capacity(in_omega.breakpoints().len());
    for &omega in in_omega.breakpoints() {
        if omega.abs() >= 1.0 {
            return Err(SsfError::BreakpointOutOfRange { omega });
        }
        pulled.push(g_inv(omega));
    }
    Ok(StepFunction::new(pulled, in_omega.values().to_vec()))
}

/// Sum of principal logs `sum_j [Log(l_j^+ - z) - Log(l_j^- - z)]`.
///
/// Exponentiating gives the perturbation determinant exactly; the imaginary
/// part is only defined modulo `2 pi`.
fn logdet_ratio_principal_sum(a_plus: &SymOp, a_minus: &SymOp, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &l in a_plus.spectrum().iter() {
        acc += (Complex64::new(l, 0.0) - z).ln();
    }
    for &l in a_minus.spectrum().iter() {
        acc -= (Complex64::new(l, 0.0) - z).ln();
    }
    acc
}

fn require_off_spectra(a_plus: &SymOp, a_minus: &SymOp, z: Complex64) -> Result<(), SsfError> {
    let dist = a_plus.spectral_distance(z).min(a_minus.spectral_distance(z));
    let scale = 1.0 + a_plus.operator_norm().max(a_minus.operator_norm());
    if dist <= 1e-14 * scale {
        return Err(SsfError::OnSpectrum { z, distance: dist });
    }
    Ok(())
}

/// Perturbation determinant `det((A_+ - z)(A_- - z)^{-1})`.
///
/// Computed as `exp(log_det(A_+ - z I) - log_det(A_- - z I))` with the
/// pivoted-factorization log-determinant; in debug builds the dual form
/// `det(I + (A_+ - A_-)(A_- - z I)^{-1})` is evaluated as a cross-check.
pub fn pert_det(a_plus: &SymOp, a_minus: &SymOp, z: Complex64) -> Result<Complex64, SsfError> {
    check_dims(a_plus, a_minus)?;
    require_off_spectra(a_plus, a_minus, z)?;
    let n = a_plus.dim();
    let shift = CMatrix::identity(n, n) * z;
    let m_plus: CMatrix = a_plus.entries().map(|x| Complex64::new(x, 0.0)) - &shift;
    let m_minus: CMatrix = a_minus.entries().map(|x| Complex64::new(x, 0.0)) - &shift;
    let value = (log_det(&m_plus)? - log_det(&m_minus)?).exp();
    #[cfg(debug_assertions)]
    {
        let resolvent = a_minus.resolvent(z)?;
        let diff: CMatrix =
            (a_plus.entries() - a_minus.entries()).map(|x| Complex64::new(x, 0.0));
        let dual = CMatrix::identity(n, n) + diff * resolvent;
        let dual_det = log_det(&dual)?.exp();
        debug_assert!(
            (value - dual_det).norm() <= 1e-8 * (1.0 + value.norm()),
            "perturbation determinant routes disagree: {value} vs {dual_det}"
        );
    }
    Ok(value)
}

/// One waypoint of a branch-tracked logarithm walk.
#[derive(Debug, Clone, Serialize)]
pub struct Waypoint {
    pub z: Complex64,
    pub logdet: Complex64,
}

/// Branch-tracked `ln det((A_+ - z)(A_- - z)^{-1})` along a vertical walk.
///
/// The walk starts at `i Y` high enough that `|ln D| < 1e-6` (the branch is
/// normalized to vanish at `+i inf`) and descends to `target`, halving steps
/// until every increment's argument is below `pi/2`.
#[derive(Debug, Clone, Serialize)]
pub struct BranchTrace {
    pub waypoints: Vec<Waypoint>,
    pub target: Complex64,
    /// Continuously accumulated argument at the target.
    pub total_arg: f64,
}

impl BranchTrace {
    /// Branch-correct logarithm at the target.
    pub fn logdet(&self) -> Complex64 {
        self.waypoints.last().expect("walk is never empty").logdet
    }
}

const BRANCH_MAX_STEPS: usize = 1_000_000;

/// Distance from the segment `z1 -> z2` to the point `p` on the real axis.
fn segment_distance(z1: Complex64, z2: Complex64, p: f64) -> f64 {
    let a = z1 - Complex64::new(p, 0.0);
    let d = z2 - z1;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    // projection parameter clamped to the segment
    let t = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

/// Walks the branch of `ln D` from `+i inf` down to `target` along the
/// straight segment.
///
/// Each step is accepted only when the certified bound
/// `|delta ln D| <= |delta z| * (2 dim) / dist(step, spectra)` is below
/// `pi/2`; the principal increment then equals the continued one, so no
/// winding can be silently lost.  Steps halve adaptively near the real
/// axis.
pub fn logdet_branch(
    a_plus: &SymOp,
    a_minus: &SymOp,
    target: Complex64,
) -> Result<BranchTrace, SsfError> {
    check_dims(a_plus, a_minus)?;
    if target.im <= 0.0 {
        return Err(SsfError::NotUpperHalfPlane { z: target });
    }
    require_off_spectra(a_plus, a_minus, target)?;

    // Total variation of xi is at most the trace norm of the perturbation,
    // so |ln D(iy)| <= mass / y; start where that bound is below 1e-7 (the
    // principal value is then the normalized branch).
    let mass = crate::matlin::trace_norm(&(a_plus.entries() - a_minus.entries()));
    let y0 = 10.0 * (a_plus.operator_norm() + a_minus.operator_norm() + 1.0);
    let y_start = y0.max(1e7 * mass).max(target.im);

    let eigenvalues: Vec<f64> = a_plus
        .spectrum()
        .iter()
        .chain(a_minus.spectrum().iter())
        .copied()
        .collect();
    let two_n = eigenvalues.len() as f64;

    let start = Complex64::new(target.re, y_start);
    let mut current_z = start;
    let mut s_current = logdet_ratio_principal_sum(a_plus, a_minus, start);
    let mut logdet = s_current;
    let mut waypoints = vec![Waypoint { z: start, logdet }];
    let mut total_arg = logdet.im;
    let mut steps = 0usize;
    let mut fraction = 1.0f64;

    while (target - current_z).norm() > 0.0 {
        steps += 1;
        if steps > BRANCH_MAX_STEPS {
            return Err(SsfError::BranchWalkStalled {
                max_steps: BRANCH_MAX_STEPS,
            });
        }
        let candidate = current_z + (target - current_z) * fraction;
        let d_min = eigenvalues
            .iter()
            .map(|&l| segment_distance(current_z, candidate, l))
            .fold(f64::INFINITY, f64::min);
        let arg_bound = (candidate - current_z).norm() * two_n / d_min;
        if arg_bound < std::f64::consts::FRAC_PI_2 {
            let s_cand = logdet_ratio_principal_sum(a_plus, a_minus, candidate);
            let increment = Complex64::new(
                (s_cand - s_current).re,
                wrap_principal((s_cand - s_current).im),
            );
            logdet += increment;
            total_arg += increment.im;
            current_z = candidate;
            s_current = s_cand;
            waypoints.push(Waypoint {
                z: current_z,
                logdet,
            });
            fraction = (fraction * 2.0).min(1.0);
        } else {
            fraction *= 0.5;
            if fraction < 1e-14 {
                return Err(SsfError::BranchWalkStalled {
                    max_steps: BRANCH_MAX_STEPS,
                });
            }
        }
    }

    Ok(BranchTrace {
        waypoints,
        target,
        total_arg,
    })
}

/// Boundary value of the spectral shift function from the determinant:
/// `pi^{-1} Im ln D(lambda + i eps)` with the branch-tracked logarithm.
pub fn xi_from_det(
    a_plus: &SymOp,
    a_minus: &SymOp,
    lambda: f64,
    eps: f64,
) -> Result<f64, SsfError> {
    assert!(eps > 0.0, "eps must be positive");
    let trace = logdet_branch(a_plus, a_minus, Complex64::new(lambda, eps))?;
    Ok(trace.logdet().im / std::f64::consts::PI)
}

/// Residual of the Krein trace formula
/// `tr(f(A_+) - f(A_-)) = Int f'(nu) xi(nu) dnu`.
///
/// The left side is a spectral sum; the right side integrates the supplied
/// `fprime` piecewise against [`xi_counting`] by adaptive quadrature (the
/// fundamental theorem of calculus is deliberately *not* used, so the two
/// routes stay independent).
pub fn krein_residual(
    a_plus: &SymOp,
    a_minus: &SymOp,
    f: impl Fn(f64) -> f64,
    fprime: impl Fn(f64) -> f64,
    quad_tol: f64,
) -> Result<f64, SsfError> {
    let lhs = a_plus.trace_fn(&f)? - a_minus.trace_fn(&f)?;
    let xi = xi_counting(a_plus, a_minus)?;
    let rhs = xi.integrate_against(|lo, hi| adaptive_simpson(&|x| fprime(x), lo, hi, quad_tol));
    Ok((lhs - rhs).abs())
}

/// Residual of the resolvent trace identity
/// `-tr((A_+ - z)^{-1} - (A_- - z)^{-1}) = Int xi(nu) (nu - z)^{-2} dnu`,
/// with the right side in closed form per step piece.
pub fn resolvent_trace_residual(
    a_plus: &SymOp,
    a_minus: &SymOp,
    z: Complex64,
) -> Result<f64, SsfError> {
    require_off_spectra(a_plus, a_minus, z)?;
    let mut lhs = Complex64::new(0.0, 0.0);
    for &l in a_plus.spectrum().iter() {
        lhs -= (Complex64::new(l, 0.0) - z).inv();
    }
    for &l in a_minus.spectrum().iter() {
        lhs += (Complex64::new(l, 0.0) - z).inv();
    }
    let xi = xi_counting(a_plus, a_minus)?;
    let rhs = xi.integrate_against_c(|lo, hi| {
        (Complex64::new(lo, 0.0) - z).inv() - (Complex64::new(hi, 0.0) - z).inv()
    });
    Ok((lhs - rhs).norm())
}

/// Residual of the `g_z` trace formula
/// `tr(g_z(A_+) - g_z(A_-)) = -z Int xi(nu) (nu^2 - z)^{-3/2} dnu`.
///
/// The right side integrates the explicit kernel by adaptive quadrature per
/// step piece (principal branch, positive real part of `(nu^2 - z)^{1/2}`).
pub fn gz_trace_residual(
    a_plus: &SymOp,
    a_minus: &SymOp,
    z: Complex64,
) -> Result<f64, SsfError> {
    check_gz_domain(a_plus, a_minus, z)?;
    let lhs = trace_gz_diff(a_plus, a_minus, z)?;
    let xi = xi_counting(a_plus, a_minus)?;
    let kernel = |nu: f64| {
        let w = Complex64::new(nu * nu, 0.0) - z;
        let root = w.sqrt();
        (root * root * root).inv()
    };
    let rhs = -z * xi.integrate_against_c(|lo, hi| adaptive_simpson(&kernel, lo, hi, 1e-12));
    Ok((lhs - rhs).norm())
}

/// `tr(g_z(A_+) - g_z(A_-))` by spectral sums.
pub fn trace_gz_diff(a_plus: &SymOp, a_minus: &SymOp, z: Complex64) -> Result<Complex64, SsfError> {
    check_gz_domain(a_plus, a_minus, z)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for &l in a_plus.spectrum().iter() {
        acc += g_z(l, z);
    }
    for &l in a_minus.spectrum().iter() {
        acc -= g_z(l, z);
    }
    Ok(acc)
}

fn check_gz_domain(a_plus: &SymOp, a_minus: &SymOp, z: Complex64) -> Result<(), SsfError> {
    check_dims(a_plus, a_minus)?;
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(SsfError::OnSpectrum { z, distance: 0.0 });
    }
    // z must avoid the squared spectra for (x^2 - z)^{-1/2} to be finite
    let dist = a_plus
        .spectrum()
        .iter()
        .chain(a_minus.spectrum().iter())
        .map(|&l| (Complex64::new(l * l, 0.0) - z).norm())
        .fold(f64::INFINITY, f64::min);
    let scale = 1.0 + a_plus.operator_norm().max(a_minus.operator_norm()).powi(2);
    if dist <= 1e-14 * scale {
        return Err(SsfError::OnSpectrum { z, distance: dist });
    }
    Ok(())
}

/// Central-difference check of the derivative formula
/// `d/dz tr(g_z(A_+) - g_z(A_-)) =
///  (1/2) tr(A_+ (A_+^2 - z)^{-3/2} - A_- (A_-^2 - z)^{-3/2})`.
///
/// Returns the absolute defect; it shrinks like `O(h^2)`.
pub fn dz_trace_residual(
    a_plus: &SymOp,
    a_minus: &SymOp,
    z: Complex64,
    h: f64,
) -> Result<f64, SsfError> {
    assert!(h > 0.0);
    let hh = Complex64::new(h, 0.0);
    let plus = trace_gz_diff(a_plus, a_minus, z + hh)?;
    let minus = trace_gz_diff(a_plus, a_minus, z - hh)?;
    let central = (plus - minus) / (2.0 * h);

    let deriv_term = |a: &SymOp| -> Complex64 {
        a.spectrum()
            .iter()
            .map(|&l| {
                let w = Complex64::new(l * l, 0.0) - z;
                let root = w.sqrt();
                Complex64::new(l, 0.0) / (root * root * root)
            })
            .sum()
    };
    let formula = (deriv_term(a_plus) - deriv_term(a_minus)) * 0.5;
    Ok((central - formula).norm())
}
