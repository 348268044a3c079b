//! Dense symmetric/complex linear algebra: spectral decompositions, matrix
//! functions, resolvents, traces, and stable log-determinants.
//!
//! The central type is [`SymOp`], a real symmetric matrix carrying its full
//! orthonormal spectral decomposition.  Every operator-theoretic quantity in
//! this crate (spectral projections, `f(A)`, resolvents, counting functions)
//! is evaluated through that decomposition, so the accuracy contract of the
//! eigensolver is the accuracy contract of the whole library:
//!
//! * reconstruction: `|| V diag(spectrum) V^T - A ||_F <= 1e-10 (1 + ||A||_F)`
//! * orthonormality: `|| V^T V - I ||_F <= 1e-10`
//!
//! Both are checked at construction time.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, used for resolvents and perturbation determinants.
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Error)]
pub enum MatlinError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |A - A^T| = {max_asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },
    #[error("eigensolver did not converge: {detail}")]
    NoConvergence { detail: String },
    #[error("spectral decomposition failed invariant check: {what} = {value:.3e}")]
    DecompositionDefect { what: &'static str, value: f64 },
    #[error("function undefined at eigenvalue {eigenvalue}")]
    FnUndefinedAt { eigenvalue: f64 },
    #[error("matrix is singular: smallest pivot magnitude {smallest_pivot:.3e}")]
    Singular { smallest_pivot: f64 },
    #[error("matrix too ill-conditioned for a reliable determinant: pivot ratio {cond:.3e}")]
    IllConditioned { cond: f64 },
    #[error("point {z} lies on the spectrum (distance {distance:.3e})")]
    OnSpectrum { z: Complex64, distance: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// A real symmetric matrix with a cached orthonormal spectral decomposition.
///
/// Eigenvalues are stored in ascending order; `basis` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymOp {
    entries: DMatrix<f64>,
    spectrum: DVector<f64>,
    basis: DMatrix<f64>,
}

const SYM_REL_TOL: f64 = 1e-12;
const DECOMP_TOL: f64 = 1e-10;

/// Spectral decomposition of a real symmetric matrix.
///
/// Rejects non-square and non-symmetric input (asymmetry above
/// `1e-12 * max|entries|`), sorts eigenvalues ascending, and verifies the
/// reconstruction and orthonormality invariants of the decomposition.
pub fn eig_sym(entries: DMatrix<f64>) -> Result<SymOp, MatlinError> {
    SymOp::new(entries)
}

impl SymOp {
    pub fn new(entries: DMatrix<f64>) -> Result<Self, MatlinError> {
        if entries.nrows() != entries.ncols() {
            return Err(MatlinError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(MatlinError::NonFinite);
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_asym = max_asymmetry(&entries);
        let tol = SYM_REL_TOL * scale.max(1.0);
        if max_asym > tol {
            return Err(MatlinError::NotSymmetric {
                max_asymmetry: max_asym,
                tolerance: tol,
            });
        }
        // Work on the symmetrized matrix so the decomposition sees exactly
        // symmetric input; the defect is below `tol` by the check above.
        let sym = (&entries + entries.transpose()) * 0.5;
        let n = sym.nrows();
        let fm = faer::Mat::from_fn(n, n, |i, j| sym[(i, j)]);
        let eig = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| MatlinError::NoConvergence {
                detail: format!("{e:?}"),
            })?;
        let raw_vals: Vec<f64> = (0..n).map(|k| eig.S()[k]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| raw_vals[i].partial_cmp(&raw_vals[j]).unwrap());
        let spectrum = DVector::from_fn(n, |i, _| raw_vals[order[i]]);
        let basis = DMatrix::from_fn(n, n, |i, j| eig.U()[(i, order[j])]);

        let op = SymOp {
            entries,
            spectrum,
            basis,
        };
        op.check_invariants()?;
        Ok(op)
    }

    /// Builds the operator directly from a decomposition known to be exact
    /// (diagonal `spectrum` in ascending order, orthonormal `basis`).
    pub fn from_decomposition(
        spectrum: DVector<f64>,
        basis: DMatrix<f64>,
    ) -> Result<Self, MatlinError> {
        let entries = &basis * DMatrix::from_diagonal(&spectrum) * basis.transpose();
        let entries = (&entries + entries.transpose()) * 0.5;
        let op = SymOp {
            entries,
            spectrum,
            basis,
        };
        op.check_invariants()?;
        Ok(op)
    }

    fn check_invariants(&self) -> Result<(), MatlinError> {
        let n = self.dim();
        let recon = &self.basis * DMatrix::from_diagonal(&self.spectrum) * self.basis.transpose();
        let recon_err = (&recon - &self.entries).norm();
        let recon_tol = DECOMP_TOL * (1.0 + self.entries.norm());
        if recon_err > recon_tol {
            return Err(MatlinError::DecompositionDefect {
                what: "reconstruction error",
                value: recon_err,
            });
        }
        let ortho_err = (self.basis.transpose() * &self.basis - DMatrix::identity(n, n)).norm();
        if ortho_err > DECOMP_TOL {
            return Err(MatlinError::DecompositionDefect {
                what: "orthonormality defect",
                value: ortho_err,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.spectrum
    }

    /// Orthonormal eigenvectors, as columns, matching [`Self::spectrum`].
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Operator norm `max |lambda_j|`.
    pub fn operator_norm(&self) -> f64 {
        self.spectrum.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Distance from `z` to the spectrum in the complex plane.
    pub fn spectral_distance(&self, z: Complex64) -> f64 {
        self.spectrum
            .iter()
            .map(|&l| (Complex64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `V f(Lambda) V^T` for a real scalar function `f`.
    ///
    /// Fails if `f` is not finite at some eigenvalue, naming the offender.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>, MatlinError> {
        let fvals = self.fn_values(f)?;
        let scaled = scale_columns(&self.basis, &fvals);
        let out = &scaled * self.basis.transpose();
        Ok((&out + out.transpose()) * 0.5)
    }

    /// `V f(Lambda) V^T` for a complex scalar function `f`.
    pub fn apply_fn_complex(
        &self,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<CMatrix, MatlinError> {
        let n = self.dim();
        let mut fvals = Vec::with_capacity(n);
        for &l in self.spectrum.iter() {
            let v = f(l);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(MatlinError::FnUndefinedAt { eigenvalue: l });
            }
            fvals.push(v);
        }
        let vc: CMatrix = self.basis.map(|x| Complex64::new(x, 0.0));
        let mut scaled = vc.clone();
        for (j, &fv) in fvals.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        Ok(&scaled * vc.transpose())
    }

    /// `tr f(A) = sum_j f(lambda_j)`.
    pub fn trace_fn(&self, f: impl Fn(f64) -> f64) -> Result<f64, MatlinError> {
        Ok(self.fn_values(f)?.iter().sum())
    }

    /// Resolvent `(A - z I)^{-1}` through the spectral decomposition.
    pub fn resolvent(&self, z: Complex64) -> Result<CMatrix, MatlinError> {
        let dist = self.spectral_distance(z);
        if dist == 0.0 {
            return Err(MatlinError::OnSpectrum { z, distance: dist });
        }
        self.apply_fn_complex(|l| (Complex64::new(l, 0.0) - z).inv())
    }

    /// Number of eigenvalues `<= lambda` (right-continuous counting function).
    pub fn counting(&self, lambda: f64) -> usize {
        self.spectrum.iter().filter(|&&l| l <= lambda).count()
    }

    /// Number of eigenvalues in the half-open interval `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.spectrum.iter().filter(|&&l| lo <= l && l < hi).count()
    }

    /// Spectral projection `E_A(S)` onto the eigenvalues selected by `pred`.
    pub fn spectral_projection(&self, pred: impl Fn(f64) -> bool) -> DMatrix<f64> {
        let n = self.dim();
        let mut p = DMatrix::zeros(n, n);
        for (j, &l) in self.spectrum.iter().enumerate() {
            if pred(l) {
                let v = self.basis.column(j);
                p += v * v.transpose();
            }
        }
        (&p + p.transpose()) * 0.5
    }

    fn fn_values(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>, MatlinError> {
        self.spectrum
            .iter()
            .map(|&l| {
                let v = f(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(MatlinError::FnUndefinedAt { eigenvalue: l })
                }
            })
            .collect()
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn scale_columns(v: &DMatrix<f64>, by: &[f64]) -> DMatrix<f64> {
    let mut out = v.clone();
    for (j, &s) in by.iter().enumerate() {
        for i in 0..out.nrows() {
            out[(i, j)] *= s;
        }
    }
    out
}

/// Principal logarithm of `det(M)`: real part exact, imaginary part in
/// `(-pi, pi]`.
///
/// Computed from a pivoted LU factorization, accumulating log-magnitudes and
/// phases separately so the determinant may over/underflow without harm.
/// Rejects singular input (zero pivot) and pivot ratios beyond `1e14`.
pub fn log_det(m: &CMatrix) -> Result<Complex64, MatlinError> {
    if m.nrows() != m.ncols() {
        return Err(MatlinError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(MatlinError::NonFinite);
    }
    let n = m.nrows();
    let lu = m.clone().lu();
    let mut log_mag = 0.0f64;
    let mut phase = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0f64;
    let u = lu.u();
    for i in 0..n {
        let pivot: Complex64 = u[(i, i)];
        let mag = pivot.norm();
        min_pivot = min_pivot.min(mag);
        max_pivot = max_pivot.max(mag);
        if mag == 0.0 {
            return Err(MatlinError::Singular {
                smallest_pivot: 0.0,
            });
        }
        log_mag += mag.ln();
        phase += pivot.arg();
    }
    if min_pivot == 0.0 || max_pivot / min_pivot > 1e14 {
        return Err(if min_pivot == 0.0 {
            MatlinError::Singular {
                smallest_pivot: min_pivot,
            }
        } else {
            MatlinError::IllConditioned {
                cond: max_pivot / min_pivot,
            }
        });
    }
    // Row permutation contributes its sign to the determinant.
    if permutation_is_odd(lu.p().len(), lu.p()) {
        phase += std::f64::consts::PI;
    }
    Ok(Complex64::new(log_mag, wrap_principal(phase)))
}

fn permutation_is_odd(
    len: usize,
    p: &nalgebra::PermutationSequence<nalgebra::Dyn>,
) -> bool {
    let _ = len;
    // nalgebra stores the sequence of row transpositions; determinant sign
    // is (-1)^(number of non-trivial swaps).
    p.determinant::<f64>() < 0.0
}

/// Wraps an angle to the principal interval `(-pi, pi]`.
pub fn wrap_principal(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t > std::f64::consts::PI {
        t -= two_pi;
    } else if t <= -std::f64::consts::PI {
        t += two_pi;
    }
    t
}

/// Ascending eigenvalues of a (numerically) symmetric matrix, without
/// eigenvectors.  The input is symmetrized; intended for large products
/// like `D^T D` where only the spectrum matters.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>, MatlinError> {
    if m.nrows() != m.ncols() {
        return Err(MatlinError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let fm = faer::Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut vals = fm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| MatlinError::NoConvergence {
            detail: format!("{e:?}"),
        })?;
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// `tr M` of a real matrix.
pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

/// `tr M` of a complex matrix.
pub fn trace_c(m: &CMatrix) -> Complex64 {
    m.diagonal().sum()
}

/// Trace norm (sum of singular values) of a real matrix.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Frobenius norm of a real matrix.
pub fn fro_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Identity shorthand used throughout the crate.
pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn sym_from_seed(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&raw + raw.transpose()) * 0.5
    }

    #[test]
    fn diagonal_input_is_sorted_and_permuted() {
        let a = eig_sym(dmatrix![3.0, 0.0; 0.0, 1.0]).unwrap();
        assert_relative_eq!(a.spectrum()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.spectrum()[1], 3.0, epsilon = 1e-14);
        // eigenvector matrix is a (signed) permutation
        for j in 0..2 {
            let col = a.basis().column(j);
            let big = col.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
            assert_relative_eq!(big, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_spectrum() {
        let a = eig_sym(identity(2)).unwrap();
        assert_relative_eq!(a.spectrum()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.spectrum()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn off_diagonal_two_by_two() {
        // characteristic polynomial x^2 - 1 = 0
        let a = eig_sym(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        assert_relative_eq!(a.spectrum()[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(a.spectrum()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = eig_sym(dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap_err();
        match err {
            MatlinError::NotSymmetric { max_asymmetry, .. } => {
                assert_relative_eq!(max_asymmetry, 1.0, epsilon = 1e-15)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn apply_fn_scalar_g() {
        let a = eig_sym(dmatrix![1.0]).unwrap();
        let g = a.apply_fn(|x| x / (x * x + 1.0).sqrt()).unwrap();
        assert_relative_eq!(g[(0, 0)], 0.7071067811865475, epsilon = 1e-12);
    }

    #[test]
    fn apply_fn_square_matches_matrix_square() {
        let m = dmatrix![0.0, 1.0; 1.0, 0.0];
        let a = eig_sym(m.clone()).unwrap();
        let sq = a.apply_fn(|x| x * x).unwrap();
        let direct = &m * &m;
        assert!((sq - direct).norm() < 1e-12);
    }

    #[test]
    fn apply_fn_domain_error_names_eigenvalue() {
        let a = eig_sym(dmatrix![2.0]).unwrap();
        let err = a.apply_fn(|x| (x - 2.0).recip()).unwrap_err();
        match err {
            MatlinError::FnUndefinedAt { eigenvalue } => {
                assert_relative_eq!(eigenvalue, 2.0, epsilon = 1e-14)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn counting_examples() {
        let a = eig_sym(dmatrix![-2.0, 0.0; 0.0, 1.0]).unwrap();
        assert_eq!(a.counting(0.0), 1);
        assert_eq!(a.counting(2.0), 2);
        assert_eq!(a.counting(-3.0), 0);
        // right-continuity: the eigenvalue itself is included
        assert_eq!(a.counting(-2.0), 1);
        assert_eq!(a.counting(1.0), 2);
    }

    #[test]
    fn log_det_examples() {
        let id: CMatrix = CMatrix::identity(3, 3);
        let ld = log_det(&id).unwrap();
        assert!(ld.norm() < 1e-14);

        let e = std::f64::consts::E;
        let de = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(e, 0.0),
            Complex64::new(e, 0.0),
        ]));
        let ld = log_det(&de).unwrap();
        assert_relative_eq!(ld.re, 2.0, epsilon = 1e-12);
        assert!(ld.im.abs() < 1e-14);

        let neg = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(
            -1.0, 0.0,
        )]));
        let ld = log_det(&neg).unwrap();
        assert!(ld.re.abs() < 1e-14);
        assert_relative_eq!(ld.im, std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn log_det_singular_reports_pivot() {
        let z = CMatrix::zeros(2, 2);
        match log_det(&z).unwrap_err() {
            MatlinError::Singular { smallest_pivot } => assert_eq!(smallest_pivot, 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn log_det_rejects_extreme_conditioning() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1e20, 0.0),
            Complex64::new(1e-20, 0.0),
        ]));
        match log_det(&m).unwrap_err() {
            MatlinError::IllConditioned { cond } => assert!(cond > 1e14),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn log_det_permutation_sign() {
        // det of the 2x2 swap is -1 -> log = i*pi
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        let ld = log_det(&m).unwrap();
        assert!(ld.re.abs() < 1e-14);
        assert_relative_eq!(ld.im.abs(), std::f64::consts::PI, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn identity_and_one_are_exact(seed in 0u64..500, n in 2usize..40) {
            let m = sym_from_seed(n, seed);
            let a = eig_sym(m.clone()).unwrap();
            let back = a.apply_fn(|x| x).unwrap();
            prop_assert!((back - &m).norm() <= 1e-12 * (1.0 + m.norm()));
            let one = a.apply_fn(|_| 1.0).unwrap();
            prop_assert!((one - identity(n)).norm() <= 1e-12 * (n as f64));
        }

        #[test]
        fn trace_of_fn_matches_eigenvalue_sum(seed in 0u64..500, n in 2usize..20) {
            let a = eig_sym(sym_from_seed(n, seed)).unwrap();
            let f = |x: f64| (x * 0.7).cos() + x * x;
            let m = a.apply_fn(f).unwrap();
            let lhs = trace(&m);
            let rhs: f64 = a.spectrum().iter().map(|&l| f(l)).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn counting_is_monotone(seed in 0u64..200, n in 2usize..12) {
            let a = eig_sym(sym_from_seed(n, seed)).unwrap();
            let mut grid: Vec<f64> = (-10..=10).map(|k| k as f64 / 5.0).collect();
            grid.extend(a.spectrum().iter().copied());
            grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for w in grid.windows(2) {
                prop_assert!(a.counting(w[0]) <= a.counting(w[1]));
            }
        }

        #[test]
        fn log_det_is_multiplicative(seed in 0u64..200, n in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let mut gen = || {
                // shifted to keep matrices well-conditioned
                let mut m = CMatrix::from_fn(n, n, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                for i in 0..n {
                    m[(i, i)] += Complex64::new(4.0, 0.0);
                }
                m
            };
            let m1 = gen();
            let m2 = gen();
            let lhs = log_det(&(&m1 * &m2)).unwrap().exp();
            let rhs = log_det(&m1).unwrap().exp() * log_det(&m2).unwrap().exp();
            prop_assert!((lhs - rhs).norm() <= 1e-8 * rhs.norm());
        }
    }
}
