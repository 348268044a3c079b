//! Discretization of `D_A = d/dt + A(t)` on a finite time window, the
//! nonnegative pair `H_1 = D_A^* D_A`, `H_2 = D_A D_A^*`, the numerical
//! Fredholm index, and the trace-formula checks tying them to the
//! asymptotes.
//!
//! Two discrete realizations coexist here, each faithful to a different
//! observable:
//!
//! * **Index bookkeeping** uses the upwind difference rows on the interior
//!   of the grid plus spectral-projection boundary rows (the decaying-mode
//!   conditions `E_{A(-T)}((0, inf)) f(-T) = 0`,
//!   `E_{A(T)}((-inf, 0)) f(T) = 0`).  The resulting rectangular matrix `D`
//!   has exact kernel/cokernel dimensions matching the line operator, and
//!   `H_1 = D^T D`, `H_2 = D D^T` share their positive spectra *exactly*,
//!   so eigenvalue counting is unambiguous.  A square one-sided truncation
//!   cannot do this: its two products are always isospectral, kernels
//!   included, and the index reads zero.
//!
//! * **Relative traces** (`tr (H_2 - z)^{-1} - (H_1 - z)^{-1}`) use direct
//!   central-difference discretizations of the supersymmetric partner
//!   Hamiltonians `-d^2/dt^2 + A(t)^2 -+ A'(t)` with Dirichlet ends, whose
//!   spectra genuinely approximate the continuum pair and reproduce the
//!   trace formula
//!   `tr((H_2 - z)^{-1} - (H_1 - z)^{-1}) = (1/2z) tr(g_z(A_+) - g_z(A_-))`
//!   up to truncation/discretization error.
//!
//! The `d_matrix` accessor exposes the plain square block matrix
//! `D_t (x) I_n + blockdiag A(t_k)` (upwind/Dirichlet by default, circulant
//! or spectral-periodic variants for the constant-coefficient spectrum
//! check), which is also what the binary `DIRM` dump serializes.

use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::matlin::{sym_eigenvalues, MatlinError, SymOp};
use crate::oppath::{OperatorPath, PathError};
use crate::ssf::StepFunction;

/// Hard cap on `N * n` for dense assembly.
const SIZE_GUARD: usize = 6000;

#[derive(Debug, Error)]
pub enum DiracError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Matlin(#[from] MatlinError),
    #[error("time grid needs at least 8 nodes, got {n_nodes}")]
    GridTooSmall { n_nodes: usize },
    #[error("discretization size N*n = {size} exceeds the guard {guard}")]
    TooLarge { size: usize, guard: usize },
    #[error("spectral scheme requires periodic boundary")]
    SchemeBoundaryMismatch,
    #[error("operation requires a constant path")]
    NonConstantPath,
    #[error("z = {z} is too close to the spectrum (distance {distance:.3e})")]
    OnSpectrum { z: Complex64, distance: f64 },
    #[error("index not resolved at this resolution: kernel/spectral gap ratio {ratio:.2e} < 100")]
    GapNotResolved { ratio: f64 },
    #[error("asymptote has an eigenvalue at zero; index undefined")]
    ZeroOnAsymptote,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniform grid `t_k = -T + k h`, `h = 2T/(N-1)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TimeGrid {
    pub t_half: f64,
    pub n_nodes: usize,
}

impl TimeGrid {
    pub fn new(t_half: f64, n_nodes: usize) -> Result<Self, DiracError> {
        if n_nodes < 8 {
            return Err(DiracError::GridTooSmall { n_nodes });
        }
        assert!(t_half > 0.0, "grid half-width must be positive");
        Ok(TimeGrid { t_half, n_nodes })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.t_half / (self.n_nodes as f64 - 1.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_nodes).map(|k| -self.t_half + k as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward difference `(f_k - f_{k-1})/h`.
    Upwind,
    /// Fourier (cotangent) differentiation matrix; periodic only.
    SpectralPeriodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Ghost values outside the window are zero.
    Dirichlet,
    /// Indices wrap around.
    Periodic,
}

type SpectraCell = OnceLock<Result<(Vec<f64>, Vec<f64>), String>>;

/// Dense realization of `d/dt + A(t)` on a time grid.
pub struct DiracDiscretization {
    grid: TimeGrid,
    fiber_dim: usize,
    scheme: Scheme,
    boundary: Boundary,
    d_matrix: DMatrix<f64>,
    a_at_nodes: Vec<DMatrix<f64>>,
    bprime_at_nodes: Vec<DMatrix<f64>>,
    a_minus: SymOp,
    a_plus: SymOp,
    /// T below the path's support hint truncates the transition region.
    pub support_truncated: bool,
    index_spectra: SpectraCell,
    partner_spectra: SpectraCell,
}

/// Builds the discretization, evaluating `A(t_k)` once per node.
pub fn build_dirac(
    path: &OperatorPath,
    grid: TimeGrid,
    scheme: Scheme,
    boundary: Boundary,
) -> Result<DiracDiscretization, DiracError> {
    let n = path.dim();
    let big = grid.n_nodes * n;
    if big > SIZE_GUARD {
        return Err(DiracError::TooLarge {
            size: big,
            guard: SIZE_GUARD,
        });
    }
    if scheme == Scheme::SpectralPeriodic && boundary != Boundary::Periodic {
        return Err(DiracError::SchemeBoundaryMismatch);
    }

    let nodes = grid.nodes();
    let mut a_at_nodes = Vec::with_capacity(nodes.len());
    let mut bprime_at_nodes = Vec::with_capacity(nodes.len());
    for &t in &nodes {
        a_at_nodes.push(path.a_of(t)?.entries().clone());
        bprime_at_nodes.push(path.bprime_at(t)?);
    }

    let h = grid.spacing();
    let nn = grid.n_nodes;
    let mut d = DMatrix::zeros(big, big);
    match scheme {
        Scheme::Upwind => {
            for k in 0..nn {
                let mut diag = a_at_nodes[k].clone();
                for i in 0..n {
                    diag[(i, i)] += 1.0 / h;
                }
                d.view_mut((k * n, k * n), (n, n)).copy_from(&diag);
                let prev = if k > 0 {
                    Some(k - 1)
                } else if boundary == Boundary::Periodic {
                    Some(nn - 1)
                } else {
                    None
                };
                if let Some(p) = prev {
                    let mut sub = DMatrix::zeros(n, n);
                    for i in 0..n {
                        sub[(i, i)] = -1.0 / h;
                    }
                    d.view_mut((k * n, p * n), (n, n)).copy_from(&sub);
                }
            }
        }
        Scheme::SpectralPeriodic => {
            let dt = fourier_diff_matrix(nn, h);
            for k in 0..nn {
                for l in 0..nn {
                    if dt[(k, l)] != 0.0 {
                        for i in 0..n {
                            d[(k * n + i, l * n + i)] = dt[(k, l)];
                        }
                    }
                }
                let block = &a_at_nodes[k];
                for i in 0..n {
                    for j in 0..n {
                        d[(k * n + i, k * n + j)] += block[(i, j)];
                    }
                }
            }
        }
    }

    let a_minus = path.a_minus().clone();
    let a_plus = path.asymptote_plus()?;
    Ok(DiracDiscretization {
        grid,
        fiber_dim: n,
        scheme,
        boundary,
        d_matrix: d,
        a_at_nodes,
        bprime_at_nodes,
        a_minus,
        a_plus,
        support_truncated: grid.t_half < path.support_hint(),
        index_spectra: OnceLock::new(),
        partner_spectra: OnceLock::new(),
    })
}

/// Periodic Fourier differentiation matrix for `n` nodes with spacing `h`
/// (period `n h`): antisymmetric, purely imaginary spectrum.
fn fourier_diff_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let period = n as f64 * h;
    let factor = 2.0 * std::f64::consts::PI / period;
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            0.0
        } else {
            let diff = j as isize - k as isize;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let angle = std::f64::consts::PI * diff as f64 / n as f64;
            factor * 0.5 * sign / angle.tan()
        }
    })
}

impl DiracDiscretization {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// The square block matrix `D_t (x) I_n + blockdiag A(t_k)`.
    pub fn d_matrix(&self) -> &DMatrix<f64> {
        &self.d_matrix
    }

    pub fn a_plus(&self) -> &SymOp {
        &self.a_plus
    }

    pub fn a_minus(&self) -> &SymOp {
        &self.a_minus
    }

    /// Smallest distance of the asymptote spectra from zero.
    pub fn asymptote_gap(&self) -> f64 {
        let g = |a: &SymOp| a.spectrum().iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
        g(&self.a_plus).min(g(&self.a_minus))
    }

    /// Upwind interior rows plus decaying-mode boundary rows; rectangular
    /// in general.  Kernel and cokernel dimensions of this matrix realize
    /// the index of the line operator.
    fn aps_matrix(&self) -> Result<DMatrix<f64>, DiracError> {
        let n = self.fiber_dim;
        let nn = self.grid.n_nodes;
        let h = self.grid.spacing();

        let first = crate::matlin::eig_sym(self.a_at_nodes[0].clone())?;
        let last = crate::matlin::eig_sym(self.a_at_nodes[nn - 1].clone())?;
        let plus_dirs: Vec<usize> = (0..n)
            .filter(|&j| first.spectrum()[j] > 0.0)
            .collect();
        let minus_dirs: Vec<usize> = (0..n)
            .filter(|&j| last.spectrum()[j] < 0.0)
            .collect();
        let p = plus_dirs.len();
        let q = minus_dirs.len();

        let rows = (nn - 1) * n + p + q;
        let mut d = DMatrix::zeros(rows, nn * n);
        // left boundary rows: components along positive directions of
        // A(t_0) must vanish (only decaying-backward data admitted)
        for (r, &j) in plus_dirs.iter().enumerate() {
            for i in 0..n {
                d[(r, i)] = first.basis()[(i, j)] / h;
            }
        }
        // interior upwind rows
        for k in 1..nn {
            let row0 = p + (k - 1) * n;
            for i in 0..n {
                d[(row0 + i, (k - 1) * n + i)] = -1.0 / h;
                d[(row0 + i, k * n + i)] += 1.0 / h;
            }
            let block = &self.a_at_nodes[k];
            for i in 0..n {
                for j in 0..n {
                    d[(row0 + i, k * n + j)] += block[(i, j)];
                }
            }
        }
        // right boundary rows: components along negative directions of
        // A(t_{N-1}) must vanish
        for (r, &j) in minus_dirs.iter().enumerate() {
            let row = p + (nn - 1) * n + r;
            for i in 0..n {
                d[(row, (nn - 1) * n + i)] = last.basis()[(i, j)] / h;
            }
        }
        Ok(d)
    }

    /// Eigenvalues of `H_1 = D^T D` and `H_2 = D D^T` for the
    /// boundary-projected matrix, computed once and cached.  The two
    /// decompositions run concurrently.
    fn index_spectra(&self) -> Result<&(Vec<f64>, Vec<f64>), DiracError> {
        self.index_spectra
            .get_or_init(|| {
                let d = self.aps_matrix().map_err(|e| e.to_string())?;
                let h1 = d.transpose() * &d;
                let h2 = &d * d.transpose();
                let (e1, e2) = rayon::join(
                    || sym_eigenvalues(&h1).map_err(|e| e.to_string()),
                    || sym_eigenvalues(&h2).map_err(|e| e.to_string()),
                );
                Ok((e1?, e2?))
            })
            .as_ref()
            .map_err(|e| DiracError::Path(PathError::Config(e.clone())))
    }

    /// Eigenvalues of the partner Hamiltonians
    /// `-d^2/dt^2 + A(t)^2 -+ A'(t)` (central differences, Dirichlet).
    fn partner_spectra(&self) -> Result<&(Vec<f64>, Vec<f64>), DiracError> {
        self.partner_spectra
            .get_or_init(|| {
                let h1 = self.partner_hamiltonian(-1.0);
                let h2 = self.partner_hamiltonian(1.0);
                let (e1, e2) = rayon::join(
                    || sym_eigenvalues(&h1).map_err(|e| e.to_string()),
                    || sym_eigenvalues(&h2).map_err(|e| e.to_string()),
                );
                Ok((e1?, e2?))
            })
            .as_ref()
            .map_err(|e| DiracError::Path(PathError::Config(e.clone())))
    }

    /// `-d^2/dt^2 + A^2 + sign * A'` as a dense block matrix.
    fn partner_hamiltonian(&self, sign: f64) -> DMatrix<f64> {
        let n = self.fiber_dim;
        let nn = self.grid.n_nodes;
        let h = self.grid.spacing();
        let mut m = DMatrix::zeros(nn * n, nn * n);
        let inv_h2 = 1.0 / (h * h);
        for k in 0..nn {
            let a = &self.a_at_nodes[k];
            let mut diag = a * a + &self.bprime_at_nodes[k] * sign;
            for i in 0..n {
                diag[(i, i)] += 2.0 * inv_h2;
            }
            m.view_mut((k * n, k * n), (n, n)).copy_from(&diag);
            if k > 0 {
                for i in 0..n {
                    m[(k * n + i, (k - 1) * n + i)] = -inv_h2;
                    m[((k - 1) * n + i, k * n + i)] = -inv_h2;
                }
            }
        }
        m
    }

    /// Eigenvalues of the index pair `H_1 = D^T D`, `H_2 = D D^T` (ascending).
    pub fn index_h_spectra(&self) -> Result<(&[f64], &[f64]), DiracError> {
        let (e1, e2) = self.index_spectra()?;
        Ok((e1.as_slice(), e2.as_slice()))
    }

    /// Numerical Fredholm index: near-zero eigenvalue count of `H_1` minus
    /// that of `H_2`, with `tau^2 = tol_factor * median(positive
    /// eigenvalues)` and a required factor-100 gap between accepted kernel
    /// modes and the rest.
    pub fn numeric_index(&self, tol_factor: f64) -> Result<i64, DiracError> {
        self.numeric_index_with_gap(tol_factor).map(|(idx, _)| idx)
    }

    /// [`Self::numeric_index`] returning the kernel/spectral gap ratio too
    /// (`f64::INFINITY` when no kernel mode is accepted).
    pub fn numeric_index_with_gap(&self, tol_factor: f64) -> Result<(i64, f64), DiracError> {
        if self.asymptote_gap() == 0.0 {
            return Err(DiracError::ZeroOnAsymptote);
        }
        let (e1, e2) = self.index_spectra()?;
        let max_eig = e1
            .iter()
            .chain(e2.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let noise_floor = 1e-12 * (1.0 + max_eig);
        let mut positives: Vec<f64> = e1
            .iter()
            .chain(e2.iter())
            .copied()
            .filter(|&x| x > noise_floor)
            .collect();
        positives.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if positives.is_empty() {
            return Err(DiracError::GapNotResolved { ratio: 0.0 });
        }
        let median = positives[positives.len() / 2];
        let tau2 = tol_factor * median;

        let accepted_max = e1
            .iter()
            .chain(e2.iter())
            .copied()
            .filter(|&x| x < tau2)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let rest_min = e1
            .iter()
            .chain(e2.iter())
            .copied()
            .filter(|&x| x >= tau2)
            .fold(f64::INFINITY, f64::min);
        let k1 = e1.iter().filter(|&&x| x < tau2).count() as i64;
        let k2 = e2.iter().filter(|&&x| x < tau2).count() as i64;
        let mut gap_ratio = f64::INFINITY;
        if k1 > 0 || k2 > 0 {
            gap_ratio = rest_min / accepted_max.max(noise_floor);
            if gap_ratio.is_nan() || gap_ratio < 100.0 {
                return Err(DiracError::GapNotResolved { ratio: gap_ratio });
            }
        }
        Ok((k1 - k2, gap_ratio))
    }

    /// Counting-difference spectral shift for the pair `(H_2, H_1)`:
    /// `xi_H(lambda) = counting(H_1, lambda) - counting(H_2, lambda)`,
    /// zero for `lambda < 0` by construction.
    ///
    /// `D^T D` and `D D^T` share their nonzero spectrum exactly, so after
    /// clamping kernel modes to zero the sorted positive eigenvalue lists
    /// are paired up and snapped together, removing the independent
    /// eigensolver noise that would otherwise litter the step function with
    /// width-`1e-13` blips.
    pub fn xi_h_counting(&self) -> Result<StepFunction, DiracError> {
        let (e1, e2) = self.index_spectra()?;
        let max_eig = e1
            .iter()
            .chain(e2.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let floor = 1e-9 * (1.0 + max_eig);
        let clamp = |v: &[f64]| -> Vec<f64> {
            v.iter().map(|&x| if x < floor { 0.0 } else { x }).collect()
        };
        let c1 = clamp(e1);
        let mut c2 = clamp(e2);
        let p1: Vec<f64> = c1.iter().copied().filter(|&x| x > 0.0).collect();
        let mut j = 0;
        for x in c2.iter_mut().filter(|x| **x > 0.0) {
            if j < p1.len() && (*x - p1[j]).abs() <= 1e-8 * (1.0 + p1[j]) {
                *x = p1[j];
            }
            j += 1;
        }
        crate::ssf::xi_from_spectra(&c2, &c1)
            .map_err(|_| DiracError::GapNotResolved { ratio: 0.0 })
    }

    /// Median of `xi_H` over `lambda in (0.1 gap^2, 0.9 gap^2)`, the
    /// surrogate for `xi(0+; H_2, H_1)`.
    pub fn xi_h_median(&self) -> Result<f64, DiracError> {
        let xi = self.xi_h_counting()?;
        let gap2 = self.asymptote_gap().powi(2);
        let lo = 0.1 * gap2;
        let hi = 0.9 * gap2;
        let mut vals: Vec<f64> = (0..=100)
            .map(|k| xi.value_at(lo + (hi - lo) * k as f64 / 100.0))
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals[vals.len() / 2])
    }

    /// `tr((H_2 - z)^{-1} - (H_1 - z)^{-1})` through the partner spectra.
    pub fn resolvent_trace_diff(&self, z: Complex64) -> Result<Complex64, DiracError> {
        let (e1, e2) = self.partner_spectra()?;
        let dist = e1
            .iter()
            .chain(e2.iter())
            .map(|&l| (Complex64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min);
        let scale = e1.iter().chain(e2.iter()).fold(0.0f64, |m, &x| m.max(x.abs()));
        if dist <= 1e-12 * (1.0 + scale) {
            return Err(DiracError::OnSpectrum { z, distance: dist });
        }
        let sum = |e: &[f64]| -> Complex64 {
            e.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum()
        };
        Ok(sum(e2) - sum(e1))
    }

    /// Residual of the trace formula
    /// `tr((H_2 - z)^{-1} - (H_1 - z)^{-1}) = (1/2z) tr(g_z(A_+) - g_z(A_-))`;
    /// decays with window size and resolution.
    pub fn trace_formula_residual(&self, z: Complex64) -> Result<f64, DiracError> {
        let lhs = self.resolvent_trace_diff(z)?;
        let rhs = crate::ssf::trace_gz_diff(&self.a_plus, &self.a_minus, z)
            .map_err(|_| DiracError::OnSpectrum { z, distance: 0.0 })?
            / (2.0 * z);
        Ok((lhs - rhs).norm())
    }

    /// Serializes `d_matrix` as `DIRM` binary: 16-byte header (magic
    /// `DIRM`, u32 rows, u32 cols, u32 reserved, little-endian), then
    /// row-major f64 entries.
    pub fn write_dirm(&self, mut w: impl Write) -> std::io::Result<()> {
        let m = &self.d_matrix;
        w.write_all(b"DIRM")?;
        w.write_all(&(m.nrows() as u32).to_le_bytes())?;
        w.write_all(&(m.ncols() as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Builds the default (upwind, Dirichlet) discretization of the path on
/// `grid` and returns the trace-formula residual at `z`.
pub fn trace_formula_residual(
    path: &OperatorPath,
    grid: TimeGrid,
    z: Complex64,
) -> Result<f64, DiracError> {
    build_dirac(path, grid, Scheme::Upwind, Boundary::Dirichlet)?.trace_formula_residual(z)
}

/// Reads a `DIRM` dump back into a dense matrix.
pub fn read_dirm(mut r: impl Read) -> std::io::Result<DMatrix<f64>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != b"DIRM" {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad magic, expected DIRM",
        ));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; rows * cols * 8];
    r.read_exact(&mut buf)?;
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let off = (i * cols + j) * 8;
            m[(i, j)] = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

/// Residual between the resolvent kernel of the constant-coefficient
/// `H_0 = -d^2/dt^2 + A_-^2` and its closed form
/// `R_0(z, s, t) = (1/2) kappa_z^{-1} e^{-kappa_z |t - s|}`,
/// `kappa_z = (A_-^2 - z)^{1/2}`.
///
/// Compares `h * R_0(t_j, t_k)` against the dense inverse of the central
/// discretization, max-norm over node pairs outside a boundary collar of
/// width `2 / min Re(kappa_z)`.
pub fn r0_kernel_residual(
    a_minus: &SymOp,
    grid: TimeGrid,
    z: Complex64,
) -> Result<f64, DiracError> {
    r0_kernel_residual_with_collar(a_minus, grid, z, 2.0)
}

/// [`r0_kernel_residual`] with the collar width set to
/// `collar_factor / min Re(kappa_z)`.  The default factor 2 keeps most of
/// the window; the Dirichlet image terms it admits decay like
/// `e^{-2 kappa collar}` and dominate convergence-order studies, which
/// should use a deeper interior.
pub fn r0_kernel_residual_with_collar(
    a_minus: &SymOp,
    grid: TimeGrid,
    z: Complex64,
    collar_factor: f64,
) -> Result<f64, DiracError> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(DiracError::OnSpectrum { z, distance: 0.0 });
    }
    let n = a_minus.dim();
    let nn = grid.n_nodes;
    if nn * n > SIZE_GUARD {
        return Err(DiracError::TooLarge {
            size: nn * n,
            guard: SIZE_GUARD,
        });
    }
    let h = grid.spacing();
    let nodes = grid.nodes();

    // dense (H_0 - z)^{-1}
    let a2 = a_minus.entries() * a_minus.entries();
    let inv_h2 = 1.0 / (h * h);
    let mut m = crate::matlin::CMatrix::zeros(nn * n, nn * n);
    for k in 0..nn {
        for i in 0..n {
            for j in 0..n {
                m[(k * n + i, k * n + j)] = Complex64::new(a2[(i, j)], 0.0);
            }
            m[(k * n + i, k * n + i)] += Complex64::new(2.0 * inv_h2, 0.0) - z;
            if k > 0 {
                m[(k * n + i, (k - 1) * n + i)] = Complex64::new(-inv_h2, 0.0);
                m[((k - 1) * n + i, k * n + i)] = Complex64::new(-inv_h2, 0.0);
            }
        }
    }
    let inv = m
        .lu()
        .try_inverse()
        .ok_or(DiracError::OnSpectrum { z, distance: 0.0 })?;

    // kappa_z through the spectral calculus of A_-
    let kappas: Vec<Complex64> = a_minus
        .spectrum()
        .iter()
        .map(|&l| (Complex64::new(l * l, 0.0) - z).sqrt())
        .collect();
    let kappa_min = kappas.iter().map(|k| k.re).fold(f64::INFINITY, f64::min);
    let collar = collar_factor / kappa_min;

    let basis = a_minus.basis();
    let mut worst = 0.0f64;
    for (j, &tj) in nodes.iter().enumerate() {
        if tj - (-grid.t_half) < collar || grid.t_half - tj < collar {
            continue;
        }
        for (k, &tk) in nodes.iter().enumerate() {
            if tk - (-grid.t_half) < collar || grid.t_half - tk < collar {
                continue;
            }
            let dt = (tj - tk).abs();
            // analytic kernel block V diag(e^{-kappa dt}/(2 kappa)) V^T
            for a in 0..n {
                for b in 0..n {
                    let mut kernel = Complex64::new(0.0, 0.0);
                    for (idx, kap) in kappas.iter().enumerate() {
                        let w = (-kap * dt).exp() / (2.0 * kap);
                        kernel += w * basis[(a, idx)] * basis[(b, idx)];
                    }
                    let got = inv[(j * n + a, k * n + b)];
                    let diff = (got - kernel * h).norm();
                    worst = worst.max(diff);
                }
            }
        }
    }
    Ok(worst)
}

/// Checks the constant-coefficient spectrum identity
/// `sigma(D_{A_-}) = sigma(A_-) + i R` on the spectral-periodic
/// discretization: the dense nonsymmetric matrix is eigendecomposed and the
/// real parts are measured against `sigma(A_-)`.
pub fn spectrum_line_check(a_minus: &SymOp, grid: TimeGrid) -> Result<f64, DiracError> {
    let n = a_minus.dim();
    let nn = grid.n_nodes;
    if nn * n > SIZE_GUARD {
        return Err(DiracError::TooLarge {
            size: nn * n,
            guard: SIZE_GUARD,
        });
    }
    let a_minus_cloned = a_minus.clone();
    let entries = a_minus.entries().clone();
    let path = OperatorPath::new(
        a_minus_cloned,
        move |_t| DMatrix::zeros(entries.nrows(), entries.ncols()),
        {
            let n = a_minus.dim();
            move |_t| DMatrix::zeros(n, n)
        },
        Some(DMatrix::zeros(n, n)),
        grid.t_half,
    );
    let dd = build_dirac(&path, grid, Scheme::SpectralPeriodic, Boundary::Periodic)?;
    let eigs = dd.d_matrix.clone().complex_eigenvalues();
    let mut worst = 0.0f64;
    for e in eigs.iter() {
        let dist = a_minus
            .spectrum()
            .iter()
            .map(|&l| (e.re - l).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(dist);
    }
    Ok(worst)
}
