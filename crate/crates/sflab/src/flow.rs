//! Spectral flow of an operator path by a certified subdivision, the index
//! of a Fredholm pair of projections, and the assembled chain of equalities
//! between every index-flavored quantity in the crate.
//!
//! The subdivision algorithm partitions a window `[-T_0, T_0]` (found by an
//! outward scan) into intervals `[t_{j-1}, t_j]` carrying levels
//! `eps_j > 0` such that, on a sample grid over each interval,
//!
//! 1. `+-eps_j` stay clear of `sigma(A(t))` with margin at least `eps_j/4`,
//! 2. the eigenvalue count in `[-eps_j, eps_j]` is constant, and
//! 3. a Lipschitz bound from `||B'||` rules out crossings between samples.
//!
//! The flow is then the net count of eigenvalues entering `[0, eps_j)` over
//! the intervals,
//!
//! ```text
//! flow = sum_j  rank E_{A(t_j)}([0, eps_j)) - rank E_{A(t_{j-1})}([0, eps_j)),
//! ```
//!
//! an up-crossing through zero counting `+1`.  (This orientation makes the
//! model path `A(t) = tanh(t) I_2` come out `+2`, in agreement with the
//! Morse-theoretic count `dim S_- - dim S_+` of negative asymptotic
//! subspaces and with all the other members of the equality chain; see the
//! book's spectral-flow chapter for why the opposite order would be
//! inconsistent.)  The certificate — subdivision, levels, counts, margin —
//! serializes to JSON for audit.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::dirac::{build_dirac, Boundary, DiracError, Scheme, TimeGrid};
use crate::matlin::{eig_sym, trace, MatlinError, SymOp};
use crate::oppath::{OperatorPath, PathError};
use crate::ssf::SsfError;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Matlin(#[from] MatlinError),
    #[error(transparent)]
    Ssf(#[from] SsfError),
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error("zero is an eigenvalue of an asymptote (distance {distance:.3e})")]
    ZeroOnAsymptote { distance: f64 },
    #[error("outward scan failed to clear the asymptotic gap by t = {t_reached}")]
    ScanFailed { t_reached: f64 },
    #[error("certification failed on [{lo}, {hi}]: an eigenvalue hugs every candidate level")]
    CertificationFailure { lo: f64, hi: f64 },
    #[error("matrix is not an orthogonal projection: defect {defect:.3e}")]
    NotAProjection { defect: f64 },
    #[error("projection-pair index disagrees with tr(P - Q): ranks give {from_ranks}, trace gives {from_trace}")]
    IndexInconsistent { from_ranks: i64, from_trace: f64 },
}

/// Tuning knobs of the subdivision algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct FlowConfig {
    /// Step of the outward scan for the window half-width `T_0`.
    pub t0_scan_step: f64,
    /// Sample points per candidate interval (endpoints included).
    pub sample_density: usize,
    /// Maximum bisection depth before giving up on an interval.
    pub max_refine: usize,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t0_scan_step: 0.5,
            sample_density: 9,
            max_refine: 40,
            rank_tol: 1e-8,
        }
    }
}

/// Witness of a spectral-flow computation.
#[derive(Debug, Clone, Serialize)]
pub struct FlowCertificate {
    /// Subdivision `-T_0 = t_0 < ... < t_q = T_0`.
    pub t_levels: Vec<f64>,
    /// Level `eps_j` certified on `[t_{j-1}, t_j]`.
    pub epsilons: Vec<f64>,
    /// `rank E_{A(t)}([0, eps_j))` at the left and right interval ends.
    pub counts: Vec<(usize, usize)>,
    /// Smallest certified distance of `+-eps_j` from the sampled spectra.
    pub margin: f64,
    /// The flow value the certificate witnesses.
    pub flow: i64,
}

struct CertifiedInterval {
    lo: f64,
    hi: f64,
    eps: f64,
    count_lo: usize,
    count_hi: usize,
    margin: f64,
}

/// Spectral flow of the path with its certificate.
///
/// Preconditions: `0` is not an eigenvalue of either asymptote and the
/// evaluators honor the path contract.
pub fn spectral_flow(
    path: &OperatorPath,
    config: &FlowConfig,
) -> Result<(i64, FlowCertificate), FlowError> {
    let a_minus = path.a_minus().clone();
    let a_plus = path.asymptote_plus()?;
    let gap = asymptote_gap(&a_plus, &a_minus);
    let scale = 1.0 + a_plus.operator_norm().max(a_minus.operator_norm());
    if gap <= 1e-12 * scale {
        return Err(FlowError::ZeroOnAsymptote { distance: gap });
    }

    let t0 = scan_window(path, gap, config)?;
    let mut intervals = Vec::new();
    certify(path, -t0, t0, gap, config, 0, &mut intervals)?;

    let flow: i64 = intervals
        .iter()
        .map(|iv| iv.count_hi as i64 - iv.count_lo as i64)
        .sum();
    let mut t_levels: Vec<f64> = intervals.iter().map(|iv| iv.lo).collect();
    t_levels.push(intervals.last().map_or(t0, |iv| iv.hi));
    let certificate = FlowCertificate {
        t_levels,
        epsilons: intervals.iter().map(|iv| iv.eps).collect(),
        counts: intervals
            .iter()
            .map(|iv| (iv.count_lo, iv.count_hi))
            .collect(),
        margin: intervals
            .iter()
            .map(|iv| iv.margin)
            .fold(f64::INFINITY, f64::min),
        flow,
    };
    Ok((flow, certificate))
}

fn asymptote_gap(a_plus: &SymOp, a_minus: &SymOp) -> f64 {
    a_plus
        .spectrum()
        .iter()
        .chain(a_minus.spectrum().iter())
        .fold(f64::INFINITY, |m, &l| m.min(l.abs()))
}

/// Outward scan: the window is closed once `min |sigma(A(+-t))| > gap/2`
/// holds at the boundary and a few steps beyond.
fn scan_window(path: &OperatorPath, gap: f64, config: &FlowConfig) -> Result<f64, FlowError> {
    let mut t0 = path.support_hint().max(config.t0_scan_step);
    let limit = t0 + 200.0 * config.t0_scan_step;
    'scan: while t0 <= limit {
        for k in 0..4 {
            let t = t0 + k as f64 * config.t0_scan_step;
            for side in [-1.0, 1.0] {
                let a = path.a_of(side * t)?;
                let low = a.spectrum().iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
                if low <= gap / 2.0 {
                    t0 += config.t0_scan_step;
                    continue 'scan;
                }
            }
        }
        return Ok(t0);
    }
    Err(FlowError::ScanFailed { t_reached: t0 })
}

#[allow(clippy::too_many_arguments)]
fn certify(
    path: &OperatorPath,
    lo: f64,
    hi: f64,
    eps0: f64,
    config: &FlowConfig,
    depth: usize,
    out: &mut Vec<CertifiedInterval>,
) -> Result<(), FlowError> {
    if depth > config.max_refine {
        return Err(FlowError::CertificationFailure { lo, hi });
    }
    let density = config.sample_density.max(3);
    let samples: Vec<f64> = (0..density)
        .map(|i| lo + (hi - lo) * i as f64 / (density - 1) as f64)
        .collect();
    let mut spectra = Vec::with_capacity(density);
    let mut lipschitz = 0.0f64;
    for &t in &samples {
        spectra.push(path.a_of(t)?);
        lipschitz = lipschitz.max(path.bprime_at(t)?.norm());
    }

    // magnitudes of sampled eigenvalues inside the admissible level range
    let mut mags: Vec<f64> = spectra
        .iter()
        .flat_map(|a| a.spectrum().iter().map(|l| l.abs()).collect::<Vec<_>>())
        .filter(|&m| m < eps0)
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // best level: midpoint of the widest magnitude gap subject to
    // margin >= eps/4
    let mut candidate: Option<(f64, f64)> = None;
    let mut prev = 0.0f64;
    for &m in mags.iter().chain(std::iter::once(&eps0)) {
        let width = m - prev;
        if width > 0.0 {
            let mid = prev + width / 2.0;
            let half = width / 2.0;
            if half >= mid / 4.0 && candidate.is_none_or(|(_, h)| half > h) {
                candidate = Some((mid, half));
            }
        }
        prev = m;
    }

    let (eps, _) = match candidate {
        Some(c) => c,
        None => {
            let mid = 0.5 * (lo + hi);
            certify(path, lo, mid, eps0, config, depth + 1, out)?;
            return certify(path, mid, hi, eps0, config, depth + 1, out);
        }
    };

    // measured margin and count constancy over the grid
    let mut margin = f64::INFINITY;
    let mut counts_in_band = Vec::with_capacity(density);
    for a in &spectra {
        for &l in a.spectrum().iter() {
            margin = margin.min((l.abs() - eps).abs());
        }
        counts_in_band.push(a.spectrum().iter().filter(|l| l.abs() <= eps).count());
    }
    let constant = counts_in_band.windows(2).all(|w| w[0] == w[1]);
    // a crossing between samples would need the spectrum to move by more
    // than the measured margin
    let step = (hi - lo) / (density - 1) as f64;
    let no_sneak = lipschitz * step <= margin.max(f64::MIN_POSITIVE);

    if margin >= eps / 4.0 && constant && no_sneak {
        out.push(CertifiedInterval {
            lo,
            hi,
            eps,
            count_lo: spectra[0].count_in(0.0, eps),
            count_hi: spectra[density - 1].count_in(0.0, eps),
            margin,
        });
        Ok(())
    } else {
        let mid = 0.5 * (lo + hi);
        certify(path, lo, mid, eps0, config, depth + 1, out)?;
        certify(path, mid, hi, eps0, config, depth + 1, out)
    }
}

/// A pair of orthogonal projections, validated on construction.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
}

const PROJ_TOL: f64 = 1e-10;

impl ProjectionPair {
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self, FlowError> {
        for m in [&p, &q] {
            let idem = (m * m - m).norm();
            let sym = (m - m.transpose()).norm();
            let defect = idem.max(sym);
            if defect >= PROJ_TOL * (1.0 + m.norm()) {
                return Err(FlowError::NotAProjection { defect });
            }
        }
        Ok(ProjectionPair { p, q })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
}

/// Index of the Fredholm pair `(P, Q)`:
/// `dim(ran P  n  ran Q^perp) - dim(ran P^perp  n  ran Q)`.
///
/// Intersection dimensions come from rank deficiencies of stacked basis
/// matrices (singular values under `rank_tol * scale` count as zero); the
/// result is cross-checked against `round(tr(P - Q))` and any disagreement
/// is an error, signaling a rank-threshold failure.
pub fn fredholm_pair_index(pair: &ProjectionPair, rank_tol: f64) -> Result<i64, FlowError> {
    let n = pair.p.nrows();
    let id = DMatrix::identity(n, n);
    let dim1 = intersection_dim(&pair.p, &(&id - &pair.q), rank_tol)?;
    let dim2 = intersection_dim(&(&id - &pair.p), &pair.q, rank_tol)?;
    let from_ranks = dim1 as i64 - dim2 as i64;
    let tr = trace(&(&pair.p - &pair.q));
    if (tr - from_ranks as f64).abs() > 0.25 {
        return Err(FlowError::IndexInconsistent {
            from_ranks,
            from_trace: tr,
        });
    }
    Ok(from_ranks)
}

/// `dim(ran P  n  ran Q)` via `rank(Bp) + rank(Bq) - rank([Bp | Bq])`.
fn intersection_dim(p: &DMatrix<f64>, q: &DMatrix<f64>, rank_tol: f64) -> Result<usize, FlowError> {
    let bp = range_basis(p)?;
    let bq = range_basis(q)?;
    let rp = bp.ncols();
    let rq = bq.ncols();
    if rp == 0 || rq == 0 {
        return Ok(0);
    }
    let n = p.nrows();
    let mut stacked = DMatrix::zeros(n, rp + rq);
    stacked.view_mut((0, 0), (n, rp)).copy_from(&bp);
    stacked.view_mut((0, rp), (n, rq)).copy_from(&bq);
    let rank = matrix_rank(&stacked, rank_tol);
    Ok(rp + rq - rank)
}

/// Orthonormal basis of the range of a projection: eigenvectors with
/// eigenvalue above 1/2.
fn range_basis(p: &DMatrix<f64>) -> Result<DMatrix<f64>, FlowError> {
    let sym = eig_sym((p + p.transpose()) * 0.5)?;
    let cols: Vec<usize> = (0..sym.dim())
        .filter(|&j| sym.spectrum()[j] > 0.5)
        .collect();
    let mut basis = DMatrix::zeros(p.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        basis.set_column(dst, &sym.basis().column(src));
    }
    Ok(basis)
}

fn matrix_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let svals = m.clone().svd(false, false).singular_values;
    let scale = 1.0 + svals.iter().fold(0.0f64, |a, &b| a.max(b));
    svals.iter().filter(|&&s| s > rank_tol * scale).count()
}

/// The Morse projection `E_A((-inf, 0))`.
pub fn morse_projection(a: &SymOp) -> DMatrix<f64> {
    a.spectral_projection(|l| l < 0.0)
}

/// Six index-flavored quantities that must agree on a path with invertible
/// asymptotes, plus the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub spectral_flow: i64,
    pub pair_index: i64,
    pub morse_trace: i64,
    pub xi0: f64,
    pub xi0_h_median: f64,
    pub det_xi0: f64,
    pub all_equal: bool,
}

/// Options for [`morse_chain_report`].
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub flow: FlowConfig,
    /// Grid for the discretized index entry; `None` picks
    /// `T = max(support_hint, 8)` and the largest `N <= 200` the size guard
    /// allows.
    pub grid: Option<TimeGrid>,
    /// Boundary offset for the determinant entry `xi_from_det(0, eps)`.
    pub det_eps: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            flow: FlowConfig::default(),
            grid: None,
            det_eps: 1e-4,
        }
    }
}

/// Computes the full equality chain for the path.
pub fn morse_chain_report(
    path: &OperatorPath,
    config: &ChainConfig,
) -> Result<ChainReport, FlowError> {
    let (flow, _cert) = spectral_flow(path, &config.flow)?;

    let a_minus = path.a_minus().clone();
    let a_plus = path.asymptote_plus()?;
    let e_minus = morse_projection(&a_minus);
    let e_plus = morse_projection(&a_plus);
    let pair = ProjectionPair::new(e_minus.clone(), e_plus.clone())?;
    let pair_index = fredholm_pair_index(&pair, config.flow.rank_tol)?;
    let morse_trace = trace(&(&e_minus - &e_plus)).round() as i64;

    let xi = crate::ssf::xi_counting(&a_plus, &a_minus)?;
    let xi0 = xi.value_at(0.0);

    let grid = match config.grid {
        Some(g) => g,
        None => {
            let t = path.support_hint().max(8.0);
            let n_max = (5600 / path.dim()).max(64);
            TimeGrid::new(t, n_max.min(200))?
        }
    };
    let dd = build_dirac(path, grid, Scheme::Upwind, Boundary::Dirichlet)?;
    let xi0_h_median = dd.xi_h_median()?;

    let det_xi0 = crate::ssf::xi_from_det(&a_plus, &a_minus, 0.0, config.det_eps)?;

    let ints_equal =
        pair_index == flow && morse_trace == flow && xi0 == flow as f64 && xi0_h_median == flow as f64;
    let det_ok = (det_xi0 - flow as f64).abs() < 1e-3;
    Ok(ChainReport {
        spectral_flow: flow,
        pair_index,
        morse_trace,
        xi0,
        xi0_h_median,
        det_xi0,
        all_equal: ints_equal && det_ok,
    })
}

/// `tr((A_+ - z)^{-1} - (A_- - z)^{-1})`-style helper reused by tests:
/// Morse count difference `dim S_- - dim S_+`.
pub fn morse_dimension_difference(a_plus: &SymOp, a_minus: &SymOp) -> i64 {
    let neg = |a: &SymOp| a.spectrum().iter().filter(|&&l| l < 0.0).count() as i64;
    neg(a_minus) - neg(a_plus)
}
