//! Acceptance suite: every criterion the laboratory must meet, one test
//! per criterion, each printing a pass/fail line.  Tolerances are pinned
//! in the assertions; nothing here is calibrated at run time.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sflab::dirac::{build_dirac, Boundary, Scheme, TimeGrid};
use sflab::doi;
use sflab::flow::{
    fredholm_pair_index, morse_chain_report, morse_projection, spectral_flow, ChainConfig,
    FlowConfig, ProjectionPair,
};
use sflab::matlin::{eig_sym, trace};
use sflab::oppath::{scenario, OperatorPath};
use sflab::sampling;
use sflab::ssf;
use sflab::transforms;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// Criterion 1: the equality chain on the tanh2 model, integers exact and
/// the determinant value within 1e-3, in under 5 seconds.
#[test]
fn criterion_1_model_chain() {
    let started = Instant::now();
    let report = morse_chain_report(&scenario::tanh2(), &ChainConfig::default()).unwrap();
    let elapsed = started.elapsed();

    let ints_ok = report.spectral_flow == 2
        && report.pair_index == 2
        && report.morse_trace == 2
        && report.xi0 == 2.0;
    let det_ok = (report.det_xi0 - 2.0).abs() < 1e-3;
    let time_ok = elapsed.as_secs_f64() < 5.0;
    verdict(
        "criterion 1 (model chain)",
        ints_ok && det_ok && time_ok,
        &format!(
            "flow={} pair={} trace={} xi0={} det={:.6} in {:.2}s",
            report.spectral_flow,
            report.pair_index,
            report.morse_trace,
            report.xi0,
            report.det_xi0,
            elapsed.as_secs_f64()
        ),
    );
}

/// Criterion 2: discretized index 2 at (T=12, N=400), stable under N=800
/// and T=16, gap ratio >= 100, under 60 seconds.
#[test]
fn criterion_2_discretized_index() {
    let started = Instant::now();
    let path = scenario::tanh2();

    let base = build_dirac(
        &path,
        TimeGrid::new(12.0, 400).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap();
    let (index, gap_ratio) = base.numeric_index_with_gap(1e-6).unwrap();

    let refined_n = build_dirac(
        &path,
        TimeGrid::new(12.0, 800).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap()
    .numeric_index(1e-6)
    .unwrap();
    let refined_t = build_dirac(
        &path,
        TimeGrid::new(16.0, 400).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap()
    .numeric_index(1e-6)
    .unwrap();
    let elapsed = started.elapsed();

    let pass = index == 2
        && refined_n == 2
        && refined_t == 2
        && gap_ratio >= 100.0
        && elapsed.as_secs_f64() < 60.0;
    verdict(
        "criterion 2 (discretized index)",
        pass,
        &format!(
            "index={index} (N=800: {refined_n}, T=16: {refined_t}), gap ratio {gap_ratio:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

/// Criterion 3: the relative-trace formula at z = -1 on the tanh2 model,
/// residual under 0.05 at (T=12, N=400) and strictly smaller at N=800.
#[test]
fn criterion_3_trace_formula() {
    let path = scenario::tanh2();
    let z = Complex64::new(-1.0, 0.0);

    let coarse = build_dirac(
        &path,
        TimeGrid::new(12.0, 400).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap();
    let lhs = coarse.resolvent_trace_diff(z).unwrap();
    let against_closed_form = (lhs.re + std::f64::consts::SQRT_2).abs().max(lhs.im.abs());
    let res_coarse = coarse.trace_formula_residual(z).unwrap();

    let res_fine = build_dirac(
        &path,
        TimeGrid::new(12.0, 800).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap()
    .trace_formula_residual(z)
    .unwrap();

    let pass = against_closed_form < 0.05 && res_coarse < 0.05 && res_fine < res_coarse;
    verdict(
        "criterion 3 (trace formula)",
        pass,
        &format!(
            "lhs={:.5}{:+.1e}i vs -sqrt(2): {against_closed_form:.3e}; residual {res_coarse:.3e} -> {res_fine:.3e} at N=800",
            lhs.re, lhs.im
        ),
    );
}

/// Criterion 4: the Abel transform of the model shift function in closed
/// form, and the discrete xi_H median over the gap.
#[test]
fn criterion_4_abel_transform() {
    let path = scenario::tanh2();
    let a_plus = path.asymptote_plus().unwrap();
    let xi_a = ssf::xi_counting(&a_plus, path.a_minus()).unwrap();

    let mut closed_ok = true;
    for k in 1..=9 {
        let lambda = k as f64 / 10.0;
        let v = transforms::abel_forward(&xi_a, lambda).unwrap();
        closed_ok &= (v - 2.0).abs() < 1e-13;
    }
    for lambda in [1.2, 2.0, 5.0, 40.0] {
        let v = transforms::abel_forward(&xi_a, lambda).unwrap();
        let expected = 4.0 / std::f64::consts::PI * (lambda as f64).powf(-0.5).asin();
        closed_ok &= (v - expected).abs() < 1e-13;
    }

    let dd = build_dirac(
        &path,
        TimeGrid::new(12.0, 400).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap();
    let median = dd.xi_h_median().unwrap();

    let pass = closed_ok && median == 2.0;
    verdict(
        "criterion 4 (Abel transform)",
        pass,
        &format!("closed form on both sides of 1: {closed_ok}, discrete median {median}"),
    );
}

/// Criterion 5: Krein and resolvent trace identities on random pairs, the
/// g_z formula at three points, and second-order decay of the derivative
/// check.
#[test]
fn criterion_5_trace_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5f1ab);
    let mut worst_krein = 0.0f64;
    let mut worst_resolvent = 0.0f64;
    let mut worst_gz = 0.0f64;

    let gaussian = |x: f64| (-(x / 3.0) * (x / 3.0)).exp();
    let gaussian_prime = |x: f64| -(2.0 * x / 9.0) * (-(x / 3.0) * (x / 3.0)).exp();

    for _ in 0..50 {
        let n = rng.gen_range(1..=12usize);
        let (ap, am) = sampling::random_pair(&mut rng, n, 3.0, 2.0);

        let r = ssf::krein_residual(&ap, &am, ssf::g, |x| (x * x + 1.0).powf(-1.5), 1e-12)
            .unwrap();
        worst_krein = worst_krein.max(r);

        // resolvent at a real point beyond both spectra (a joint gap)
        let z0 = ap.operator_norm().max(am.operator_norm()) + 2.0;
        let r = ssf::krein_residual(
            &ap,
            &am,
            |x| (x - z0).recip(),
            |x| -(x - z0).powi(-2),
            1e-12,
        )
        .unwrap();
        worst_krein = worst_krein.max(r);

        let r = ssf::krein_residual(&ap, &am, gaussian, gaussian_prime, 1e-12).unwrap();
        worst_krein = worst_krein.max(r);

        for _ in 0..20 {
            let z = sampling::random_offaxis_z(&mut rng, 6.0, 0.25);
            let r = ssf::resolvent_trace_residual(&ap, &am, z).unwrap();
            worst_resolvent = worst_resolvent.max(r);
        }
    }

    let zs = [
        Complex64::new(-1.0, 0.0),
        Complex64::new(-4.0, 0.0),
        Complex64::new(-3.0, 2.0),
    ];
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8usize);
        let (ap, am) = sampling::random_pair(&mut rng, n, 2.0, 1.5);
        for &z in &zs {
            let r = ssf::gz_trace_residual(&ap, &am, z).unwrap();
            worst_gz = worst_gz.max(r);
        }
    }

    let mut ratios_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let (ap, am) = sampling::random_pair(&mut rng, 4, 2.0, 1.0);
        let z = Complex64::new(-1.0, 0.0);
        let r1 = ssf::dz_trace_residual(&ap, &am, z, 0.05).unwrap();
        let r2 = ssf::dz_trace_residual(&ap, &am, z, 0.025).unwrap();
        let ratio = r1 / r2;
        ratios_ok &= (3.5..=4.5).contains(&ratio);
    }

    let pass =
        worst_krein < 1e-8 && worst_resolvent < 1e-9 && worst_gz < 1e-8 && ratios_ok;
    verdict(
        "criterion 5 (trace identities)",
        pass,
        &format!(
            "krein {worst_krein:.2e}, resolvent {worst_resolvent:.2e}, g_z {worst_gz:.2e}, h-halving in [3.5, 4.5]: {ratios_ok}"
        ),
    );
}

/// Criterion 6: the double-operator-integral identity in trace norm on
/// random pairs and in closed form on scalars.
#[test]
fn criterion_6_doi_equivalence() {
    let quad = doi::DoiQuadrature::default_acceptance();
    assert_eq!(quad.len(), 400);
    assert_eq!(quad.s_max(), 8.0);

    let am = eig_sym(nalgebra::dmatrix![1.0]).unwrap();
    let ap = eig_sym(nalgebra::dmatrix![3.0]).unwrap();
    let (t_phi, scalar_res) = doi::g_diff_via_doi_with(&ap, &am, &quad).unwrap();
    let scalar_target = 3.0 / 10.0f64.sqrt() - 1.0 / 2.0f64.sqrt();
    let scalar_ok = scalar_res < 1e-8 && (t_phi[(0, 0)] - scalar_target).abs() < 1e-8;

    let mut rng = ChaCha8Rng::seed_from_u64(0xd01);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.gen_range(2..=8usize);
        let (ap, am) = sampling::random_pair(&mut rng, n, 2.0, 1.0);
        let (_, residual) = doi::g_diff_via_doi_with(&ap, &am, &quad).unwrap();
        worst = worst.max(residual);
    }

    let pass = scalar_ok && worst < 1e-6;
    verdict(
        "criterion 6 (DOI equivalence)",
        pass,
        &format!("scalar residual {scalar_res:.2e}, worst of 25 random pairs {worst:.2e}"),
    );
}

/// Criterion 7: eta invariants of the model shift function in all three
/// regularizations, plus the two-route consistencies.
#[test]
fn criterion_7_eta_invariants() {
    let path = scenario::tanh2();
    let a_plus = path.asymptote_plus().unwrap();
    let xi = ssf::xi_counting(&a_plus, path.a_minus()).unwrap();

    let closed = transforms::eta_closed(&xi, 1.0).unwrap();
    let closed_exact = closed == -1.0;

    let zeta_near = transforms::eta_zeta(&xi, 1.0, 1e-3).unwrap();
    let heat_near = transforms::eta_heat(&xi, 1.0, 1e-3).unwrap();

    let mut two_route_ok = true;
    for s in [0.5, 1.0] {
        let direct = transforms::eta_zeta(&xi, 1.0, s).unwrap();
        let via_h = transforms::eta_zeta_from_xi_h(&xi, 1.0, s).unwrap();
        two_route_ok &= (direct - via_h).abs() < 1e-5;
    }
    for t in [0.05, 0.2] {
        let direct = transforms::eta_heat(&xi, 1.0, t).unwrap();
        let via_h = transforms::eta_heat_from_xi_h(&xi, 1.0, t).unwrap();
        two_route_ok &= (direct - via_h).abs() < 1e-4;
    }

    let pass = closed_exact
        && (zeta_near + 1.0).abs() < 1e-3
        && (heat_near + 1.0).abs() < 5e-2
        && two_route_ok;
    verdict(
        "criterion 7 (eta invariants)",
        pass,
        &format!(
            "closed {closed} (exact: {closed_exact}), zeta {zeta_near:.6}, heat {heat_near:.4}, two-route {two_route_ok}"
        ),
    );
}

/// Criterion 8: structural invariants - invariance principle, shared
/// positive spectra of the index pair, subdivision/reparameterization
/// invariance of the flow, and the Whittaker/Bessel companion identity.
#[test]
fn criterion_8_structural_invariants() {
    // xi_invariance == xi_counting on random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut invariance_ok = true;
    for _ in 0..20 {
        let n = rng.gen_range(1..=20usize);
        let (ap, am) = sampling::random_pair(&mut rng, n, 3.0, 2.0);
        let a = ssf::xi_counting(&ap, &am).unwrap();
        let b = ssf::xi_invariance(&ap, &am).unwrap();
        invariance_ok &= a.approx_eq(&b, 1e-8);
    }

    // positive spectra of H_1 and H_2 agree to 1e-8 relative
    let dd = build_dirac(
        &scenario::tanh2(),
        TimeGrid::new(12.0, 400).unwrap(),
        Scheme::Upwind,
        Boundary::Dirichlet,
    )
    .unwrap();
    let (e1, e2) = dd.index_h_spectra().unwrap();
    let floor = 1e-8 * (1.0 + e1.last().copied().unwrap_or(1.0).abs());
    let p1: Vec<f64> = e1.iter().copied().filter(|&x| x > floor).collect();
    let p2: Vec<f64> = e2.iter().copied().filter(|&x| x > floor).collect();
    let mut spectra_ok = p1.len() == p2.len();
    if spectra_ok {
        for (a, b) in p1.iter().zip(&p2) {
            spectra_ok &= (a - b).abs() <= 1e-8 * (1.0 + a.abs());
        }
    }

    // flow invariance under denser sampling and reparameterization
    let gallery: Vec<(&str, OperatorPath)> = vec![
        ("tanh2", scenario::tanh2()),
        ("tanh-mixed", scenario::tanh_mixed()),
        ("rot2", scenario::rot2(-1.0, 2.0, 1.2)),
        ("lattice1d", scenario::lattice1d(12, 1, 0.5, 1.0)),
    ];
    let mut flow_ok = true;
    for (name, path) in &gallery {
        let base = spectral_flow(path, &FlowConfig::default()).unwrap().0;
        let dense = FlowConfig {
            sample_density: 17,
            ..FlowConfig::default()
        };
        flow_ok &= spectral_flow(path, &dense).unwrap().0 == base;

        let r = |t: f64| t * t * t + t;
        let rp = |t: f64| 3.0 * t * t + 1.0;
        let repar = OperatorPath::new(
            path.a_minus().clone(),
            {
                let p = path.clone();
                move |t| p.b_at(r(t)).unwrap()
            },
            {
                let p = path.clone();
                move |t| p.bprime_at(r(t)).unwrap() * rp(t)
            },
            Some(path.b_at(50.0).unwrap()),
            2.3,
        );
        let reflow = spectral_flow(&repar, &FlowConfig::default()).unwrap().0;
        flow_ok &= reflow == base;
        if reflow != base {
            println!("  reparameterization broke {name}: {reflow} vs {base}");
        }
    }

    // W_{0,0}(z) = pi^{-1/2} sqrt(z) K_0(z/2)
    let mut whittaker_ok = true;
    for z in [0.5, 1.0, 2.0] {
        let lhs = transforms::whittaker_w(0.0, 0.0, z).unwrap();
        let rhs =
            std::f64::consts::PI.powf(-0.5) * z.sqrt() * transforms::bessel_k0(z / 2.0).unwrap();
        whittaker_ok &= (lhs - rhs).abs() < 1e-8 * rhs.abs();
    }

    let pass = invariance_ok && spectra_ok && flow_ok && whittaker_ok;
    verdict(
        "criterion 8 (structural invariants)",
        pass,
        &format!(
            "invariance {invariance_ok}, shared positive spectra {spectra_ok}, flow invariance {flow_ok}, Whittaker identity {whittaker_ok}"
        ),
    );
}

/// Criterion 9: truncation convergence of g(A_+) - g(A_-) on the 32-site
/// chain: the trace-norm error decreases along the level sweep and
/// vanishes at full rank.
#[test]
fn criterion_9_truncation_convergence() {
    let path = scenario::lattice1d_default();
    assert_eq!(path.dim(), 32);
    let a_plus = path.asymptote_plus().unwrap();
    let g_diff = a_plus.apply_fn(ssf::g).unwrap() - path.a_minus().apply_fn(ssf::g).unwrap();

    // sweep levels through the midpoints between consecutive |eigenvalues|
    let mut mags: Vec<f64> = path.a_minus().spectrum().iter().map(|l| l.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut levels: Vec<f64> = mags.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    levels.push(mags.last().unwrap() + 1.0);
    let levels: Vec<f64> = levels.into_iter().step_by(4).chain([mags.last().unwrap() + 1.0]).collect();

    let mut errors = Vec::new();
    for &level in &levels {
        let t = path.truncate(level);
        let tp = t.asymptote_plus().unwrap();
        let td = tp.apply_fn(ssf::g).unwrap() - t.a_minus().apply_fn(ssf::g).unwrap();
        errors.push(sflab::matlin::trace_norm(&(&g_diff - td)));
    }

    let mut decreasing = true;
    for w in errors.windows(2) {
        decreasing &= w[1] <= w[0] + 1e-12;
    }
    let strict_overall = errors.first().unwrap() > errors.last().unwrap();
    let zero_at_full = *errors.last().unwrap() == 0.0;

    let pass = decreasing && strict_overall && zero_at_full;
    verdict(
        "criterion 9 (truncation convergence)",
        pass,
        &format!(
            "sweep {:?} -> decreasing {decreasing}, final exactly zero {zero_at_full}",
            errors
                .iter()
                .map(|e| format!("{e:.2e}"))
                .collect::<Vec<_>>()
        ),
    );
}

/// The integer chain holds on every gallery scenario, not just the model.
#[test]
fn chain_equality_across_gallery() {
    let gallery = vec![
        scenario::tanh2(),
        scenario::tanh_mixed(),
        scenario::rot2(-1.0, 2.0, std::f64::consts::FRAC_PI_2),
        scenario::lattice1d(12, 1, 0.5, 1.0),
    ];
    for path in gallery {
        let (flow, _) = spectral_flow(&path, &FlowConfig::default()).unwrap();
        let a_plus = path.asymptote_plus().unwrap();
        let e_minus = morse_projection(path.a_minus());
        let e_plus = morse_projection(&a_plus);
        let pair = ProjectionPair::new(e_minus.clone(), e_plus.clone()).unwrap();
        let idx = fredholm_pair_index(&pair, 1e-8).unwrap();
        let tr = trace(&(e_minus - e_plus)).round() as i64;
        let xi0 = ssf::xi_counting(&a_plus, path.a_minus())
            .unwrap()
            .value_at(0.0);
        assert_eq!(flow, idx);
        assert_eq!(flow, tr);
        assert_eq!(flow as f64, xi0);
    }
    let _ = DMatrix::<f64>::zeros(1, 1);
}
