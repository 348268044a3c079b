//! Seeded random matrix generators for property sweeps and CLI experiments.
//!
//! Everything here is driven by a caller-supplied RNG so that runs with a
//! fixed seed byte-reproduce their reports.

use nalgebra::DMatrix;
use rand::Rng;

use crate::matlin::{eig_sym, SymOp};

/// Random symmetric matrix with entries of size `scale`.
pub fn random_sym(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-scale..scale));
    (&raw + raw.transpose()) * 0.5
}

/// Random symmetric pair `(A_plus, A_minus)` with `||A_plus - A_minus|| <= sep`.
pub fn random_pair(rng: &mut impl Rng, n: usize, scale: f64, sep: f64) -> (SymOp, SymOp) {
    let a_minus = random_sym(rng, n, scale);
    let bump = random_sym(rng, n, 1.0);
    let bump_norm = eig_sym(bump.clone()).unwrap().operator_norm().max(1e-12);
    let a_plus = &a_minus + bump * (sep / bump_norm) * rng.gen_range(0.2..1.0);
    (eig_sym(a_plus).unwrap(), eig_sym(a_minus).unwrap())
}

/// Random complex point with `|Im z| >= min_im`, `|z| <= radius` (roughly).
pub fn random_offaxis_z(rng: &mut impl Rng, radius: f64, min_im: f64) -> num_complex::Complex64 {
    loop {
        let re = rng.gen_range(-radius..radius);
        let im = rng.gen_range(-radius..radius);
        if im.abs() >= min_im {
            return num_complex::Complex64::new(re, im);
        }
    }
}
