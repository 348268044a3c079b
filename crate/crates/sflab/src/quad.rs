//! Quadrature building blocks shared across the crate: adaptive Simpson for
//! scalar-, complex-, and matrix-valued integrands, composite Gauss-Legendre
//! panels, and Gauss-Chebyshev nodes for the inverse-square-root weight.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Values an adaptive integrator can accumulate.
pub trait Integrable: Clone {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, by: f64) -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrable for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, by: f64) -> Self {
        self * by
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrable for Complex64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, by: f64) -> Self {
        self * by
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Integrable for DMatrix<f64> {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, by: f64) -> Self {
        self * by
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`.  Recursion depth is capped at 40 levels.
pub fn adaptive_simpson<V: Integrable>(f: &dyn Fn(f64) -> V, a: f64, b: f64, tol: f64) -> V {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson_rule(&fa, &fm, &fb, b - a);
    simpson_recurse(f, a, b, &fa, &fm, &fb, &whole, tol, 40)
}

fn simpson_rule<V: Integrable>(fa: &V, fm: &V, fb: &V, width: f64) -> V {
    fa.add(&fm.scale(4.0)).add(fb).scale(width / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<V: Integrable>(
    f: &dyn Fn(f64) -> V,
    a: f64,
    b: f64,
    fa: &V,
    fm: &V,
    fb: &V,
    whole: &V,
    tol: f64,
    depth: usize,
) -> V {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(fa, &flm, fm, m - a);
    let right = simpson_rule(fm, &frm, fb, b - m);
    let refined = left.add(&right);
    let err = refined.sub(whole).magnitude();
    if depth == 0 || err <= 15.0 * tol {
        // standard Richardson correction for Simpson's rule
        refined.add(&refined.sub(whole).scale(1.0 / 15.0))
    } else {
        let l = simpson_recurse(f, a, m, fa, &flm, fm, &left, tol * 0.5, depth - 1);
        let r = simpson_recurse(f, m, b, fm, &frm, fb, &right, tol * 0.5, depth - 1);
        l.add(&r)
    }
}

/// Abscissas and weights of the 10-point Gauss-Legendre rule on `[-1, 1]`.
#[allow(clippy::excessive_precision)]
pub const GL10_NODES: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.1488743389816312,
    0.1488743389816312,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];

#[allow(clippy::excessive_precision)]
pub const GL10_WEIGHTS: [f64; 10] = [
    0.0666713443086881,
    0.1494513491505806,
    0.2190863625159820,
    0.2692667193099963,
    0.2955242247147529,
    0.2955242247147529,
    0.2692667193099963,
    0.2190863625159820,
    0.1494513491505806,
    0.0666713443086881,
];

/// Nodes and weights of a composite 10-point Gauss-Legendre rule with
/// `panels` equal panels over `[a, b]`.
pub fn composite_gl10(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(panels > 0 && b > a);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 10);
    let mut weights = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for k in 0..10 {
            nodes.push(mid + 0.5 * width * GL10_NODES[k]);
            weights.push(0.5 * width * GL10_WEIGHTS[k]);
        }
    }
    (nodes, weights)
}

/// Gauss-Chebyshev (first kind) nodes on `(-1, 1)`.
///
/// The rule `(1/n) * sum f(x_i)` equals `(1/pi) * Int f(x) (1-x^2)^{-1/2} dx`
/// exactly for polynomials of degree `< 2n`.
pub fn gauss_chebyshev_nodes(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| ((2 * i - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

/// Composite trapezoid value over an explicitly given ascending grid.
pub fn trapezoid_on_grid(grid: &[f64], values: &[f64]) -> f64 {
    assert_eq!(grid.len(), values.len());
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-11);
        let v = adaptive_simpson(&|x: f64| 1.0 / x.cosh().powi(2), -20.0, 20.0, 1e-12);
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn gl10_weights_sum_to_two_and_integrate_polynomials() {
        let total: f64 = GL10_WEIGHTS.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        // degree 19 is integrated exactly by 10-point Gauss-Legendre
        for deg in [3usize, 7, 12, 19] {
            let num: f64 = (0..10)
                .map(|k| GL10_WEIGHTS[k] * GL10_NODES[k].powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert_relative_eq!(num, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_gl_matches_simpson() {
        let (nodes, weights) = composite_gl10(-3.0, 5.0, 16);
        let num: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * (0.3 * x).sin().exp())
            .sum();
        let reference = adaptive_simpson(&|x: f64| (0.3 * x).sin().exp(), -3.0, 5.0, 1e-12);
        assert_relative_eq!(num, reference, epsilon = 1e-10);
    }

    #[test]
    fn chebyshev_rule_has_unit_mass() {
        let nodes = gauss_chebyshev_nodes(64);
        let v: f64 = nodes.iter().map(|_| 1.0).sum::<f64>() / 64.0;
        assert_relative_eq!(v, 1.0, epsilon = 1e-15);
        // odd integrand vanishes by node symmetry
        let v: f64 = nodes.iter().map(|&x| x * x * x).sum::<f64>() / 64.0;
        assert!(v.abs() < 1e-15);
    }
}
