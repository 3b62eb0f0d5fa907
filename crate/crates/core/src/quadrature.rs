//! 1-D quadrature rules (tanh-sinh, Gauss-Legendre, Gauss-Hermite) and
//! Chebyshev-Lobatto grids with coefficient transforms. The tanh-sinh rule is
//! the workhorse for endpoint-singular weights like `t^a (ln t)^j`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Nodes and weights of a 1-D rule on its natural interval.
#[derive(Debug, Clone)]
pub struct Quad1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quad1D {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Tanh-sinh (double exponential) rule on (0, 1). The transformation
/// `x = (1 + tanh((pi/2) sinh(u)))/2` pushes endpoint singularities to
/// double-exponentially small weights.
pub fn tanh_sinh_01(level: u32) -> Quad1D {
    let h = 1.0 / f64::from(1u32 << level);
    let u_max = 4.3;
    let n = (u_max / h).ceil() as i64;
    let mut nodes = vec![];
    let mut weights = vec![];
    for k in -n..=n {
        let u = k as f64 * h;
        let s = (PI / 2.0) * u.sinh();
        // sigmoid form stays accurate where (1 + tanh)/2 would cancel
        let x = if s < 0.0 {
            let e = (2.0 * s).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + (-2.0 * s).exp())
        };
        let w = h * (PI / 4.0) * u.cosh() / s.cosh().powi(2);
        if x > 0.0 && x < 1.0 && w.is_finite() && w > 1e-300 {
            nodes.push(x);
            weights.push(w);
        }
    }
    Quad1D { nodes, weights }
}

/// Gauss-Legendre on [-1, 1] by Newton iteration on the recurrence.
pub fn gauss_legendre(n: usize) -> Quad1D {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_eval(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    Quad1D { nodes, weights }
}

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre transplanted to [0, 1].
pub fn gauss_legendre_01(n: usize) -> Quad1D {
    let q = gauss_legendre(n);
    Quad1D {
        nodes: q.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: q.weights.iter().map(|w| 0.5 * w).collect(),
    }
}

/// Gauss-Hermite with weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> Quad1D {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut x = (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0);
    for i in 0..n.div_ceil(2) {
        if i > 0 {
            x = match i {
                1 => x - 1.14 * (n as f64).powf(0.426) / x,
                2 => 1.86 * x - 0.86 * nodes[0],
                3 => 1.91 * x - 0.91 * nodes[1],
                _ => 2.0 * x - nodes[i - 2],
            };
        }
        let mut dp = 0.0;
        for _ in 0..200 {
            let (p, d) = hermite_eval(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-14 * x.abs().max(1.0) {
                break;
            }
        }
        let w = 2.0 / (dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    // pin the zeroth moment exactly at sqrt(pi)
    let total: f64 = weights.iter().sum();
    let fix = PI.sqrt() / total;
    for w in &mut weights {
        *w *= fix;
    }
    Quad1D { nodes, weights }
}

/// Orthonormalized Hermite recurrence: `(h_n(x), h_n'(x))`.
fn hermite_eval(n: usize, x: f64) -> (f64, f64) {
    let mut h0 = PI.powf(-0.25);
    let mut h1 = x * std::f64::consts::SQRT_2 * h0;
    if n == 0 {
        return (h0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let h2 = x * (2.0 / (kf + 1.0)).sqrt() * h1 - (kf / (kf + 1.0)).sqrt() * h0;
        h0 = h1;
        h1 = h2;
    }
    let d = (2.0 * n as f64).sqrt() * h0;
    (h1, d)
}

/// Chebyshev-Lobatto nodes on [0, 1] (degree `n`, `n+1` points, endpoints
/// included; node 0 sits at `t = 1`).
pub fn chebyshev_lobatto_01(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| 0.5 * (1.0 + (PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Values at Lobatto nodes -> Chebyshev coefficients (type-I DCT, small n).
pub fn chebyshev_coeffs(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let mut coeffs = vec![0.0; n + 1];
    for (j, cj) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let scale = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += scale * v * (PI * (j * k) as f64 / n as f64).cos();
        }
        *cj = 2.0 * acc / n as f64;
        if j == 0 || j == n {
            *cj *= 0.5;
        }
    }
    coeffs
}

/// Clenshaw evaluation of a Chebyshev series on [0, 1].
pub fn chebyshev_eval(coeffs: &[f64], x01: f64) -> f64 {
    let x = 2.0 * x01 - 1.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    b1 - x * b2
}

/// Values of `T_j(2x-1)` for `j = 0..=deg` at a point of [0, 1].
pub fn chebyshev_values(deg: usize, x01: f64) -> Vec<f64> {
    let x = 2.0 * x01 - 1.0;
    let mut out = Vec::with_capacity(deg + 1);
    let mut t0 = 1.0;
    let mut t1 = x;
    out.push(t0);
    if deg >= 1 {
        out.push(t1);
    }
    for _ in 2..=deg {
        let t2 = 2.0 * x * t1 - t0;
        out.push(t2);
        t0 = t1;
        t1 = t2;
    }
    out
}

/// Quadrature and evaluation settings shared by the sector pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Chebyshev degree per t-axis for the smooth-factor grids.
    pub cheb_degree: usize,
    /// tanh-sinh level for 1-D moment integrals over [0,1].
    pub de_level: u32,
    /// nodes for the Green-mixture axes (tail / crossing edges).
    pub mixture_nodes: usize,
    /// Gauss-Hermite order per axis for the pointwise cross-check evaluator.
    pub gh_order: usize,
    /// Monte-Carlo fallback sample count for high-dimensional charts.
    pub mc_samples: usize,
    /// seed for the Monte-Carlo fallback (mandatory for reproducibility).
    pub seed: u64,
    /// requested relative tolerance, reported with results.
    pub tolerance: f64,
    /// worker threads for sector-level parallelism (0 = rayon default).
    pub jobs: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            cheb_degree: 16,
            de_level: 7,
            mixture_nodes: 48,
            gh_order: 20,
            mc_samples: 200_000,
            seed: 1,
            tolerance: 1e-8,
            jobs: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let q = tanh_sinh_01(7);
        assert_relative_eq!(q.integrate(|t| t.ln()), -1.0, epsilon = 1e-12);
        assert_relative_eq!(q.integrate(|t| t.powf(-0.5)), 2.0, epsilon = 1e-12);
        // int_0^1 t^2 (ln t)^2 dt = 2/27
        assert_relative_eq!(
            q.integrate(|t| t * t * t.ln() * t.ln()),
            2.0 / 27.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        let q = gauss_legendre_01(8);
        assert_relative_eq!(q.integrate(|x| x.powi(15)), 1.0 / 16.0, epsilon = 1e-13);
        assert_relative_eq!(q.integrate(|_| 1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_hermite_moments() {
        let q = gauss_hermite(20);
        let spi = PI.sqrt();
        assert_relative_eq!(q.integrate(|_| 1.0), spi, epsilon = 1e-12);
        assert_relative_eq!(q.integrate(|x| x * x), spi / 2.0, epsilon = 1e-11);
        assert_relative_eq!(q.integrate(|x| x.powi(4)), spi * 0.75, epsilon = 1e-11);
        // entire non-polynomial integrand: int exp(-x^2) cos(x) = sqrt(pi) e^{-1/4}
        assert_relative_eq!(
            q.integrate(|x| x.cos()),
            spi * (-0.25f64).exp(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn chebyshev_interpolation_roundtrip() {
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let n = 24;
        let nodes = chebyshev_lobatto_01(n);
        let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        let coeffs = chebyshev_coeffs(&values);
        for &x in &[0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
            assert_relative_eq!(chebyshev_eval(&coeffs, x), f(x), epsilon = 1e-12);
        }
        let tv = chebyshev_values(n, 0.37);
        let manual: f64 = coeffs.iter().zip(&tv).map(|(c, t)| c * t).sum();
        assert_relative_eq!(manual, f(0.37), epsilon = 1e-12);
    }
}
