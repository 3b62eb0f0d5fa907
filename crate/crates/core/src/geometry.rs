//! Geometry backend contract and its flat-Euclidean implementation, the
//! Green-function oracles (heat-kernel quadrature and massless closed form),
//! and the polynomial-times-Gaussian test-function family.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::jet::{Jet, JetBasis};
use crate::quadrature::tanh_sinh_01;

/// Capabilities a geometry must provide to drive the amplitude pipeline.
/// `dist2` is the squared distance, `heat_coefficient` the small-time
/// expansion coefficients with `a_0 = 1`, `cutoff` the localization function
/// (identically 1 on flat space).
pub trait GeometryBackend: Send + Sync {
    fn dim(&self) -> usize;
    fn dist2(&self, x: &[f64], y: &[f64]) -> f64;
    fn metric(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn heat_coefficient(&self, k: u32, x: &[f64], y: &[f64]) -> f64;
    fn cutoff(&self, r2: f64) -> f64;
    fn heat_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64>;
    fn has_zero_mode(&self) -> bool;
}

/// Flat Euclidean space with an optional constant metric and mass term.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGeometry {
    pub dim: usize,
    pub mass: f64,
    /// constant symmetric positive matrix; `None` means the identity
    pub metric: Option<Vec<Vec<f64>>>,
}

impl FlatGeometry {
    pub fn new(dim: usize, mass: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::Geometry("dimension must be at least 1".into()));
        }
        if mass < 0.0 {
            return Err(CoreError::Geometry("mass must be nonnegative".into()));
        }
        Ok(FlatGeometry {
            dim,
            mass,
            metric: None,
        })
    }

    pub fn with_metric(dim: usize, mass: f64, metric: Vec<Vec<f64>>) -> Result<Self> {
        let g = FlatGeometry {
            dim,
            mass,
            metric: Some(metric),
        };
        g.check_metric()?;
        Ok(g)
    }

    fn check_metric(&self) -> Result<()> {
        if let Some(m) = &self.metric {
            if m.len() != self.dim || m.iter().any(|r| r.len() != self.dim) {
                return Err(CoreError::Geometry("metric has wrong shape".into()));
            }
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if (m[i][j] - m[j][i]).abs() > 1e-12 {
                        return Err(CoreError::Geometry("metric not symmetric".into()));
                    }
                }
            }
            // positive definiteness via Cholesky
            cholesky_det(m).ok_or_else(|| {
                CoreError::Geometry("metric is not positive definite".into())
            })?;
        }
        Ok(())
    }

    pub fn is_identity_metric(&self) -> bool {
        match &self.metric {
            None => true,
            Some(m) => {
                let mut ok = true;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        let want = if i == j { 1.0 } else { 0.0 };
                        ok &= (m[i][j] - want).abs() < 1e-15;
                    }
                }
                ok
            }
        }
    }

    pub fn det_metric(&self) -> f64 {
        match &self.metric {
            None => 1.0,
            Some(m) => cholesky_det(m).expect("validated metric"),
        }
    }

    pub fn norm2(&self, v: &[f64]) -> f64 {
        match &self.metric {
            None => v.iter().map(|x| x * x).sum(),
            Some(m) => {
                let mut acc = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        acc += m[i][j] * v[i] * v[j];
                    }
                }
                acc
            }
        }
    }
}

fn cholesky_det(m: &[Vec<f64>]) -> Option<f64> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut det = 1.0;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
                det *= sum;
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(det)
}

impl GeometryBackend for FlatGeometry {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dist2(&self, x: &[f64], y: &[f64]) -> f64 {
        let v: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm2(&v)
    }

    fn metric(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        match &self.metric {
            Some(m) => m.clone(),
            None => {
                let mut id = vec![vec![0.0; self.dim]; self.dim];
                for (i, row) in id.iter_mut().enumerate() {
                    row[i] = 1.0;
                }
                id
            }
        }
    }

    fn heat_coefficient(&self, k: u32, _x: &[f64], _y: &[f64]) -> f64 {
        // exact expansion of exp(-t m^2): a_k = (-m^2)^k / k!
        let mut acc = 1.0;
        for i in 1..=k {
            acc *= -(self.mass * self.mass) / f64::from(i);
        }
        acc
    }

    fn cutoff(&self, _r2: f64) -> f64 {
        1.0
    }

    fn heat_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        flat_heat_kernel(self, t, x, y)
    }

    fn has_zero_mode(&self) -> bool {
        false
    }
}

/// `K_t(x,y) = (4 pi t)^(-d/2) exp(-|x-y|_g^2 / (4t) - t m^2)`.
pub fn flat_heat_kernel(geom: &FlatGeometry, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if t <= 0.0 {
        return Err(CoreError::Precondition("heat kernel needs t > 0".into()));
    }
    let r2 = geom.dist2(x, y);
    let d = geom.dim as f64;
    Ok((4.0 * PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t) - t * geom.mass * geom.mass).exp())
}

// ---------------------------------------------------------------------------
// gamma function (Lanczos) and the reciprocal-gamma jet
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for complex argument, Lanczos approximation with
/// reflection for `Re z < 1/2`.
pub fn gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let pi = Complex64::new(PI, 0.0);
        return pi / ((pi * z).sin() * gamma_complex(Complex64::ONE - z));
    }
    let zm1 = z - Complex64::ONE;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += Complex64::new(c, 0.0) / (zm1 + Complex64::new(i as f64, 0.0));
    }
    let t = zm1 + Complex64::new(LANCZOS_G + 0.5, 0.0);
    (2.0 * PI).sqrt() * t.powc(zm1 + Complex64::new(0.5, 0.0)) * (-t).exp() * x
}

pub fn gamma_real(x: f64) -> f64 {
    gamma_complex(Complex64::new(x, 0.0)).re
}

/// Univariate jet of `1/Gamma(1 + sigma)` at `sigma = 0`, coefficients from
/// Richardson-extrapolated central differences of the reciprocal gamma.
pub fn recip_gamma_jet(order: u32) -> Jet<f64> {
    let basis = JetBasis::isotropic(1, order);
    let mut jet = Jet::zero(&basis);
    let f = |x: f64| 1.0 / gamma_real(1.0 + x);
    jet.set_coeff(&[0], 1.0); // Gamma(1) = 1
    let mut fact = 1.0;
    for k in 1..=order {
        fact *= f64::from(k);
        let d = central_derivative(&f, k, 0.25);
        jet.set_coeff(&[k], d / fact);
    }
    jet
}

/// Jet of `prod_e 1/Gamma(1 + sigma_e)` over `dim` variables.
pub fn recip_gamma_product_jet(dim: usize, order: u32) -> Jet<Complex64> {
    let basis = JetBasis::isotropic(dim, order);
    let uni = recip_gamma_jet(order);
    let mut acc = Jet::constant(&basis, Complex64::ONE);
    for e in 0..dim {
        let mut factor = Jet::zero(&basis);
        for k in 0..=order {
            let mut m = vec![0u32; dim];
            m[e] = k;
            factor.set_coeff(&m, Complex64::new(uni.coeff(&[k]), 0.0));
        }
        acc = acc.mul(&factor);
    }
    acc
}

/// k-th derivative at 0 by symmetric differences with two Richardson levels.
fn central_derivative(f: &dyn Fn(f64) -> f64, k: u32, h0: f64) -> f64 {
    let stencil = |h: f64| -> f64 {
        // (delta_h^k f)(0) / h^k with the symmetric k-th difference
        let kf = i64::from(k);
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=kf {
            let x = (kf as f64 / 2.0 - j as f64) * h;
            acc += if j % 2 == 0 { binom } else { -binom } * f(x);
            binom = binom * (kf - j) as f64 / (j + 1) as f64;
        }
        acc / h.powi(k as i32)
    };
    // three grids, two Richardson sweeps: error h^2 -> h^4 -> h^6
    let d1 = stencil(h0);
    let d2 = stencil(h0 / 2.0);
    let d3 = stencil(h0 / 4.0);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

// ---------------------------------------------------------------------------
// Green-function oracles
// ---------------------------------------------------------------------------

/// Brute-force complex power of the Green operator by heat-kernel quadrature,
/// `(1/Gamma(s)) int_0^inf K_t(x,y) t^{s-1} dt`, split at `t = 1`.
pub fn green_power_quadrature(
    geom: &FlatGeometry,
    s: Complex64,
    x: &[f64],
    y: &[f64],
) -> Result<Complex64> {
    let d = geom.dim as f64;
    let r2 = geom.dist2(x, y);
    if r2 == 0.0 {
        return Err(CoreError::Precondition(
            "green power quadrature needs x != y".into(),
        ));
    }
    if geom.mass == 0.0 {
        if s.re <= 0.0 || s.re >= d / 2.0 {
            return Err(CoreError::Precondition(format!(
                "massless convergence region is 0 < Re(s) < d/2, got {}",
                s.re
            )));
        }
    } else if s.re <= 0.0 {
        return Err(CoreError::Precondition(
            "massive convergence region is Re(s) > 0".into(),
        ));
    }
    let m2 = geom.mass * geom.mass;
    let q = tanh_sinh_01(7);
    // head: t in (0,1)
    let mut head = Complex64::ZERO;
    for (&t, &w) in q.nodes.iter().zip(&q.weights) {
        let k = (4.0 * PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t) - t * m2).exp();
        head += w * k * Complex64::new(t, 0.0).powc(s - Complex64::ONE);
    }
    // tail: substitute t = 1/u, dt = du/u^2
    let mut tail = Complex64::ZERO;
    for (&u, &w) in q.nodes.iter().zip(&q.weights) {
        let k = (4.0 * PI).powf(-d / 2.0) * u.powf(d / 2.0) * (-r2 * u / 4.0 - m2 / u).exp();
        tail += w * k * Complex64::new(u, 0.0).powc(-s - Complex64::ONE);
    }
    Ok((head + tail) / gamma_complex(s))
}

/// Massless closed form `Gamma(d/2 - s) / (4^s pi^{d/2} Gamma(s)) r^{2s-d}`.
pub fn green_power_closed_form(d: usize, s: Complex64, r: f64) -> Result<Complex64> {
    if r <= 0.0 {
        return Err(CoreError::Precondition("closed form needs r > 0".into()));
    }
    let df = d as f64;
    if s.re <= 0.0 || s.re >= df / 2.0 {
        return Err(CoreError::Precondition(
            "closed form valid for 0 < Re(s) < d/2".into(),
        ));
    }
    let half_d = Complex64::new(df / 2.0, 0.0);
    let num = gamma_complex(half_d - s);
    let den = Complex64::new(4.0, 0.0).powc(s) * PI.powf(df / 2.0) * gamma_complex(s);
    let rp = Complex64::new(r, 0.0).powc(2.0 * s - Complex64::new(df, 0.0));
    Ok(num / den * rp)
}

/// sigma-jet (order `jet_order`) of the smooth tail
/// `(1/Gamma(s)) int_1^inf K_t(x,y) t^{s-1} dt` at `s = 1`. The s-derivatives
/// insert `(ln t)^j` under the integral; the substitution `t = 1/u` turns the
/// tail into a weight `u^{d/2-2} exp(-m^2/u)` against a Gaussian in `x - y`.
pub fn green_tail(
    geom: &FlatGeometry,
    x: &[f64],
    y: &[f64],
    jet_order: u32,
) -> Result<Jet<f64>> {
    if geom.dim <= 2 && geom.mass == 0.0 {
        return Err(CoreError::Precondition(format!(
            "massless tail diverges for d = {} <= 2; use m > 0 or d >= 3",
            geom.dim
        )));
    }
    let d = geom.dim as f64;
    let r2 = geom.dist2(x, y);
    let m2 = geom.mass * geom.mass;
    let q = tanh_sinh_01(7);
    let basis = JetBasis::isotropic(1, jet_order);
    let mut raw = vec![0.0; jet_order as usize + 1];
    for (&u, &w) in q.nodes.iter().zip(&q.weights) {
        let k = (4.0 * PI).powf(-d / 2.0)
            * u.powf(d / 2.0 - 2.0)
            * (-r2 * u / 4.0 - if m2 > 0.0 { m2 / u } else { 0.0 }).exp();
        // t = 1/u so ln t = -ln u
        let lnt = -u.ln();
        let mut p = 1.0;
        for (j, slot) in raw.iter_mut().enumerate() {
            *slot += w * k * p;
            p *= lnt / (j + 1) as f64;
        }
    }
    let mut integral = Jet::zero(&basis);
    for (j, &v) in raw.iter().enumerate() {
        integral.set_coeff(&[j as u32], v);
    }
    Ok(integral.mul(&recip_gamma_jet(jet_order)))
}

// ---------------------------------------------------------------------------
// test functions
// ---------------------------------------------------------------------------

/// Sparse polynomial over `nvars` coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(vec![0; nvars], c);
        }
        Polynomial { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                c * m
                    .iter()
                    .zip(x)
                    .map(|(&e, &v)| v.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Partial derivative in variable `i`.
    pub fn diff(&self, i: usize) -> Polynomial {
        let mut out = BTreeMap::new();
        for (m, &c) in &self.terms {
            if m[i] == 0 {
                continue;
            }
            let mut mm = m.clone();
            mm[i] -= 1;
            *out.entry(mm).or_insert(0.0) += c * f64::from(m[i]);
        }
        Polynomial { terms: out }
    }

    /// Multiply by the linear factor `a * x_i + b`.
    pub fn mul_linear(&self, i: usize, a: f64, b: f64) -> Polynomial {
        let mut out = BTreeMap::new();
        for (m, &c) in &self.terms {
            if a != 0.0 {
                let mut mm = m.clone();
                mm[i] += 1;
                *out.entry(mm).or_insert(0.0) += c * a;
            }
            if b != 0.0 {
                *out.entry(m.clone()).or_insert(0.0) += c * b;
            }
        }
        out.retain(|_, v| *v != 0.0);
        Polynomial { terms: out }
    }
}

/// One polynomial-times-Gaussian profile on configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionTerm {
    pub poly: Polynomial,
    pub center: Vec<f64>,
    pub width: f64,
}

/// Finite sum of polynomial-times-Gaussian profiles on the configuration
/// space of `points` points in `R^dim`; closed under differentiation, with
/// all derivatives exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub points: usize,
    pub terms: Vec<TestFunctionTerm>,
}

/// Cap on the total derivative order of `eval_deriv`.
pub const DERIV_CAP: usize = 12;

impl TestFunction {
    pub fn nvars(&self) -> usize {
        self.dim * self.points
    }

    /// Plain Gaussian bump `exp(-|x - center|^2 / (2 w^2))`.
    pub fn gaussian(dim: usize, points: usize, center: Vec<f64>, width: f64) -> Result<Self> {
        if center.len() != dim * points {
            return Err(CoreError::DimensionMismatch(center.len(), dim * points));
        }
        if width <= 0.0 {
            return Err(CoreError::Precondition("width must be positive".into()));
        }
        Ok(TestFunction {
            dim,
            points,
            terms: vec![TestFunctionTerm {
                poly: Polynomial::constant(dim * points, 1.0),
                center,
                width,
            }],
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let q: f64 = x
                    .iter()
                    .zip(&t.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                t.poly.eval(x) * (-q / (2.0 * t.width * t.width)).exp()
            })
            .sum()
    }

    /// Exact partial derivative `∂^beta` as a new test function.
    pub fn derivative(&self, beta: &[u32]) -> Result<TestFunction> {
        let total: u32 = beta.iter().sum();
        if total as usize > DERIV_CAP {
            return Err(CoreError::DerivativeCap(total as usize, DERIV_CAP));
        }
        let mut out = self.clone();
        for (i, &b) in beta.iter().enumerate() {
            for _ in 0..b {
                out = out.diff_once(i);
            }
        }
        Ok(out)
    }

    fn diff_once(&self, i: usize) -> TestFunction {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                // (p * G)' = (p' - p (x_i - mu_i)/w^2) G
                let w2 = t.width * t.width;
                let mut poly = t.poly.diff(i);
                let shifted = t.poly.mul_linear(i, -1.0 / w2, t.center[i] / w2);
                for (m, c) in shifted.terms {
                    *poly.terms.entry(m).or_insert(0.0) += c;
                }
                poly.terms.retain(|_, v| *v != 0.0);
                TestFunctionTerm {
                    poly,
                    center: t.center.clone(),
                    width: t.width,
                }
            })
            .collect();
        TestFunction {
            dim: self.dim,
            points: self.points,
            terms,
        }
    }

    pub fn eval_deriv(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        Ok(self.derivative(beta)?.eval(x))
    }

    /// Translate every profile center by `a` per point.
    pub fn translate(&self, a: &[f64]) -> Result<TestFunction> {
        if a.len() != self.dim {
            return Err(CoreError::DimensionMismatch(a.len(), self.dim));
        }
        // polynomials must be recentered too: substitute x -> x - a is not
        // closed for sparse polys in general, so restrict to centers only and
        // shift polynomial variables by binomial expansion
        let mut out = self.clone();
        for t in &mut out.terms {
            for p in 0..self.points {
                for i in 0..self.dim {
                    t.center[p * self.dim + i] += a[i];
                }
            }
            t.poly = shift_polynomial(&t.poly, &repeat_shift(a, self.points));
        }
        Ok(out)
    }

    /// Scales every coefficient.
    pub fn scale(&self, c: f64) -> TestFunction {
        let mut out = self.clone();
        for t in &mut out.terms {
            for v in t.poly.terms.values_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Pointwise sum.
    pub fn add(&self, other: &TestFunction) -> Result<TestFunction> {
        if self.dim != other.dim || self.points != other.points {
            return Err(CoreError::DimensionMismatch(self.nvars(), other.nvars()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.clone());
        Ok(TestFunction {
            dim: self.dim,
            points: self.points,
            terms,
        })
    }

    /// Product test function on the disjoint union of point sets.
    pub fn tensor(&self, other: &TestFunction) -> Result<TestFunction> {
        if self.dim != other.dim {
            return Err(CoreError::DimensionMismatch(self.dim, other.dim));
        }
        let points = self.points + other.points;
        let nv = self.dim * points;
        let mut terms = vec![];
        for t1 in &self.terms {
            for t2 in &other.terms {
                if (t1.width - t2.width).abs() > 1e-14 {
                    return Err(CoreError::Precondition(
                        "tensor of test functions needs equal widths per term".into(),
                    ));
                }
                let mut center = t1.center.clone();
                center.extend_from_slice(&t2.center);
                let mut poly_terms = BTreeMap::new();
                for (m1, c1) in &t1.poly.terms {
                    for (m2, c2) in &t2.poly.terms {
                        let mut m = vec![0u32; nv];
                        m[..self.nvars()].copy_from_slice(m1);
                        m[self.nvars()..].copy_from_slice(m2);
                        *poly_terms.entry(m).or_insert(0.0) += c1 * c2;
                    }
                }
                terms.push(TestFunctionTerm {
                    poly: Polynomial { terms: poly_terms },
                    center,
                    width: t1.width,
                });
            }
        }
        Ok(TestFunction {
            dim: self.dim,
            points,
            terms,
        })
    }
}

fn repeat_shift(a: &[f64], points: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * points);
    for _ in 0..points {
        out.extend_from_slice(a);
    }
    out
}

/// `p(x - a)` expanded in the monomial basis.
fn shift_polynomial(p: &Polynomial, a: &[f64]) -> Polynomial {
    let mut out = Polynomial::default();
    for (m, &c) in &p.terms {
        // expand prod_i (x_i - a_i)^{m_i}
        let mut acc: Vec<(Vec<u32>, f64)> = vec![(vec![0; a.len()], c)];
        for (i, &e) in m.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let mut next = vec![];
            for (mm, cc) in &acc {
                // binomial in x_i
                let mut binom = 1.0;
                for k in 0..=e {
                    let mut m2 = mm.clone();
                    m2[i] += k;
                    let coef = cc * binom * (-a[i]).powi((e - k) as i32);
                    next.push((m2, coef));
                    binom = binom * f64::from(e - k) / f64::from(k + 1);
                }
            }
            acc = next;
        }
        for (mm, cc) in acc {
            if cc != 0.0 {
                *out.terms.entry(mm).or_insert(0.0) += cc;
            }
        }
    }
    out.terms.retain(|_, v| *v != 0.0);
    out
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryJson {
    #[serde(rename = "type")]
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub metric: Option<Vec<Vec<f64>>>,
}

impl GeometryJson {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_flat(&self) -> Result<FlatGeometry> {
        if self.kind != "flat" {
            return Err(CoreError::Parse(format!(
                "unsupported geometry type {:?}; only \"flat\" ships with this crate",
                self.kind
            )));
        }
        match &self.metric {
            None => FlatGeometry::new(self.dim, self.mass),
            Some(m) => FlatGeometry::with_metric(self.dim, self.mass, m.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunctionTermJson {
    pub poly: BTreeMap<String, f64>,
    pub center: Vec<f64>,
    pub width: f64,
}

pub fn testfn_to_json(f: &TestFunction) -> Vec<TestFunctionTermJson> {
    f.terms
        .iter()
        .map(|t| TestFunctionTermJson {
            poly: t
                .poly
                .terms
                .iter()
                .map(|(m, &c)| {
                    (
                        format!(
                            "[{}]",
                            m.iter()
                                .map(|a| a.to_string())
                                .collect::<Vec<_>>()
                                .join(",")
                        ),
                        c,
                    )
                })
                .collect(),
            center: t.center.clone(),
            width: t.width,
        })
        .collect()
}

pub fn testfn_from_json(
    terms: &[TestFunctionTermJson],
    dim: usize,
    points: usize,
) -> Result<TestFunction> {
    let nv = dim * points;
    let mut out = TestFunction {
        dim,
        points,
        terms: vec![],
    };
    for t in terms {
        if t.center.len() != nv {
            return Err(CoreError::Parse(format!(
                "test function center has {} coordinates, expected {}",
                t.center.len(),
                nv
            )));
        }
        let mut poly = Polynomial::default();
        for (key, &c) in &t.poly {
            let inner = key
                .trim()
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| CoreError::Parse(format!("bad exponent key {key:?}")))?;
            let m: Vec<u32> = if inner.trim().is_empty() {
                vec![0; nv]
            } else {
                inner
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u32>()
                            .map_err(|e| CoreError::Parse(format!("bad exponent: {e}")))
                    })
                    .collect::<Result<_>>()?
            };
            if m.len() != nv {
                return Err(CoreError::Parse(format!(
                    "exponent vector {key:?} has wrong length"
                )));
            }
            poly.terms.insert(m, c);
        }
        out.terms.push(TestFunctionTerm {
            poly,
            center: t.center.clone(),
            width: t.width,
        });
    }
    Ok(out)
}
