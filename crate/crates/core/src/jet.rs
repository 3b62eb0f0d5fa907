//! Truncated multivariate Taylor expansions (jets) with forward-mode
//! propagation through arithmetic, sqrt and exp.
//!
//! A [`JetBasis`] fixes the variable count together with per-axis degree caps
//! and a total-degree cap; a [`Jet`] is a dense coefficient vector over that
//! monomial basis. Every jet carries the truncation order it is valid to;
//! binary operations take the minimum of the operands' orders.

use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{CoreError, Result};

/// Scalar coefficient types jets are generic over.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + PartialEq
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn norm(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// Whether jet multiplication should use compensated accumulation.
    const COMPENSATED: bool;
}

impl Scalar for f64 {
    const COMPENSATED: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

impl Scalar for Complex64 {
    const COMPENSATED: bool = true;
    fn zero() -> Self {
        Complex64::ZERO
    }
    fn one() -> Self {
        Complex64::ONE
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn powi(&self, n: i32) -> Self {
        Complex64::powi(self, n)
    }
}

/// Monomial basis for jets: all exponent vectors `a` with `a[i] <= axis_caps[i]`
/// and `|a| <= total_cap`, in graded lexicographic order.
#[derive(Debug)]
pub struct JetBasis {
    pub dim: usize,
    pub axis_caps: Vec<u32>,
    pub total_cap: u32,
    pub monomials: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// product_table[i * len + j] = index of monomials[i] + monomials[j], or usize::MAX if truncated
    product_table: Vec<usize>,
}

const TRUNCATED: usize = usize::MAX;

impl JetBasis {
    pub fn new(axis_caps: Vec<u32>, total_cap: u32) -> Arc<Self> {
        let dim = axis_caps.len();
        let mut stack = vec![vec![]];
        for cap in &axis_caps {
            let mut next = vec![];
            for m in &stack {
                let used: u32 = m.iter().sum();
                for a in 0..=(*cap).min(total_cap - used) {
                    let mut mm: Vec<u32> = m.clone();
                    mm.push(a);
                    next.push(mm);
                }
            }
            stack = next;
        }
        let mut monomials = stack;
        monomials.sort_by_key(|m| (m.iter().sum::<u32>(), m.clone()));
        let index: HashMap<Vec<u32>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let n = monomials.len();
        let mut product_table = vec![TRUNCATED; n * n];
        for i in 0..n {
            for j in 0..n {
                let sum: Vec<u32> = monomials[i]
                    .iter()
                    .zip(&monomials[j])
                    .map(|(a, b)| a + b)
                    .collect();
                if let Some(&k) = index.get(&sum) {
                    product_table[i * n + j] = k;
                }
            }
        }
        Arc::new(JetBasis {
            dim,
            axis_caps,
            total_cap,
            monomials,
            index,
            product_table,
        })
    }

    /// Isotropic basis: total-degree truncation at `order` in `dim` variables.
    pub fn isotropic(dim: usize, order: u32) -> Arc<Self> {
        JetBasis::cached(vec![order; dim], order)
    }

    /// Globally memoized bases: the hot loops request the same handful of
    /// shapes millions of times and the product table is not free to build.
    pub fn cached(axis_caps: Vec<u32>, total_cap: u32) -> Arc<Self> {
        use std::sync::{Mutex, OnceLock};
        static CACHE: OnceLock<Mutex<HashMap<(Vec<u32>, u32), Arc<JetBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (axis_caps.clone(), total_cap);
        if let Some(b) = cache.lock().unwrap().get(&key) {
            return b.clone();
        }
        let basis = JetBasis::new(axis_caps, total_cap);
        cache.lock().unwrap().insert(key, basis.clone());
        basis
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn index_of(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }
}

fn same_basis(a: &Arc<JetBasis>, b: &Arc<JetBasis>) -> bool {
    Arc::ptr_eq(a, b) || (a.axis_caps == b.axis_caps && a.total_cap == b.total_cap)
}

/// A truncated Taylor expansion over a [`JetBasis`].
#[derive(Debug, Clone)]
pub struct Jet<T: Scalar> {
    pub basis: Arc<JetBasis>,
    pub coeffs: Vec<T>,
    /// Total order the coefficients are valid to (min-propagated).
    pub valid_order: u32,
}

impl<T: Scalar> Jet<T> {
    pub fn zero(basis: &Arc<JetBasis>) -> Self {
        Jet {
            basis: basis.clone(),
            coeffs: vec![T::zero(); basis.len()],
            valid_order: basis.total_cap,
        }
    }

    pub fn constant(basis: &Arc<JetBasis>, v: T) -> Self {
        let mut j = Jet::zero(basis);
        j.coeffs[0] = v;
        j
    }

    /// The affine jet `v + sigma_i`.
    pub fn variable(basis: &Arc<JetBasis>, i: usize, v: T) -> Self {
        let mut j = Jet::zero(basis);
        j.coeffs[0] = v;
        let mut m = vec![0u32; basis.dim];
        m[i] = 1;
        if let Some(k) = basis.index_of(&m) {
            j.coeffs[k] = T::one();
        }
        j
    }

    /// Affine jet `c0 + sum_i lin[i] sigma_i`.
    pub fn affine(basis: &Arc<JetBasis>, c0: T, lin: &[T]) -> Self {
        let mut j = Jet::zero(basis);
        j.coeffs[0] = c0;
        for (i, &l) in lin.iter().enumerate() {
            let mut m = vec![0u32; basis.dim];
            m[i] = 1;
            if let Some(k) = basis.index_of(&m) {
                j.coeffs[k] = l;
            }
        }
        j
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeff(&self, m: &[u32]) -> T {
        self.basis
            .index_of(m)
            .map(|k| self.coeffs[k])
            .unwrap_or_else(T::zero)
    }

    pub fn set_coeff(&mut self, m: &[u32], v: T) {
        if let Some(k) = self.basis.index_of(m) {
            self.coeffs[k] = v;
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Jet<T>) -> Jet<T> {
        debug_assert!(same_basis(&self.basis, &other.basis));
        Jet {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + b)
                .collect(),
            valid_order: self.valid_order.min(other.valid_order),
        }
    }

    pub fn sub(&self, other: &Jet<T>) -> Jet<T> {
        debug_assert!(same_basis(&self.basis, &other.basis));
        Jet {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a - b)
                .collect(),
            valid_order: self.valid_order.min(other.valid_order),
        }
    }

    pub fn neg(&self) -> Jet<T> {
        self.scale(-T::one())
    }

    pub fn scale(&self, s: T) -> Jet<T> {
        Jet {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|&a| a * s).collect(),
            valid_order: self.valid_order,
        }
    }

    pub fn add_assign(&mut self, other: &Jet<T>) {
        debug_assert!(same_basis(&self.basis, &other.basis));
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + b;
        }
        self.valid_order = self.valid_order.min(other.valid_order);
    }

    pub fn mul(&self, other: &Jet<T>) -> Jet<T> {
        debug_assert!(same_basis(&self.basis, &other.basis));
        let n = self.basis.len();
        let table = &self.basis.product_table;
        let mut out = vec![T::zero(); n];
        if T::COMPENSATED {
            // Neumaier accumulation: continuation boundary terms cancel
            // heavily and plain summation costs digits
            let mut comp = vec![T::zero(); n];
            for i in 0..n {
                let a = self.coeffs[i];
                if a == T::zero() {
                    continue;
                }
                let row = &table[i * n..(i + 1) * n];
                for j in 0..n {
                    let k = row[j];
                    if k != TRUNCATED {
                        let x = a * other.coeffs[j];
                        let s = out[k];
                        let t = s + x;
                        comp[k] = comp[k]
                            + if s.norm() >= x.norm() {
                                (s - t) + x
                            } else {
                                (x - t) + s
                            };
                        out[k] = t;
                    }
                }
            }
            for (o, c) in out.iter_mut().zip(&comp) {
                *o = *o + *c;
            }
        } else {
            for i in 0..n {
                let a = self.coeffs[i];
                if a == T::zero() {
                    continue;
                }
                let row = &table[i * n..(i + 1) * n];
                for j in 0..n {
                    let k = row[j];
                    if k != TRUNCATED {
                        out[k] = out[k] + a * other.coeffs[j];
                    }
                }
            }
        }
        Jet {
            basis: self.basis.clone(),
            coeffs: out,
            valid_order: self.valid_order.min(other.valid_order),
        }
    }

    /// Nilpotent part (constant term removed).
    fn nilpotent(&self) -> Jet<T> {
        let mut j = self.clone();
        j.coeffs[0] = T::zero();
        j
    }

    /// Composes a scalar power series `sum_k series[k] u^k` with the nilpotent
    /// part `u` of `self`.
    fn compose_series(&self, series: &[T]) -> Jet<T> {
        let u = self.nilpotent();
        let mut acc = Jet::constant(&self.basis, series[series.len() - 1]);
        for k in (0..series.len() - 1).rev() {
            acc = acc.mul(&u);
            acc.coeffs[0] = acc.coeffs[0] + series[k];
        }
        acc.valid_order = self.valid_order;
        acc
    }

    /// `1/self`; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Jet<T>> {
        let c = self.coeffs[0];
        if c.norm() == 0.0 {
            return Err(CoreError::ZeroDenominator);
        }
        let depth = self.basis.total_cap as usize;
        let inv_c = T::one() / c;
        // 1/(c(1+u/c)) = (1/c) sum (-u/c)^k
        let mut series = Vec::with_capacity(depth + 1);
        let mut p = inv_c;
        for _ in 0..=depth {
            series.push(p);
            p = -(p * inv_c);
        }
        // series[k] corresponds to u^k with u the nilpotent part
        Ok(self.compose_series(&series))
    }

    pub fn div(&self, other: &Jet<T>) -> Result<Jet<T>> {
        Ok(self.mul(&other.recip()?))
    }

    /// Square root, branch following the constant term.
    pub fn sqrt(&self) -> Result<Jet<T>> {
        let c = self.coeffs[0];
        if c.norm() == 0.0 {
            return Err(CoreError::ZeroDenominator);
        }
        let depth = self.basis.total_cap as usize;
        let r = c.sqrt();
        // sqrt(c + u) = sqrt(c) sum binom(1/2, k) (u/c)^k
        let mut series = Vec::with_capacity(depth + 1);
        let mut coef = T::one();
        let inv_c = T::one() / c;
        let mut cpow = T::one();
        for k in 0..=depth {
            series.push(r * coef * cpow);
            let kf = T::from_f64(k as f64);
            let half = T::from_f64(0.5);
            coef = coef * (half - kf) / (kf + T::one());
            cpow = cpow * inv_c;
        }
        Ok(self.compose_series(&series))
    }

    /// `self^(-p/2)` for integer `p >= 0`, used for Gaussian determinant powers.
    pub fn pow_neg_half(&self, p: u32) -> Result<Jet<T>> {
        let c = self.coeffs[0];
        if c.norm() == 0.0 {
            return Err(CoreError::ZeroDenominator);
        }
        let depth = self.basis.total_cap as usize;
        let alpha = -(p as f64) / 2.0;
        let r = exp_scalar_log(c, alpha);
        let mut series = Vec::with_capacity(depth + 1);
        let mut coef = T::one();
        let inv_c = T::one() / c;
        let mut cpow = T::one();
        for k in 0..=depth {
            series.push(r * coef * cpow);
            let kf = T::from_f64(k as f64);
            coef = coef * (T::from_f64(alpha) - kf) / (kf + T::one());
            cpow = cpow * inv_c;
        }
        Ok(self.compose_series(&series))
    }

    pub fn exp(&self) -> Jet<T> {
        let c = self.coeffs[0];
        let depth = self.basis.total_cap as usize;
        let e = c.exp();
        let mut series = Vec::with_capacity(depth + 1);
        let mut fact = T::one();
        for k in 0..=depth {
            series.push(e / fact);
            fact = fact * T::from_f64((k + 1) as f64);
        }
        self.compose_series(&series)
    }

    /// Evaluates the truncated polynomial at a point.
    pub fn eval(&self, point: &[T]) -> T {
        let mut acc = T::zero();
        for (k, m) in self.basis.monomials.iter().enumerate() {
            if self.coeffs[k] == T::zero() {
                continue;
            }
            let mut term = self.coeffs[k];
            for (i, &a) in m.iter().enumerate() {
                if a > 0 {
                    term = term * point[i].powi(a as i32);
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Partial derivative coefficient `∂^m f (0) = m! * coeff(m)`.
    pub fn derivative_at_zero(&self, m: &[u32]) -> T {
        let mut fact = 1.0;
        for &a in m {
            for k in 2..=a {
                fact *= k as f64;
            }
        }
        self.coeff(m) * T::from_f64(fact)
    }

    /// Substitutes jet-valued arguments for the variables: `self` is viewed as
    /// a polynomial and evaluated at `args` (all sharing one target basis).
    pub fn substitute(&self, args: &[Jet<T>], target: &Arc<JetBasis>) -> Jet<T> {
        // cache powers of each argument
        let mut powers: Vec<Vec<Jet<T>>> = args
            .iter()
            .map(|a| vec![Jet::constant(target, T::one()), a.clone()])
            .collect();
        let mut acc = Jet::zero(target);
        for (k, m) in self.basis.monomials.iter().enumerate() {
            let c = self.coeffs[k];
            if c == T::zero() {
                continue;
            }
            let mut term = Jet::constant(target, c);
            for (i, &a) in m.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                while powers[i].len() <= a as usize {
                    let last = powers[i].last().unwrap().clone();
                    powers[i].push(last.mul(&args[i]));
                }
                term = term.mul(&powers[i][a as usize]);
            }
            acc.add_assign(&term);
        }
        acc
    }

    /// Re-expresses the jet over another basis, keeping representable
    /// coefficients and zero-filling the rest.
    pub fn convert(&self, target: &Arc<JetBasis>) -> Jet<T> {
        let mut out = Jet::zero(target);
        out.valid_order = self.valid_order.min(target.total_cap);
        for (k, m) in self.basis.monomials.iter().enumerate() {
            if let Some(t) = target.index_of(m) {
                out.coeffs[t] = self.coeffs[k];
            }
        }
        out
    }
}

/// `c^alpha` for a half-integer `alpha`, valid for `c` off the negative real
/// axis (Gaussian quadratic forms keep determinants there).
fn exp_scalar_log<T: Scalar>(c: T, alpha: f64) -> T {
    let n = c.norm();
    if n == 0.0 {
        return T::zero();
    }
    let unit = c / T::from_f64(n);
    let mag = T::from_f64((alpha * n.ln()).exp());
    let two_alpha = (2.0 * alpha).round() as i32;
    debug_assert!((2.0 * alpha - two_alpha as f64).abs() < 1e-12);
    mag * unit.sqrt().powi(two_alpha)
}

impl Jet<Complex64> {
    pub fn from_real(j: &Jet<f64>) -> Jet<Complex64> {
        Jet {
            basis: j.basis.clone(),
            coeffs: j.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
            valid_order: j.valid_order,
        }
    }
}
