//! Closed-form Gaussian integrals of polynomial integrands over block
//! variables: `int exp(-1/2 z^T (A ⊗ I_d) z + b.z + c) P(z) dz` on
//! `R^{m*d}`, where `A` is a small symmetric positive matrix over the slot
//! index and `P` is a sum of products of affine forms.
//!
//! Everything is generic over the coefficient ring so the same code path
//! serves plain `f64`/complex evaluations and truncated Taylor jets (forward
//! derivative propagation through Cholesky, solves and moments).

use num_complex::Complex64;

use crate::jet::{Jet, Scalar};

/// Ring operations the Gaussian engine needs. Implemented for floats,
/// complexes and jets.
pub trait GaussElem: Clone + std::fmt::Debug {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn recip_elem(&self) -> Self;
    fn sqrt_elem(&self) -> Self;
    fn exp_elem(&self) -> Self;
    /// `self^(-p/2)` for the determinant power.
    fn pow_neg_half_elem(&self, p: u32) -> Self;
    fn scale(&self, f: f64) -> Self;
    fn zero_like(&self) -> Self;
    fn from_f64_like(&self, x: f64) -> Self;
    fn is_zero_elem(&self) -> bool;
}

impl GaussElem for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip_elem(&self) -> Self {
        1.0 / self
    }
    fn sqrt_elem(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp_elem(&self) -> Self {
        f64::exp(*self)
    }
    fn pow_neg_half_elem(&self, p: u32) -> Self {
        self.powf(-f64::from(p) / 2.0)
    }
    fn scale(&self, f: f64) -> Self {
        self * f
    }
    fn zero_like(&self) -> Self {
        0.0
    }
    fn from_f64_like(&self, x: f64) -> Self {
        x
    }
    fn is_zero_elem(&self) -> bool {
        *self == 0.0
    }
}

impl GaussElem for Complex64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip_elem(&self) -> Self {
        1.0 / self
    }
    fn sqrt_elem(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn exp_elem(&self) -> Self {
        Complex64::exp(*self)
    }
    fn pow_neg_half_elem(&self, p: u32) -> Self {
        // principal branch; our quadratic forms stay right of the cut
        (self.ln() * (-f64::from(p) / 2.0)).exp()
    }
    fn scale(&self, f: f64) -> Self {
        self * f
    }
    fn zero_like(&self) -> Self {
        Complex64::ZERO
    }
    fn from_f64_like(&self, x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn is_zero_elem(&self) -> bool {
        *self == Complex64::ZERO
    }
}

impl<T: Scalar> GaussElem for Jet<T> {
    fn add(&self, o: &Self) -> Self {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Jet::mul(self, o)
    }
    fn recip_elem(&self) -> Self {
        self.recip().expect("jet reciprocal at zero constant term")
    }
    fn sqrt_elem(&self) -> Self {
        self.sqrt().expect("jet sqrt at zero constant term")
    }
    fn exp_elem(&self) -> Self {
        self.exp()
    }
    fn pow_neg_half_elem(&self, p: u32) -> Self {
        self.pow_neg_half(p)
            .expect("jet determinant power at zero constant term")
    }
    fn scale(&self, f: f64) -> Self {
        Jet::scale(self, T::from_f64(f))
    }
    fn zero_like(&self) -> Self {
        Jet::zero(&self.basis)
    }
    fn from_f64_like(&self, x: f64) -> Self {
        Jet::constant(&self.basis, T::from_f64(x))
    }
    fn is_zero_elem(&self) -> bool {
        self.max_norm() == 0.0
    }
}

/// Affine function of the block variables, living on one coordinate axis:
/// `l(z) = sum_i weights[i] * z[i][axis] + offset`.
#[derive(Debug, Clone)]
pub struct AffineForm<S> {
    pub axis: usize,
    pub weights: Vec<S>,
    pub offset: S,
}

/// The integral data. Slot variables `z[0..m]` each carry `dim` coordinates;
/// the quadratic form couples slots identically on every axis.
#[derive(Debug, Clone)]
pub struct GaussianProblem<S> {
    pub slots: usize,
    pub dim: usize,
    /// symmetric m x m matrix, row-major
    pub a_hat: Vec<S>,
    /// linear exponent coefficients, slot-major `[slot][axis]`
    pub lin: Vec<Vec<S>>,
    /// scalar exponent offset
    pub constant: S,
    /// polynomial integrand: sum of coefficient * product of affine forms
    pub terms: Vec<(S, Vec<AffineForm<S>>)>,
}

impl<S: GaussElem> GaussianProblem<S> {
    pub fn new(slots: usize, dim: usize, zero: &S) -> Self {
        GaussianProblem {
            slots,
            dim,
            a_hat: vec![zero.zero_like(); slots * slots],
            lin: vec![vec![zero.zero_like(); dim]; slots],
            constant: zero.zero_like(),
            terms: vec![],
        }
    }

    pub fn a_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.a_hat[i * self.slots + j]
    }

    /// Adds `coeff * w w^T` to the slot quadratic matrix (i.e. the exponent
    /// gains `-coeff/2 * |sum_i w_i z_i|^2` per axis).
    pub fn add_rank_one(&mut self, w: &[S], coeff: f64) {
        for i in 0..self.slots {
            if w[i].is_zero_elem() {
                continue;
            }
            for j in 0..self.slots {
                if w[j].is_zero_elem() {
                    continue;
                }
                let add = w[i].mul(&w[j]).scale(coeff);
                let cur = self.a_hat[i * self.slots + j].clone();
                self.a_hat[i * self.slots + j] = cur.add(&add);
            }
        }
    }

    /// Evaluates the closed form. The quadratic form must be positive
    /// definite (for jets: at the expansion point).
    pub fn integrate(&self) -> S {
        let m = self.slots;
        let d = self.dim;
        let zero = self.constant.zero_like();
        if m == 0 {
            let mut acc = zero.clone();
            for (c, forms) in &self.terms {
                let mut p = c.clone();
                for f in forms {
                    p = p.mul(&f.offset);
                }
                acc = acc.add(&p);
            }
            return acc.mul(&self.constant.exp_elem());
        }
        // Cholesky A = L L^T over the ring
        let mut l = vec![zero.clone(); m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut sum = self.a_hat[i * m + j].clone();
                for k in 0..j {
                    sum = sum.sub(&l[i * m + k].mul(&l[j * m + k]));
                }
                if i == j {
                    l[i * m + j] = sum.sqrt_elem();
                } else {
                    l[i * m + j] = sum.mul(&l[j * m + j].recip_elem());
                }
            }
        }
        let solve = |rhs: &[S]| -> Vec<S> {
            let mut y = vec![zero.clone(); m];
            for i in 0..m {
                let mut sum = rhs[i].clone();
                for k in 0..i {
                    sum = sum.sub(&l[i * m + k].mul(&y[k]));
                }
                y[i] = sum.mul(&l[i * m + i].recip_elem());
            }
            let mut x = vec![zero.clone(); m];
            for i in (0..m).rev() {
                let mut sum = y[i].clone();
                for k in i + 1..m {
                    sum = sum.sub(&l[k * m + i].mul(&x[k]));
                }
                x[i] = sum.mul(&l[i * m + i].recip_elem());
            }
            x
        };

        // determinant power prod L_ii^{-d} with the (2 pi)^{md/2} prefactor
        let mut det = self.constant.from_f64_like(1.0);
        for i in 0..m {
            det = det.mul(&l[i * m + i].mul(&l[i * m + i]));
        }
        let mut pref = det.pow_neg_half_elem(d as u32);
        pref = pref.scale((2.0 * std::f64::consts::PI).powf(0.5 * (m * d) as f64));

        // mean per axis and the completed-square exponent
        let mut mu: Vec<Vec<S>> = vec![];
        for a in 0..d {
            let rhs: Vec<S> = (0..m).map(|i| self.lin[i][a].clone()).collect();
            mu.push(solve(&rhs));
        }
        let mut quad = zero.clone();
        for a in 0..d {
            for i in 0..m {
                if !self.lin[i][a].is_zero_elem() {
                    quad = quad.add(&self.lin[i][a].mul(&mu[a][i]));
                }
            }
        }
        let expo = self.constant.add(&quad.scale(0.5)).exp_elem();

        // moments: each form gets a mean and a solved weight vector
        let mut acc = zero.clone();
        for (c, forms) in &self.terms {
            let n = forms.len();
            assert!(n < usize::BITS as usize, "moment degree too large");
            let mut means = Vec::with_capacity(n);
            let mut solved: Vec<Vec<S>> = Vec::with_capacity(n);
            for f in forms {
                let mut mean = f.offset.clone();
                for i in 0..m {
                    if !f.weights[i].is_zero_elem() {
                        mean = mean.add(&f.weights[i].mul(&mu[f.axis][i]));
                    }
                }
                means.push(mean);
                solved.push(solve(&f.weights));
            }
            let cov = |j: usize, k: usize| -> S {
                if forms[j].axis != forms[k].axis {
                    return zero.clone();
                }
                let mut sum = zero.clone();
                for i in 0..m {
                    if !forms[j].weights[i].is_zero_elem() {
                        sum = sum.add(&forms[j].weights[i].mul(&solved[k][i]));
                    }
                }
                sum
            };
            let moment = moment_recursive(&means, &cov, (1usize << n) - 1, &zero);
            acc = acc.add(&c.mul(&moment));
        }
        pref.mul(&expo).mul(&acc)
    }
}

/// Wick/Isserlis recursion over the subset bitmask of active forms:
/// `E[prod] = mean_last E[rest] + sum_j Cov(j, last) E[rest minus j]`.
fn moment_recursive<S: GaussElem>(
    means: &[S],
    cov: &dyn Fn(usize, usize) -> S,
    mask: usize,
    zero: &S,
) -> S {
    if mask == 0 {
        return zero.from_f64_like(1.0);
    }
    let last = (usize::BITS - 1 - mask.leading_zeros()) as usize;
    let rest = mask & !(1 << last);
    let mut acc = means[last].mul(&moment_recursive(means, cov, rest, zero));
    let mut bits = rest;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let c = cov(j, last);
        if !c.is_zero_elem() {
            acc = acc.add(&c.mul(&moment_recursive(means, cov, rest & !(1 << j), zero)));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetBasis;
    use crate::quadrature::gauss_hermite;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn plain_gaussian_normalization() {
        let mut p = GaussianProblem::new(1, 1, &0.0f64);
        *p.a_mut(0, 0) = 1.0;
        p.terms.push((1.0, vec![]));
        assert_relative_eq!(p.integrate(), (2.0 * PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn second_moment_and_shift() {
        // int exp(-z^2/2) z^2 = sqrt(2 pi)
        let mut p = GaussianProblem::new(1, 1, &0.0f64);
        *p.a_mut(0, 0) = 1.0;
        let form = AffineForm {
            axis: 0,
            weights: vec![1.0],
            offset: 0.0,
        };
        p.terms.push((1.0, vec![form.clone(), form]));
        assert_relative_eq!(p.integrate(), (2.0 * PI).sqrt(), epsilon = 1e-14);

        // int exp(-(z-3)^2/2) z dz = 3 sqrt(2 pi)
        let mut p = GaussianProblem::new(1, 1, &0.0f64);
        *p.a_mut(0, 0) = 1.0;
        p.lin[0][0] = 3.0;
        p.constant = -4.5;
        p.terms.push((
            1.0,
            vec![AffineForm {
                axis: 0,
                weights: vec![1.0],
                offset: 0.0,
            }],
        ));
        assert_relative_eq!(p.integrate(), 3.0 * (2.0 * PI).sqrt(), epsilon = 1e-13);
    }

    /// Pointwise Gauss-Hermite cross-check of a coupled 2-slot, 2-axis
    /// problem with a cubic integrand.
    #[test]
    fn matches_gauss_hermite_tensor_product() {
        let mut p = GaussianProblem::new(2, 2, &0.0f64);
        *p.a_mut(0, 0) = 1.3;
        *p.a_mut(1, 1) = 0.9;
        *p.a_mut(0, 1) = 0.35;
        *p.a_mut(1, 0) = 0.35;
        p.lin[0][0] = 0.2;
        p.lin[1][1] = -0.4;
        p.constant = 0.1;
        let f1 = AffineForm {
            axis: 0,
            weights: vec![1.0, -0.5],
            offset: 0.3,
        };
        let f2 = AffineForm {
            axis: 1,
            weights: vec![0.0, 2.0],
            offset: -0.1,
        };
        p.terms.push((0.7, vec![f1.clone(), f1.clone(), f2.clone()]));
        p.terms.push((-1.1, vec![f2]));
        let closed = p.integrate();

        let gh = gauss_hermite(40);
        let mut brute = 0.0;
        let s = 1.6; // substitution z = s*x keeps the GH weight dominant
        for (&x0, &w0) in gh.nodes.iter().zip(&gh.weights) {
            for (&x1, &w1) in gh.nodes.iter().zip(&gh.weights) {
                for (&x2, &w2) in gh.nodes.iter().zip(&gh.weights) {
                    for (&x3, &w3) in gh.nodes.iter().zip(&gh.weights) {
                        let (z00, z01, z10, z11) = (x0 * s, x1 * s, x2 * s, x3 * s);
                        let jac = s * s * s * s;
                        let quad = -0.5
                            * (1.3 * (z00 * z00 + z01 * z01)
                                + 0.9 * (z10 * z10 + z11 * z11)
                                + 2.0 * 0.35 * (z00 * z10 + z01 * z11))
                            + 0.2 * z00
                            - 0.4 * z11
                            + 0.1;
                        let g1 = z00 - 0.5 * z10 + 0.3;
                        let g2 = 2.0 * z11 - 0.1;
                        let integrand = 0.7 * g1 * g1 * g2 - 1.1 * g2;
                        let unweight = (x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3).exp();
                        brute += w0 * w1 * w2 * w3 * unweight * jac * quad.exp() * integrand;
                    }
                }
            }
        }
        assert_relative_eq!(closed, brute, max_relative = 1e-6);
    }

    #[test]
    fn jet_derivative_of_width() {
        // f(t) = int exp(-(1+t) z^2 / 2) dz = sqrt(2 pi) (1+t)^{-1/2}
        let basis = JetBasis::isotropic(1, 3);
        let one_plus_t = Jet::affine(&basis, 1.0f64, &[1.0]);
        let zero = Jet::zero(&basis);
        let mut p = GaussianProblem::new(1, 1, &zero);
        *p.a_mut(0, 0) = one_plus_t;
        p.terms.push((Jet::constant(&basis, 1.0), vec![]));
        let out = p.integrate();
        let s2pi = (2.0 * PI).sqrt();
        assert_relative_eq!(out.value(), s2pi, epsilon = 1e-13);
        assert_relative_eq!(out.coeff(&[1]), -0.5 * s2pi, epsilon = 1e-13);
        assert_relative_eq!(out.coeff(&[2]), 0.375 * s2pi, epsilon = 1e-13);
        assert_relative_eq!(out.coeff(&[3]), -0.3125 * s2pi, epsilon = 1e-12);
    }
}
