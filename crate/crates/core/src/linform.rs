//! Exact rational linear forms on the shifted regulator space.
//!
//! All pole geometry is done over the rationals: a [`LinearForm`] is a vector
//! of coefficients `(c_1, ..., c_p)` representing `sigma -> sum_i c_i sigma_i`
//! where `sigma = s - s_0` are the shifted variables. Forms vanish at the base
//! point by construction (no constant term).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{CoreError, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from(BigInt::from(n))
}

/// A linear form with exact rational coefficients over the shifted variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm {
    coeffs: Vec<Rational>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        LinearForm { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        LinearForm {
            coeffs: vec![Rational::zero(); dim],
        }
    }

    /// The coordinate form `sigma_i` in dimension `dim`.
    pub fn coordinate(i: usize, dim: usize) -> Self {
        let mut c = vec![Rational::zero(); dim];
        c[i] = Rational::one();
        LinearForm { coeffs: c }
    }

    /// Sum of the coordinates indexed by `idx`, e.g. the pole hyperplane of a
    /// divergent subgraph.
    pub fn coordinate_sum(idx: &[usize], dim: usize) -> Self {
        let mut c = vec![Rational::zero(); dim];
        for &i in idx {
            c[i] = Rational::one();
        }
        LinearForm { coeffs: c }
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        LinearForm {
            coeffs: coeffs.iter().map(|&n| rat_int(n)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Rational {
        &self.coeffs[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, q: &Rational) -> Self {
        LinearForm {
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    pub fn add(&self, other: &LinearForm) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(LinearForm {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &LinearForm) -> Result<Self> {
        self.add(&other.scale(&-Rational::one()))
    }

    /// Embed into a larger space, placing coefficient `i` at `slot_map[i]`.
    pub fn embed(&self, slot_map: &[usize], dim: usize) -> Self {
        let mut c = vec![Rational::zero(); dim];
        for (i, coeff) in self.coeffs.iter().enumerate() {
            c[slot_map[i]] = coeff.clone();
        }
        LinearForm { coeffs: c }
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(point)
            .map(|(c, x)| c.to_f64().unwrap() * x)
            .sum()
    }

    pub fn eval_complex(&self, point: &[Complex64]) -> Complex64 {
        self.coeffs
            .iter()
            .zip(point)
            .map(|(c, x)| x * c.to_f64().unwrap())
            .sum()
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap()).collect()
    }

    /// Canonical inner product `Q*(L1, L2) = sum_i c_i d_i`, exact.
    pub fn qstar_inner(&self, other: &LinearForm) -> Result<Rational> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(Rational::zero(), |acc, (a, b)| acc + a * b))
    }

    /// Rewrites the form as `factor * primitive` where `primitive` has coprime
    /// integer coefficients and positive leading coefficient. Returns
    /// `(primitive, factor)`.
    pub fn canonicalize(&self) -> (LinearForm, Rational) {
        if self.is_zero() {
            return (self.clone(), Rational::one());
        }
        // lcm of denominators, then gcd of numerators
        let mut l = BigInt::one();
        for c in &self.coeffs {
            l = num_integer::lcm(l, c.denom().clone());
        }
        let ints: Vec<BigInt> = self.coeffs.iter().map(|c| (c * &l).to_integer()).collect();
        let mut g = BigInt::zero();
        for n in &ints {
            g = num_integer::gcd(g, n.clone());
        }
        let lead = ints.iter().find(|n| !n.is_zero()).unwrap();
        let sign = if lead.is_negative() {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let g = g * sign;
        let prim = LinearForm {
            coeffs: ints
                .iter()
                .map(|n| BigRational::from(n / &g))
                .collect(),
        };
        let factor = BigRational::new(g, l);
        (prim, factor)
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.is_one() {
                write!(f, "s{}", i + 1)?;
            } else {
                write!(f, "{}*s{}", c, i + 1)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Serialize for LinearForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        strs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let strs: Vec<String> = Vec::deserialize(d)?;
        let coeffs = strs
            .iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LinearForm { coeffs })
    }
}

pub fn parse_rational(t: &str) -> Result<Rational> {
    t.parse::<BigRational>()
        .map_err(|e| CoreError::Parse(format!("bad rational {t:?}: {e}")))
}

/// Exact rank of a set of forms by Gaussian elimination over the rationals.
pub fn rank(forms: &[LinearForm]) -> usize {
    if forms.is_empty() {
        return 0;
    }
    let dim = forms[0].dim();
    let mut rows: Vec<Vec<Rational>> = forms.iter().map(|f| f.coeffs.clone()).collect();
    let mut r = 0;
    for col in 0..dim {
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, piv);
        let inv = rows[r][col].recip();
        for c in col..dim {
            rows[r][c] = &rows[r][c] * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for c in col..dim {
                    rows[i][c] = &rows[i][c] - &f * &rows[r][c];
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

pub fn independent(forms: &[LinearForm]) -> bool {
    rank(forms) == forms.len()
}

/// Expresses `target` as a rational combination of `basis` if possible.
/// Returns the coefficients, or `None` when `target` is outside the span.
pub fn express_in_span(target: &LinearForm, basis: &[LinearForm]) -> Option<Vec<Rational>> {
    let dim = target.dim();
    let n = basis.len();
    // Solve basis^T * x = target by elimination over columns [basis | target].
    let mut rows: Vec<Vec<Rational>> = (0..dim)
        .map(|c| {
            let mut row: Vec<Rational> = basis.iter().map(|b| b.coeffs[c].clone()).collect();
            row.push(target.coeffs[c].clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, piv);
        let inv = rows[r][col].recip();
        for c in col..=n {
            rows[r][c] = &rows[r][c] * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for c in col..=n {
                    rows[i][c] = &rows[i][c] - &f * &rows[r][c];
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    // Inconsistent rows mean target is outside the span.
    for row in rows.iter().skip(r) {
        if !row[n].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for (row_idx, &col) in pivots.iter().enumerate() {
        x[col] = rows[row_idx][n].clone();
    }
    Some(x)
}

/// Finds a linear dependence among `forms`: an index `m` and coefficients
/// `c_i` with `forms[m] = sum_{i != m} c_i forms[i]`. Returns `None` when the
/// forms are independent.
pub fn find_dependence(forms: &[LinearForm]) -> Option<(usize, Vec<Rational>)> {
    for m in (0..forms.len()).rev() {
        let others: Vec<LinearForm> = forms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, f)| f.clone())
            .collect();
        if let Some(c) = express_in_span(&forms[m], &others) {
            return Some((m, c));
        }
    }
    None
}

/// Deterministic basis of the Q*-orthogonal complement of `span(forms)`:
/// Gram-Schmidt over the rationals on the standard coordinate forms, in
/// coordinate order, after projecting out the span. Vectors are returned
/// unnormalized but canonicalized to primitive integer coefficients.
pub fn orthogonal_complement(forms: &[LinearForm], dim: usize) -> Vec<LinearForm> {
    let mut basis: Vec<LinearForm> = Vec::new();
    let mut ortho: Vec<LinearForm> = Vec::new(); // orthogonalized span ∪ complement
    for f in forms {
        let v = project_out(f, &ortho);
        if !v.is_zero() {
            ortho.push(v);
        }
    }
    for i in 0..dim {
        let e = LinearForm::coordinate(i, dim);
        let v = project_out(&e, &ortho);
        if !v.is_zero() {
            let (prim, _) = v.canonicalize();
            ortho.push(prim.clone());
            basis.push(prim);
        }
    }
    basis
}

fn project_out(v: &LinearForm, ortho: &[LinearForm]) -> LinearForm {
    let mut acc = v.clone();
    for u in ortho {
        let num = acc.qstar_inner(u).unwrap();
        if num.is_zero() {
            continue;
        }
        let den = u.qstar_inner(u).unwrap();
        acc = acc.sub(&u.scale(&(num / den))).unwrap();
    }
    acc
}

/// Solves the Gram system to write the Q*-orthogonal projection of `target`
/// onto `span(forms)` in the `forms` basis: returns `c` with
/// `target - sum c_i forms_i` orthogonal to every `forms_i`.
pub fn gram_projection_coeffs(target: &LinearForm, forms: &[LinearForm]) -> Vec<Rational> {
    let n = forms.len();
    let mut rows: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = (0..n)
                .map(|j| forms[i].qstar_inner(&forms[j]).unwrap())
                .collect();
            row.push(target.qstar_inner(&forms[i]).unwrap());
            row
        })
        .collect();
    // Gram matrix of independent forms is invertible.
    for col in 0..n {
        let piv = (col..n).find(|&i| !rows[i][col].is_zero()).unwrap();
        rows.swap(col, piv);
        let inv = rows[col][col].recip();
        for c in col..=n {
            rows[col][c] = &rows[col][c] * &inv;
        }
        for i in 0..n {
            if i != col && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for c in col..=n {
                    rows[i][c] = &rows[i][c] - &f * &rows[col][c];
                }
            }
        }
    }
    (0..n).map(|i| rows[i][n].clone()).collect()
}
