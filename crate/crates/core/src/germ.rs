//! Meromorphic germs with linear poles at a base point, their canonical
//! decomposition into Q*-orthogonal polar terms plus a holomorphic jet, the
//! projection onto the holomorphic part, and external products.
//!
//! Pole geometry (the linear forms) is exact rational arithmetic; jet
//! coefficients are complex floating point.

use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::jet::{Jet, JetBasis};
use crate::linform::{
    express_in_span, find_dependence, gram_projection_coeffs, orthogonal_complement, LinearForm,
    Rational,
};

/// One polar term `h(ell(sigma)) / prod_i L_i(sigma)^{n_i}` with linearly
/// independent denominators and `Q*(L_i, ell_j) = 0` for all i, j.
#[derive(Debug, Clone)]
pub struct PolarTerm {
    /// Canonical primitive denominator forms with multiplicities, sorted.
    pub dens: Vec<(LinearForm, u32)>,
    /// Deterministic basis of the Q*-orthogonal complement of the span of the
    /// denominators; the numerator lives in these coordinates.
    pub ell: Vec<LinearForm>,
    /// Numerator jet in the `ell` variables.
    pub num: Jet<Complex64>,
}

impl PolarTerm {
    pub fn total_multiplicity(&self) -> u32 {
        self.dens.iter().map(|(_, n)| n).sum()
    }

    /// Checks the defining orthogonality exactly.
    pub fn orthogonality_holds(&self) -> bool {
        self.dens.iter().all(|(l, _)| {
            self.ell
                .iter()
                .all(|w| l.qstar_inner(w).map(|q| q.is_zero()).unwrap_or(false))
        })
    }

    pub fn eval(&self, sigma: &[Complex64]) -> Complex64 {
        let w: Vec<Complex64> = self.ell.iter().map(|f| f.eval_complex(sigma)).collect();
        let mut den = Complex64::ONE;
        for (l, n) in &self.dens {
            den *= l.eval_complex(sigma).powu(*n);
        }
        self.num.eval(&w) / den
    }

    /// Numerator re-expressed as a jet in the ambient sigma variables.
    pub fn num_in_sigma(&self, basis: &Arc<JetBasis>) -> Jet<Complex64> {
        let args: Vec<Jet<Complex64>> = self
            .ell
            .iter()
            .map(|f| {
                let lin: Vec<Complex64> = f
                    .coeffs_f64()
                    .into_iter()
                    .map(|c| Complex64::new(c, 0.0))
                    .collect();
                Jet::affine(basis, Complex64::ZERO, &lin)
            })
            .collect();
        self.num.substitute(&args, basis)
    }
}

/// Canonical sum of polar terms plus a truncated holomorphic jet at the base
/// point. All arithmetic is in the shifted variables `sigma = s - s0`.
#[derive(Debug, Clone)]
pub struct MeromorphicGerm {
    pub dim: usize,
    /// Base point in the unshifted variables, recorded as metadata.
    pub base: Vec<Rational>,
    pub polar: Vec<PolarTerm>,
    pub holo: Jet<Complex64>,
}

impl MeromorphicGerm {
    pub fn zero(dim: usize, order: u32) -> Self {
        let basis = JetBasis::isotropic(dim, order);
        MeromorphicGerm {
            dim,
            base: vec![Rational::one(); dim],
            polar: vec![],
            holo: Jet::zero(&basis),
        }
    }

    pub fn from_holo(holo: Jet<Complex64>) -> Self {
        MeromorphicGerm {
            dim: holo.basis.dim,
            base: vec![Rational::one(); holo.basis.dim],
            polar: vec![],
            holo,
        }
    }

    /// The holomorphic projection: kills every polar term.
    pub fn project_holomorphic(&self) -> Jet<Complex64> {
        self.holo.clone()
    }

    /// Evaluation of the germ at a regular point `sigma`.
    pub fn eval(&self, sigma: &[Complex64]) -> Complex64 {
        let mut acc = self.holo.eval(sigma);
        for t in &self.polar {
            acc += t.eval(sigma);
        }
        acc
    }

    /// Distinct pole hyperplanes whose numerators exceed `threshold` in
    /// max-norm.
    pub fn realized_poles(&self, threshold: f64) -> Vec<LinearForm> {
        let mut set = BTreeMap::new();
        for t in &self.polar {
            if t.num.max_norm() > threshold {
                for (l, _) in &t.dens {
                    set.insert(l.clone(), ());
                }
            }
        }
        set.into_keys().collect()
    }

    /// Residue along a simple pole hyperplane: the constant numerator
    /// coefficient summed over polar terms whose denominator list is exactly
    /// `[(form, 1)]`.
    pub fn residue_along(&self, form: &LinearForm) -> Complex64 {
        let (prim, fac) = form.canonicalize();
        let scale = fac.to_f64().unwrap();
        let mut acc = Complex64::ZERO;
        for t in &self.polar {
            if t.dens.len() == 1 && t.dens[0].0 == prim && t.dens[0].1 == 1 {
                acc += t.num.value();
            }
        }
        // num/prim = num*fac/form, so the residue w.r.t. `form` picks up `fac`
        acc * scale
    }

    pub fn add(&self, other: &MeromorphicGerm) -> Result<MeromorphicGerm> {
        if self.dim != other.dim {
            return Err(CoreError::DimensionMismatch(self.dim, other.dim));
        }
        let holo = if self.holo.basis.total_cap <= other.holo.basis.total_cap {
            self.holo.add(&other.holo.convert(&self.holo.basis))
        } else {
            other.holo.add(&self.holo.convert(&other.holo.basis))
        };
        let mut out = MeromorphicGerm {
            dim: self.dim,
            base: self.base.clone(),
            polar: self.polar.clone(),
            holo,
        };
        for t in &other.polar {
            out.absorb_polar(t.clone());
        }
        out.prune(0.0);
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> MeromorphicGerm {
        MeromorphicGerm {
            dim: self.dim,
            base: self.base.clone(),
            polar: self
                .polar
                .iter()
                .map(|t| PolarTerm {
                    dens: t.dens.clone(),
                    ell: t.ell.clone(),
                    num: t.num.scale(c),
                })
                .collect(),
            holo: self.holo.scale(c),
        }
    }

    fn absorb_polar(&mut self, term: PolarTerm) {
        for t in &mut self.polar {
            if t.dens == term.dens {
                if t.num.basis.total_cap >= term.num.basis.total_cap {
                    t.num.add_assign(&term.num.convert(&t.num.basis));
                } else {
                    let mut num = term.num.clone();
                    num.add_assign(&t.num.convert(&term.num.basis));
                    t.num = num;
                }
                return;
            }
        }
        self.polar.push(term);
        self.polar.sort_by(|a, b| a.dens.cmp(&b.dens));
    }

    /// Drops polar terms with numerator max-norm `<= threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.polar.retain(|t| t.num.max_norm() > threshold);
    }

    /// Lifts the germ back to an uncanonicalized sum of terms.
    pub fn to_raw(&self) -> RawGerm {
        let order = self
            .polar
            .iter()
            .map(|t| t.num.basis.total_cap + t.total_multiplicity())
            .chain([self.holo.basis.total_cap])
            .max()
            .unwrap();
        let basis = JetBasis::isotropic(self.dim, order);
        let mut terms = vec![];
        for t in &self.polar {
            terms.push(RawTerm {
                num: t.num_in_sigma(&basis),
                dens: t.dens.clone(),
            });
        }
        terms.push(RawTerm {
            num: self.holo.convert(&basis),
            dens: vec![],
        });
        RawGerm {
            dim: self.dim,
            terms,
        }
    }
}

/// An uncanonicalized term: numerator jet in sigma over a product of linear
/// forms with multiplicities (no independence or orthogonality assumed).
#[derive(Debug, Clone)]
pub struct RawTerm {
    pub num: Jet<Complex64>,
    pub dens: Vec<(LinearForm, u32)>,
}

/// Sum of raw terms.
#[derive(Debug, Clone)]
pub struct RawGerm {
    pub dim: usize,
    pub terms: Vec<RawTerm>,
}

impl RawGerm {
    pub fn new(dim: usize) -> Self {
        RawGerm { dim, terms: vec![] }
    }

    pub fn push(&mut self, term: RawTerm) {
        self.terms.push(term);
    }

    pub fn eval(&self, sigma: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for t in &self.terms {
            let mut den = Complex64::ONE;
            for (l, n) in &t.dens {
                den *= l.eval_complex(sigma).powu(*n);
            }
            acc += t.num.eval(sigma) / den;
        }
        acc
    }
}

/// Merges proportional denominator forms (absorbing scalars into the
/// numerator) and canonicalizes each to a primitive integer form.
fn canonicalize_term(term: &RawTerm) -> Result<RawTerm> {
    let mut map: BTreeMap<LinearForm, u32> = BTreeMap::new();
    let mut scale = Complex64::ONE;
    for (l, n) in &term.dens {
        if l.is_zero() {
            return Err(CoreError::ZeroDenominator);
        }
        let (prim, fac) = l.canonicalize();
        scale /= Complex64::new(fac.to_f64().unwrap(), 0.0).powu(*n);
        *map.entry(prim).or_insert(0) += n;
    }
    Ok(RawTerm {
        num: term.num.scale(scale),
        dens: map.into_iter().collect(),
    })
}

/// Rewrites every term so its denominator forms are linearly independent,
/// preserving the germ. Repeatedly expresses a dependent form as a
/// combination `L_m = sum_i c_i L_i` of the others and replaces
/// `1/(L_1...L_m)` by `sum_i c_i / (prod_{j<m, j != i} L_j * L_m^2)`.
pub fn reduce_dependent_denominators(raw: &RawGerm) -> Result<RawGerm> {
    let mut queue: Vec<RawTerm> = raw
        .terms
        .iter()
        .map(canonicalize_term)
        .collect::<Result<_>>()?;
    let mut done = vec![];
    while let Some(term) = queue.pop() {
        let forms: Vec<LinearForm> = term.dens.iter().map(|(l, _)| l.clone()).collect();
        match find_dependence(&forms) {
            None => done.push(term),
            Some((m, coeffs)) => {
                // one unit of multiplicity moves from each participating form
                // onto the dependent one; numerators only pick up scalars
                for (i, c) in coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let idx = if i < m { i } else { i + 1 };
                    let mut dens = term.dens.clone();
                    dens[m].1 += 1;
                    dens[idx].1 -= 1;
                    dens.retain(|(_, n)| *n > 0);
                    queue.push(RawTerm {
                        num: term.num.scale(Complex64::new(c.to_f64().unwrap(), 0.0)),
                        dens,
                    });
                }
            }
        }
    }
    done.sort_by(|a, b| a.dens.cmp(&b.dens));
    Ok(RawGerm {
        dim: raw.dim,
        terms: done,
    })
}

/// Working item of the canonical decomposition: a scalar times a product of
/// orthogonal numerator factors and leftover denominator-type factors, over a
/// reduced denominator multiset.
struct WorkItem {
    coeff: Complex64,
    /// numerator forms orthogonal to every current denominator form
    w_factors: Vec<(LinearForm, u32)>,
    /// leftover numerator powers of non-orthogonal forms
    l_factors: Vec<(LinearForm, u32)>,
    dens: Vec<(LinearForm, u32)>,
    valid_order: u32,
}

/// Canonical decomposition of a raw germ into Q*-orthogonal polar terms plus
/// a holomorphic jet truncated at `target_order`.
///
/// Errors when a numerator's valid order is below `target_order` plus the
/// total pole multiplicity of its term: lower orders would silently lose
/// holomorphic coefficients.
pub fn decompose(raw: &RawGerm, target_order: u32) -> Result<MeromorphicGerm> {
    let p = raw.dim;
    let reduced = reduce_dependent_denominators(raw)?;
    let holo_basis = JetBasis::isotropic(p, target_order);
    let mut holo = Jet::zero(&holo_basis);
    let mut polar_acc: BTreeMap<Vec<(LinearForm, u32)>, Vec<WorkItem>> = BTreeMap::new();

    for term in &reduced.terms {
        let total_mult: u32 = term.dens.iter().map(|(_, n)| n).sum();
        if term.num.valid_order < target_order + total_mult {
            return Err(CoreError::InsufficientOrder {
                have: term.num.valid_order as usize,
                need: (target_order + total_mult) as usize,
            });
        }
        if term.dens.is_empty() {
            let vo = holo.valid_order.min(term.num.valid_order);
            holo.add_assign(&term.num.convert(&holo_basis));
            holo.valid_order = vo;
            continue;
        }
        let forms: Vec<LinearForm> = term.dens.iter().map(|(l, _)| l.clone()).collect();
        let mults: Vec<u32> = term.dens.iter().map(|(_, n)| *n).collect();
        let k = forms.len();
        let comp = orthogonal_complement(&forms, p);
        // change of coordinates u = B sigma with rows [forms..., comp...]
        let mut rows: Vec<Vec<Rational>> = forms.iter().map(|f| f.coeffs().to_vec()).collect();
        rows.extend(comp.iter().map(|f| f.coeffs().to_vec()));
        let inv = invert_rational(&rows)?;
        // sigma_i as an affine jet in the u variables
        let ubasis = JetBasis::isotropic(p, term.num.basis.total_cap);
        let args: Vec<Jet<Complex64>> = (0..p)
            .map(|i| {
                let lin: Vec<Complex64> = (0..p)
                    .map(|j| Complex64::new(inv[i][j].to_f64().unwrap(), 0.0))
                    .collect();
                Jet::affine(&ubasis, Complex64::ZERO, &lin)
            })
            .collect();
        let num_u = term.num.substitute(&args, &ubasis);

        for (mono_idx, alpha) in ubasis.monomials.iter().enumerate() {
            let c = num_u.coeffs[mono_idx];
            if c == Complex64::ZERO {
                continue;
            }
            // split exponents against the pole multiplicities
            let mut dens = vec![];
            let mut l_factors = vec![];
            let mut w_factors = vec![];
            for i in 0..k {
                if alpha[i] < mults[i] {
                    dens.push((forms[i].clone(), mults[i] - alpha[i]));
                } else if alpha[i] > mults[i] {
                    l_factors.push((forms[i].clone(), alpha[i] - mults[i]));
                }
            }
            for (j, w) in comp.iter().enumerate() {
                if alpha[k + j] > 0 {
                    w_factors.push((w.clone(), alpha[k + j]));
                }
            }
            let item = WorkItem {
                coeff: c,
                w_factors,
                l_factors,
                dens,
                valid_order: term.num.valid_order - total_mult,
            };
            distribute(item, &mut holo, &mut polar_acc);
        }
    }

    // assemble accumulated polar terms per denominator signature
    let mut polar = vec![];
    for (dens, items) in polar_acc {
        let forms: Vec<LinearForm> = dens.iter().map(|(l, _)| l.clone()).collect();
        let ell = orthogonal_complement(&forms, p);
        let max_deg = items
            .iter()
            .map(|it| it.w_factors.iter().map(|(_, n)| n).sum::<u32>())
            .max()
            .unwrap_or(0);
        let nbasis = JetBasis::isotropic(ell.len(), max_deg.max(target_order));
        let mut num = Jet::zero(&nbasis);
        let mut valid = nbasis.total_cap;
        for it in items {
            // each orthogonal factor lies in span(ell); solve exactly
            let mut mono = Jet::constant(&nbasis, it.coeff);
            for (w, pow) in &it.w_factors {
                let coeffs = express_in_span(w, &ell).ok_or_else(|| {
                    CoreError::Graph("orthogonal factor escaped the complement span".into())
                })?;
                let lin: Vec<Complex64> = coeffs
                    .iter()
                    .map(|q| Complex64::new(q.to_f64().unwrap(), 0.0))
                    .collect();
                let form_jet = Jet::affine(&nbasis, Complex64::ZERO, &lin);
                for _ in 0..*pow {
                    mono = mono.mul(&form_jet);
                }
            }
            num.add_assign(&mono);
            valid = valid.min(it.valid_order);
        }
        num.valid_order = valid.min(nbasis.total_cap);
        if num.max_norm() > 0.0 {
            polar.push(PolarTerm { dens, ell, num });
        }
    }
    holo.valid_order = holo.valid_order.min(target_order);
    Ok(MeromorphicGerm {
        dim: p,
        base: vec![Rational::one(); p],
        polar,
        holo,
    })
}

/// Pushes a work item to its resting place: pure holomorphic contributions go
/// to the jet, orthogonal-numerator items to the polar accumulator, and mixed
/// items are rewritten against the Gram projection until they settle.
fn distribute(
    item: WorkItem,
    holo: &mut Jet<Complex64>,
    polar_acc: &mut BTreeMap<Vec<(LinearForm, u32)>, Vec<WorkItem>>,
) {
    let mut stack = vec![item];
    while let Some(mut it) = stack.pop() {
        if it.dens.is_empty() {
            // fully holomorphic: multiply all leftover factors out
            it.w_factors.append(&mut it.l_factors);
            let basis = holo.basis.clone();
            let mut mono = Jet::constant(&basis, it.coeff);
            for (f, pow) in &it.w_factors {
                let lin: Vec<Complex64> = f
                    .coeffs_f64()
                    .into_iter()
                    .map(|x| Complex64::new(x, 0.0))
                    .collect();
                let fj = Jet::affine(&basis, Complex64::ZERO, &lin);
                for _ in 0..*pow {
                    mono = mono.mul(&fj);
                }
            }
            let vo = holo.valid_order.min(it.valid_order);
            holo.add_assign(&mono);
            holo.valid_order = vo.min(holo.basis.total_cap);
            continue;
        }
        if it.l_factors.is_empty() {
            it.dens.sort();
            polar_acc.entry(it.dens.clone()).or_default().push(it);
            continue;
        }
        // rewrite one leftover factor F = sum_j c_j L_j + v with v orthogonal
        // to the current denominator span
        let (f, pow) = it.l_factors.last().unwrap().clone();
        let dforms: Vec<LinearForm> = it.dens.iter().map(|(l, _)| l.clone()).collect();
        let proj = gram_projection_coeffs(&f, &dforms);
        let mut v = f.clone();
        for (j, c) in proj.iter().enumerate() {
            if !c.is_zero() {
                v = v.sub(&dforms[j].scale(c)).unwrap();
            }
        }
        let pop_factor = |it: &WorkItem| -> Vec<(LinearForm, u32)> {
            let mut l = it.l_factors.clone();
            if pow == 1 {
                l.pop();
            } else {
                l.last_mut().unwrap().1 -= 1;
            }
            l
        };
        for (j, c) in proj.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // cancel one pole power of L_j
            let mut dens = it.dens.clone();
            dens[j].1 -= 1;
            let l_factors = pop_factor(&it);
            if dens[j].1 == 0 {
                dens.remove(j);
            }
            let coeff = it.coeff * Complex64::new(c.to_f64().unwrap(), 0.0);
            stack.push(WorkItem {
                coeff,
                w_factors: it.w_factors.clone(),
                l_factors,
                dens,
                valid_order: it.valid_order,
            });
        }
        if !v.is_zero() {
            let mut w = it.w_factors.clone();
            w.push((v, 1));
            stack.push(WorkItem {
                coeff: it.coeff,
                w_factors: w,
                l_factors: pop_factor(&it),
                dens: it.dens.clone(),
                valid_order: it.valid_order,
            });
        }
    }
}

fn invert_rational(rows: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    let n = rows.len();
    let mut a: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.resize(2 * n, Rational::zero());
            row
        })
        .collect();
    for (i, row) in a.iter_mut().enumerate() {
        row[n + i] = Rational::one();
    }
    for col in 0..n {
        let piv = (col..n)
            .find(|&i| !a[i][col].is_zero())
            .ok_or_else(|| CoreError::Graph("singular change of basis".into()))?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for c in 0..2 * n {
            a[col][c] = &a[col][c] * &inv;
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for c in 0..2 * n {
                    a[i][c] = &a[i][c] - &f * &a[col][c];
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Evaluation at the base point: the constant coefficient of a jet.
pub fn evaluate_at_base(jet: &Jet<Complex64>) -> Complex64 {
    jet.value()
}

/// External product of germs in disjoint variable blocks. `g1` occupies the
/// first `g1.dim` slots, `g2` the remaining `g2.dim`. Canonical form is
/// preserved term by term: forms in disjoint blocks are automatically
/// Q*-orthogonal, so `pi(g1 x g2) = pi(g1) x pi(g2)` holds by construction.
pub fn external_product(g1: &MeromorphicGerm, g2: &MeromorphicGerm) -> Result<MeromorphicGerm> {
    let p1 = g1.dim;
    let p2 = g2.dim;
    let p = p1 + p2;
    let map1: Vec<usize> = (0..p1).collect();
    let map2: Vec<usize> = (p1..p).collect();
    let order = g1.holo.basis.total_cap.min(g2.holo.basis.total_cap);
    let holo_basis = JetBasis::isotropic(p, order);

    let embed_jet = |jet: &Jet<Complex64>, map: &[usize], basis: &Arc<JetBasis>| {
        let mut out = Jet::zero(basis);
        out.valid_order = jet.valid_order.min(basis.total_cap);
        for (k, m) in jet.basis.monomials.iter().enumerate() {
            if jet.coeffs[k] == Complex64::ZERO {
                continue;
            }
            let mut mm = vec![0u32; p];
            for (i, &a) in m.iter().enumerate() {
                mm[map[i]] = a;
            }
            if let Some(t) = basis.index_of(&mm) {
                out.coeffs[t] = jet.coeffs[k];
            }
        }
        out
    };

    let mut out = MeromorphicGerm {
        dim: p,
        base: vec![Rational::one(); p],
        polar: vec![],
        holo: embed_jet(&g1.holo, &map1, &holo_basis).mul(&embed_jet(&g2.holo, &map2, &holo_basis)),
    };

    // polar x polar, polar x holo, holo x polar
    let mut push_product = |t1: Option<&PolarTerm>, t2: Option<&PolarTerm>| -> Result<()> {
        let mut dens = vec![];
        if let Some(t) = t1 {
            dens.extend(t.dens.iter().map(|(l, n)| (l.embed(&map1, p), *n)));
        }
        if let Some(t) = t2 {
            dens.extend(t.dens.iter().map(|(l, n)| (l.embed(&map2, p), *n)));
        }
        dens.sort();
        let forms: Vec<LinearForm> = dens.iter().map(|(l, _)| l.clone()).collect();
        let ell = orthogonal_complement(&forms, p);
        let ord1 = t1.map(|t| t.num.basis.total_cap).unwrap_or(order);
        let ord2 = t2.map(|t| t.num.basis.total_cap).unwrap_or(order);
        let nbasis = JetBasis::isotropic(ell.len(), ord1 + ord2);
        // express each factor's numerator in the joint ell coordinates
        let factor = |t: Option<&PolarTerm>,
                      map: &[usize],
                      holo_of_block: &Jet<Complex64>|
         -> Result<Jet<Complex64>> {
            match t {
                Some(t) => {
                    let args: Vec<Jet<Complex64>> = t
                        .ell
                        .iter()
                        .map(|w| {
                            let we = w.embed(map, p);
                            let coeffs = express_in_span(&we, &ell).ok_or_else(|| {
                                CoreError::Graph("product ell escaped complement".into())
                            })?;
                            let lin: Vec<Complex64> = coeffs
                                .iter()
                                .map(|q| Complex64::new(q.to_f64().unwrap(), 0.0))
                                .collect();
                            Ok(Jet::affine(&nbasis, Complex64::ZERO, &lin))
                        })
                        .collect::<Result<_>>()?;
                    Ok(t.num.substitute(&args, &nbasis))
                }
                None => {
                    // whole block is holomorphic; its coordinates are
                    // orthogonal to the other block's denominators
                    let args: Vec<Jet<Complex64>> = map
                        .iter()
                        .map(|&slot| {
                            let e = LinearForm::coordinate(slot, p);
                            let coeffs = express_in_span(&e, &ell).ok_or_else(|| {
                                CoreError::Graph("coordinate escaped complement".into())
                            })?;
                            let lin: Vec<Complex64> = coeffs
                                .iter()
                                .map(|q| Complex64::new(q.to_f64().unwrap(), 0.0))
                                .collect();
                            Ok(Jet::affine(&nbasis, Complex64::ZERO, &lin))
                        })
                        .collect::<Result<_>>()?;
                    Ok(holo_of_block.substitute(&args, &nbasis))
                }
            }
        };
        let f1 = factor(t1, &map1, &g1.holo)?;
        let f2 = factor(t2, &map2, &g2.holo)?;
        let num = f1.mul(&f2);
        if num.max_norm() > 0.0 {
            out.absorb_polar(PolarTerm { dens, ell, num });
        }
        Ok(())
    };

    for t1 in &g1.polar {
        for t2 in &g2.polar {
            push_product(Some(t1), Some(t2))?;
        }
        push_product(Some(t1), None)?;
    }
    for t2 in &g2.polar {
        push_product(None, Some(t2))?;
    }
    Ok(out)
}

/// Multiplies a germ by a holomorphic jet in the same variables and restores
/// canonical form. Needs `h` valid to the germ's pole order plus the output
/// order.
pub fn multiply_by_holomorphic(
    germ: &MeromorphicGerm,
    h: &Jet<Complex64>,
    target_order: u32,
) -> Result<MeromorphicGerm> {
    if h.basis.dim != germ.dim {
        return Err(CoreError::DimensionMismatch(h.basis.dim, germ.dim));
    }
    let max_mult: u32 = germ
        .polar
        .iter()
        .map(|t| t.total_multiplicity())
        .max()
        .unwrap_or(0);
    if h.valid_order < max_mult + target_order {
        return Err(CoreError::InsufficientOrder {
            have: h.valid_order as usize,
            need: (max_mult + target_order) as usize,
        });
    }
    let raw = germ.to_raw();
    let order = raw
        .terms
        .iter()
        .map(|t| t.num.basis.total_cap)
        .max()
        .unwrap_or(0)
        .max(h.basis.total_cap);
    let basis = JetBasis::isotropic(germ.dim, order);
    let hb = h.convert(&basis);
    let mut out = RawGerm::new(germ.dim);
    for t in raw.terms {
        out.push(RawTerm {
            num: t.num.convert(&basis).mul(&hb),
            dens: t.dens,
        });
    }
    decompose(&out, target_order)
}

// ---------------------------------------------------------------------------
// serialization: the germ JSON schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DenJson {
    coeffs: Vec<String>,
    mult: u32,
}

#[derive(Serialize, Deserialize)]
struct JetJson {
    order: u32,
    coeffs: BTreeMap<String, (f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct PolarJson {
    dens: Vec<DenJson>,
    num: JetJson,
}

#[derive(Serialize, Deserialize)]
pub struct GermJson {
    pub dim: usize,
    base: Vec<String>,
    polar: Vec<PolarJson>,
    holo: JetJson,
}

fn jet_to_json(jet: &Jet<Complex64>) -> JetJson {
    let mut coeffs = BTreeMap::new();
    for (k, m) in jet.basis.monomials.iter().enumerate() {
        let c = jet.coeffs[k];
        if c != Complex64::ZERO {
            let key = format!(
                "[{}]",
                m.iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            coeffs.insert(key, (c.re, c.im));
        }
    }
    JetJson {
        order: jet.valid_order,
        coeffs,
    }
}

fn jet_from_json(j: &JetJson, dim: usize) -> Result<Jet<Complex64>> {
    let mut max_order = j.order;
    let mut parsed: Vec<(Vec<u32>, Complex64)> = vec![];
    for (key, (re, im)) in &j.coeffs {
        let inner = key
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| CoreError::Parse(format!("bad multi-index {key:?}")))?;
        let m: Vec<u32> = if inner.trim().is_empty() {
            vec![]
        } else {
            inner
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u32>()
                        .map_err(|e| CoreError::Parse(format!("bad exponent {t:?}: {e}")))
                })
                .collect::<Result<_>>()?
        };
        if m.len() != dim {
            return Err(CoreError::Parse(format!(
                "multi-index {key:?} has wrong length for dim {dim}"
            )));
        }
        max_order = max_order.max(m.iter().sum());
        parsed.push((m, Complex64::new(*re, *im)));
    }
    let basis = JetBasis::isotropic(dim, max_order);
    let mut jet = Jet::zero(&basis);
    jet.valid_order = j.order;
    for (m, c) in parsed {
        jet.set_coeff(&m, c);
    }
    Ok(jet)
}

pub fn germ_to_json(g: &MeromorphicGerm) -> GermJson {
    GermJson {
        dim: g.dim,
        base: g.base.iter().map(|b| b.to_string()).collect(),
        polar: g
            .polar
            .iter()
            .map(|t| {
                let basis =
                    JetBasis::isotropic(g.dim, t.num.basis.total_cap);
                PolarJson {
                    dens: t
                        .dens
                        .iter()
                        .map(|(l, n)| DenJson {
                            coeffs: l.coeffs().iter().map(|c| c.to_string()).collect(),
                            mult: *n,
                        })
                        .collect(),
                    num: jet_to_json(&t.num_in_sigma(&basis)),
                }
            })
            .collect(),
        holo: jet_to_json(&g.holo),
    }
}

pub fn germ_from_json(j: &GermJson) -> Result<MeromorphicGerm> {
    let p = j.dim;
    let base = j
        .base
        .iter()
        .map(|b| crate::linform::parse_rational(b))
        .collect::<Result<Vec<_>>>()?;
    let holo = jet_from_json(&j.holo, p)?;
    let mut out = MeromorphicGerm {
        dim: p,
        base,
        polar: vec![],
        holo,
    };
    for pj in &j.polar {
        let dens: Vec<(LinearForm, u32)> = pj
            .dens
            .iter()
            .map(|d| {
                let coeffs = d
                    .coeffs
                    .iter()
                    .map(|c| crate::linform::parse_rational(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok((LinearForm::new(coeffs), d.mult))
            })
            .collect::<Result<_>>()?;
        // rebuild the canonical ell basis, then re-express the sigma-space
        // numerator in it
        let num_sigma = jet_from_json(&pj.num, p)?;
        let forms: Vec<LinearForm> = dens.iter().map(|(l, _)| l.clone()).collect();
        let ell = orthogonal_complement(&forms, p);
        let mut rows: Vec<Vec<Rational>> = forms.iter().map(|f| f.coeffs().to_vec()).collect();
        rows.extend(ell.iter().map(|f| f.coeffs().to_vec()));
        let inv = invert_rational(&rows)?;
        let nbasis = JetBasis::isotropic(ell.len(), num_sigma.basis.total_cap);
        let args: Vec<Jet<Complex64>> = (0..p)
            .map(|i| {
                // sigma_i = sum_j inv[i][j] u_j; a valid polar numerator only
                // involves the ell block, so the denominator block is dropped
                let lin: Vec<Complex64> = (forms.len()..p)
                    .map(|jj| Complex64::new(inv[i][jj].to_f64().unwrap(), 0.0))
                    .collect();
                Jet::affine(&nbasis, Complex64::ZERO, &lin)
            })
            .collect();
        let num = num_sigma.substitute(&args, &nbasis);
        out.absorb_polar(PolarTerm { dens, ell, num });
    }
    Ok(out)
}
