//! Meromorphic continuation of cube integrals by integration by parts, and
//! the assembly of labelled and full amplitudes as meromorphic germs.
//!
//! A sector contributes `int_{[0,1]^E} prod_e t_e^{c_e(s) - 1} chi(t) dt`
//! with `c_e(s) = L_e(sigma) + a_e`, `a_e` integers. Per axis, `depth_e`
//! integrations by parts move the exponent to a positive offset; boundary
//! terms pick up `1/(c_e ... (c_e + i))` factors whose vanishing entries are
//! the pole denominators. The smooth factor is sampled once on a Chebyshev
//! tensor grid (jets in t up to the needed depths), after which every
//! boundary value, remainder integral and log-moment is a cheap contraction.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;


use crate::blowup::{ChiClosedForm, ExtraCoupling, SectorChart};
use crate::error::{CoreError, Result};
use crate::gauss::{AffineForm, GaussianProblem};
use crate::geometry::{gamma_complex, FlatGeometry, GeometryBackend, TestFunction};
use crate::germ::{decompose, MeromorphicGerm, RawGerm, RawTerm};
use crate::graph::{FeynmanGraph, LabelledGraph, Permutations};
use crate::jet::{Jet, JetBasis};
use crate::linform::LinearForm;
use crate::quadrature::{
    chebyshev_coeffs, chebyshev_lobatto_01, tanh_sinh_01, QuadratureConfig,
};

/// Cap on edge counts of a single amplitude computation (E! sectors).
pub const AMPLITUDE_EDGE_CAP: usize = 6;

/// Smooth factor on the unit cube: anything that can produce t-jets at grid
/// points. Implemented by the closed-form chi evaluator, Green-mixture
/// wrappers and plain polynomials (the exact oracle for tests).
pub trait SmoothFactor: Sync {
    fn axes(&self) -> usize;
    fn jet_at(&self, t: &[f64], caps: &[u32]) -> Result<Jet<f64>>;
    /// Exact per-axis polynomial degree, when the factor is a polynomial;
    /// lets the grid be exact instead of merely converged.
    fn poly_degree(&self) -> Option<Vec<usize>> {
        None
    }
}

/// Multivariate polynomial in the cube variables with f64 coefficients.
#[derive(Debug, Clone)]
pub struct PolyFactor {
    pub axes: usize,
    /// (exponents, coefficient)
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl PolyFactor {
    pub fn eval(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c * m
                    .iter()
                    .zip(t)
                    .map(|(&e, &v)| v.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

impl SmoothFactor for PolyFactor {
    fn axes(&self) -> usize {
        self.axes
    }

    fn jet_at(&self, t: &[f64], caps: &[u32]) -> Result<Jet<f64>> {
        let total = caps.iter().sum();
        let basis = JetBasis::cached(caps.to_vec(), total);
        let vars: Vec<Jet<f64>> = (0..self.axes)
            .map(|k| Jet::variable(&basis, k, t[k]))
            .collect();
        let mut acc = Jet::zero(&basis);
        for (m, c) in &self.terms {
            let mut term = Jet::constant(&basis, *c);
            for (k, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    term = term.mul(&vars[k]);
                }
            }
            acc.add_assign(&term);
        }
        Ok(acc)
    }

    fn poly_degree(&self) -> Option<Vec<usize>> {
        let mut deg = vec![0usize; self.axes];
        for (m, _) in &self.terms {
            for (k, &e) in m.iter().enumerate() {
                deg[k] = deg[k].max(e as usize);
            }
        }
        Some(deg)
    }
}

impl<'a> SmoothFactor for ChiClosedForm<'a> {
    fn axes(&self) -> usize {
        self.chart.edge_count()
    }

    fn jet_at(&self, t: &[f64], caps: &[u32]) -> Result<Jet<f64>> {
        ChiClosedForm::jet_at(self, t, caps)
    }
}

/// Green-kernel mixture wrapper: tail factors on ambient edges are folded as
/// 1-D integrals over Gaussian couplings; the chi jets are summed over a
/// tensor grid of mixture nodes.
pub struct MixtureChi<'a> {
    pub base: ChiClosedForm<'a>,
    /// per mixture axis: the coupled ambient vertex pair and the quadrature
    /// nodes (coupling coefficient, weight) with the kernel weight folded in
    pub mixtures: Vec<(usize, usize, Vec<(f64, f64)>)>,
}

impl<'a> SmoothFactor for MixtureChi<'a> {
    fn axes(&self) -> usize {
        self.base.chart.edge_count()
    }

    fn jet_at(&self, t: &[f64], caps: &[u32]) -> Result<Jet<f64>> {
        let total = caps.iter().sum();
        let basis = JetBasis::cached(caps.to_vec(), total);
        let mut acc = Jet::zero(&basis);
        let mut idx = vec![0usize; self.mixtures.len()];
        loop {
            let mut weight = 1.0;
            let mut extra = vec![];
            for (k, &(vi, vj, ref nodes)) in self.mixtures.iter().enumerate() {
                let (coef, w) = nodes[idx[k]];
                weight *= w;
                extra.push(ExtraCoupling { vi, vj, coef });
            }
            let mut chi = self.base.clone_with_extra(extra);
            chi.prefactor *= weight;
            acc.add_assign(&chi.jet_at(t, caps)?);
            // advance the mixture multi-index
            let mut k = 0;
            loop {
                if k == self.mixtures.len() {
                    return Ok(acc);
                }
                idx[k] += 1;
                if idx[k] < self.mixtures[k].2.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

impl<'a> ChiClosedForm<'a> {
    fn clone_with_extra(&self, extra: Vec<ExtraCoupling>) -> ChiClosedForm<'a> {
        ChiClosedForm {
            chart: self.chart,
            geom: self.geom,
            ambient: self.ambient.clone(),
            testfn: self.testfn,
            extra,
            prefactor: self.prefactor,
        }
    }
}

/// Mixture nodes for the smooth Green tail `int_1^inf K_t t^{s-1} dt` at
/// `s = 1`: substituting `u = 1/t` gives couplings `u/4` against the weight
/// `(4 pi)^{-d/2} u^{d/2 - 2} e^{-m^2/u}` on (0, 1).
pub fn green_tail_mixture(geom: &FlatGeometry, level: u32) -> Result<Vec<(f64, f64)>> {
    if geom.dim <= 2 && geom.mass == 0.0 {
        return Err(CoreError::Precondition(
            "massless Green tail diverges for d <= 2".into(),
        ));
    }
    let d = geom.dim as f64;
    let m2 = geom.mass * geom.mass;
    let q = tanh_sinh_01(level);
    Ok(q
        .nodes
        .iter()
        .zip(&q.weights)
        .map(|(&u, &w)| {
            let kernel = (4.0 * std::f64::consts::PI).powf(-d / 2.0)
                * u.powf(d / 2.0 - 2.0)
                * if m2 > 0.0 { (-m2 / u).exp() } else { 1.0 };
            (u / 4.0, w * kernel)
        })
        .collect())
}

/// Mixture nodes for the full Green kernel at `s = 1`,
/// `G(x,y) = int_0^inf K_t dt`: head (t in (0,1], coupling 1/(4t)) plus tail.
/// Only valid paired with separated supports. Used by the locality check to
/// fold crossing edges.
pub fn green_full_mixture(geom: &FlatGeometry, level: u32) -> Result<Vec<(f64, f64)>> {
    let d = geom.dim as f64;
    if geom.dim <= 2 && geom.mass == 0.0 {
        return Err(CoreError::Precondition(
            "massless full Green mixture diverges for d <= 2".into(),
        ));
    }
    let m2 = geom.mass * geom.mass;
    let q = tanh_sinh_01(level);
    let mut nodes = green_tail_mixture(geom, level)?;
    // head: t in (0,1], coupling 1/(4t), weight (4 pi t)^{-d/2} e^{-t m^2}.
    // Couplings beyond the conditioning cap are dropped: paired with
    // separated supports their Gaussians are zero to double precision.
    const COUPLING_CAP: f64 = 1e10;
    for (&t, &w) in q.nodes.iter().zip(&q.weights) {
        let coupling = 1.0 / (4.0 * t);
        if coupling > COUPLING_CAP {
            continue;
        }
        let kernel = (4.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-t * m2).exp();
        nodes.push((coupling, w * kernel));
    }
    Ok(nodes)
}

/// Cube integral specification: per-axis exponent data and the smooth factor.
pub struct CubeIntegralSpec<'a> {
    /// number of germ variables
    pub dim: usize,
    /// per axis: sigma part of the exponent
    pub sigma_forms: Vec<LinearForm>,
    /// per axis: integer offset at the base point
    pub offsets: Vec<i64>,
    pub factor: &'a dyn SmoothFactor,
    /// target sigma-jet order of the result
    pub order: u32,
    pub config: &'a QuadratureConfig,
    /// content hash for the on-disk smooth-factor grid cache (see
    /// `GERMRENORM_CACHE_DIR`); `None` disables caching
    pub cache_key: Option<String>,
}

/// Loads or stores Chebyshev node grids under `GERMRENORM_CACHE_DIR`.
fn grid_cache_path(key: &str) -> Option<std::path::PathBuf> {
    let dir = std::env::var_os("GERMRENORM_CACHE_DIR")?;
    let dir = std::path::PathBuf::from(dir);
    std::fs::create_dir_all(&dir).ok()?;
    Some(dir.join(format!("chi-grid-{key}.json")))
}

fn load_cached_grid(key: &str, nodes: usize, width: usize) -> Option<Vec<Vec<f64>>> {
    let path = grid_cache_path(key)?;
    let text = std::fs::read_to_string(path).ok()?;
    let grid: Vec<Vec<f64>> = serde_json::from_str(&text).ok()?;
    if grid.len() == nodes && grid.iter().all(|j| j.len() == width) {
        Some(grid)
    } else {
        None
    }
}

fn store_cached_grid(key: &str, grid: &[Vec<f64>]) {
    if let Some(path) = grid_cache_path(key) {
        if let Ok(text) = serde_json::to_string(grid) {
            let _ = std::fs::write(path, text);
        }
    }
}

/// Content hash for a sector's smooth-factor grid.
#[allow(clippy::too_many_arguments)]
pub fn sector_cache_key(
    sub: &LabelledGraph,
    perm: &[usize],
    d: usize,
    geom: &FlatGeometry,
    testfn: &TestFunction,
    tails: &[(usize, usize)],
    crossings: &[(usize, usize)],
    cfg: &QuadratureConfig,
) -> String {
    use sha2::{Digest, Sha256};
    let payload = serde_json::json!({
        "vertices": sub.graph.vertices(),
        "edges": sub.graph.edges(),
        "labels": sub.labels,
        "perm": perm,
        "dim": d,
        "mass": geom.mass,
        "testfn": crate::geometry::testfn_to_json(testfn),
        "tails": tails,
        "crossings": crossings,
        "cheb": cfg.cheb_degree,
        "level": cfg.de_level,
    });
    let mut hasher = Sha256::new();
    hasher.update(payload.to_string().as_bytes());
    let out = hasher.finalize();
    out.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Per-sector diagnostics: realized pole slots and the Chebyshev tail mass
/// (a crude interpolation-error indicator).
#[derive(Debug, Clone, Serialize)]
pub struct SectorDiagnostics {
    pub permutation: Vec<usize>,
    pub divergent_slots: usize,
    pub cheb_tail: f64,
}

/// Per-axis role of one integration-by-parts term.
#[derive(Clone, Copy, PartialEq)]
enum Role {
    Boundary(u32),
    Remainder,
}

/// The precomputed sector data: Chebyshev coefficient tensors of the smooth
/// factor's derivatives, depths, grid shape and the term enumeration. Both
/// the germ extraction and pointwise continuation evaluation consume it.
struct CubeData {
    ne: usize,
    depths: Vec<u32>,
    dims: Vec<usize>,
    beta_basis: std::sync::Arc<JetBasis>,
    coeff_tensors: Vec<Vec<f64>>,
    choices: Vec<Vec<Role>>,
    divergent: usize,
    cheb_tail: f64,
}

fn build_cube_data(spec: &CubeIntegralSpec) -> Result<CubeData> {
    let ne = spec.sigma_forms.len();
    if spec.offsets.len() != ne || spec.factor.axes() != ne {
        return Err(CoreError::Precondition("cube spec shape mismatch".into()));
    }
    let depths: Vec<u32> = spec
        .offsets
        .iter()
        .map(|&a| if a >= 1 { 0 } else { (1 - a) as u32 })
        .collect();
    let divergent = depths.iter().filter(|&&k| k > 0).count();

    // Chebyshev grids per axis (exact degree for polynomial factors)
    let degrees: Vec<usize> = match spec.factor.poly_degree() {
        Some(d) => d.iter().map(|&x| x.max(1)).collect(),
        None => vec![spec.config.cheb_degree; ne],
    };
    let grid_axes: Vec<Vec<f64>> = degrees.iter().map(|&n| chebyshev_lobatto_01(n)).collect();
    let dims: Vec<usize> = degrees.iter().map(|&n| n + 1).collect();
    let total_nodes: usize = dims.iter().product();

    // jets at all grid nodes, memoized on disk when a cache key is present
    let caps = depths.clone();
    let beta_basis = JetBasis::cached(caps.clone(), caps.iter().sum());
    let cached = spec
        .cache_key
        .as_deref()
        .and_then(|k| load_cached_grid(k, total_nodes, beta_basis.len()));
    let node_jets: Vec<Vec<f64>> = match cached {
        Some(grid) => grid,
        None => {
            let mut node_jets = Vec::with_capacity(total_nodes);
            for flat in 0..total_nodes {
                let mut rem = flat;
                let mut t = vec![0.0; ne];
                for (k, &dim_k) in dims.iter().enumerate() {
                    t[k] = grid_axes[k][rem % dim_k];
                    rem /= dim_k;
                }
                let jet = spec.factor.jet_at(&t, &caps)?;
                node_jets.push(jet.coeffs.clone());
            }
            if let Some(key) = spec.cache_key.as_deref() {
                store_cached_grid(key, &node_jets);
            }
            node_jets
        }
    };

    // coefficient tensors per derivative pattern beta: DCT along every axis
    let mut coeff_tensors: Vec<Vec<f64>> = Vec::with_capacity(beta_basis.len());
    let mut cheb_tail = 0.0f64;
    for (b_idx, beta) in beta_basis.monomials.iter().enumerate() {
        // beta! converts jet coefficients into derivative values
        let mut bfact = 1.0;
        for &b in beta {
            for k in 2..=b {
                bfact *= f64::from(k);
            }
        }
        let mut tensor: Vec<f64> = node_jets.iter().map(|j| j[b_idx] * bfact).collect();
        for axis in 0..ne {
            tensor = dct_axis(&tensor, &dims, axis);
        }
        // crude interpolation-error indicator: mass in the top two indices
        let mut tail = 0.0;
        let mut norm = 0.0;
        for (flat, &v) in tensor.iter().enumerate() {
            let mut rem = flat;
            let mut top = false;
            for (k, &dim_k) in dims.iter().enumerate() {
                let idx = rem % dim_k;
                rem /= dim_k;
                if dims[k] > 3 && idx + 2 >= dim_k {
                    top = true;
                }
            }
            norm += v.abs();
            if top {
                tail += v.abs();
            }
        }
        if norm > 0.0 {
            cheb_tail = cheb_tail.max(tail / norm.max(1e-300));
        }
        coeff_tensors.push(tensor);
    }

    // enumerate the per-axis boundary/remainder choices
    let mut choices: Vec<Vec<Role>> = vec![vec![]];
    for &k in &depths {
        let mut next = vec![];
        for c in &choices {
            if k == 0 {
                let mut cc = c.clone();
                cc.push(Role::Remainder);
                next.push(cc);
            } else {
                for i in 0..k {
                    let mut cc = c.clone();
                    cc.push(Role::Boundary(i));
                    next.push(cc);
                }
                let mut cc = c.clone();
                cc.push(Role::Remainder);
                next.push(cc);
            }
        }
        choices = next;
    }
    Ok(CubeData {
        ne,
        depths,
        dims,
        beta_basis,
        coeff_tensors,
        choices,
        divergent,
        cheb_tail,
    })
}

impl CubeData {
    /// Sign, pole forms, holomorphic factors, derivative pattern and
    /// integrated axes of one term.
    fn term_shape(
        &self,
        spec: &CubeIntegralSpec,
        choice: &[Role],
    ) -> (f64, Vec<LinearForm>, Vec<(usize, i64)>, Vec<u32>, Vec<usize>) {
        let ne = self.ne;
        let mut sign = 1.0f64;
        let mut poles = vec![];
        let mut holo_factors = vec![];
        for e in 0..ne {
            let upto = match choice[e] {
                Role::Boundary(i) => {
                    sign *= if i % 2 == 0 { 1.0 } else { -1.0 };
                    i as i64
                }
                Role::Remainder => {
                    if self.depths[e] == 0 {
                        continue;
                    }
                    sign *= if self.depths[e] % 2 == 0 { 1.0 } else { -1.0 };
                    i64::from(self.depths[e]) - 1
                }
            };
            for j in 0..=upto {
                let off = spec.offsets[e] + j;
                if off == 0 {
                    poles.push(spec.sigma_forms[e].clone());
                } else {
                    holo_factors.push((e, off));
                }
            }
        }
        let beta: Vec<u32> = (0..ne)
            .map(|e| match choice[e] {
                Role::Boundary(i) => i,
                Role::Remainder => self.depths[e],
            })
            .collect();
        let r_axes: Vec<usize> = (0..ne)
            .filter(|&e| matches!(choice[e], Role::Remainder))
            .collect();
        (sign, poles, holo_factors, beta, r_axes)
    }

    /// The germ at the base point, as a sum of simple-pole raw terms.
    fn raw_germ(&self, spec: &CubeIntegralSpec) -> Result<RawGerm> {
        let p = spec.dim;
        let n_max = spec.order + self.divergent as u32;
        let sigma_basis = JetBasis::isotropic(p, n_max);
        // exact log moments per axis
        let mut moments: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.ne);
        for e in 0..self.ne {
            let m_expo = if self.depths[e] > 0 {
                spec.offsets[e] + i64::from(self.depths[e]) - 1
            } else {
                spec.offsets[e] - 1
            };
            debug_assert!(m_expo >= 0);
            moments.push(exact_log_moments(m_expo as u32, n_max, self.dims[e] - 1));
        }
        // sigma-form powers
        let form_powers: Vec<Vec<Jet<Complex64>>> = (0..self.ne)
            .map(|e| {
                let lin: Vec<Complex64> = spec.sigma_forms[e]
                    .coeffs_f64()
                    .iter()
                    .map(|&c| Complex64::new(c, 0.0))
                    .collect();
                let l = Jet::affine(&sigma_basis, Complex64::ZERO, &lin);
                let mut powers = vec![Jet::constant(&sigma_basis, Complex64::ONE)];
                for q in 1..=n_max as usize {
                    let last = powers[q - 1].clone();
                    powers.push(last.mul(&l));
                }
                powers
            })
            .collect();

        let mut raw = RawGerm::new(p);
        for choice in &self.choices {
            let (sign, poles, holo_factors, beta, r_axes) = self.term_shape(spec, choice);
            let b_idx = self
                .beta_basis
                .index_of(&beta)
                .ok_or_else(|| CoreError::Precondition("beta outside caps".into()))?;
            let tensor = &self.coeff_tensors[b_idx];
            let (mut s_tensor, r_dims) = contract_boundary(tensor, &self.dims, &r_axes);
            let n_term = spec.order + poles.len() as u32;
            let mut contributions: Vec<(Vec<u32>, f64)> = vec![];
            contract_log_patterns(
                &mut s_tensor,
                &r_dims,
                &r_axes,
                &moments,
                n_term,
                &mut vec![],
                &mut contributions,
            );
            let mut num = Jet::zero(&sigma_basis);
            for (q_pattern, value) in &contributions {
                if *value == 0.0 {
                    continue;
                }
                let mut jet = Jet::constant(&sigma_basis, Complex64::new(sign * value, 0.0));
                for (pos, &e) in r_axes.iter().enumerate() {
                    let q = q_pattern[pos];
                    if q > 0 {
                        jet = jet.mul(&form_powers[e][q as usize]);
                    }
                }
                num.add_assign(&jet);
            }
            for &(e, off) in &holo_factors {
                let inv = inverse_affine_jet(&form_powers[e][1], off as f64)?;
                num = num.mul(&inv);
            }
            if num.max_norm() == 0.0 {
                continue;
            }
            let dens: Vec<(LinearForm, u32)> = poles.into_iter().map(|l| (l, 1)).collect();
            raw.push(RawTerm { num, dens });
        }
        Ok(raw)
    }

    /// Evaluates the continued integral at a regular point `sigma` of the
    /// germ variables (complex powers under the integral signs).
    fn value_at(&self, spec: &CubeIntegralSpec, sigma: &[Complex64]) -> Result<Complex64> {
        let ne = self.ne;
        // c_e(s) at the point
        let c: Vec<Complex64> = (0..ne)
            .map(|e| {
                spec.sigma_forms[e].eval_complex(sigma)
                    + Complex64::new(spec.offsets[e] as f64, 0.0)
            })
            .collect();
        // complex moments int_0^1 t^{c_e + k_e - 1} T_j dt by tanh-sinh
        let quad = tanh_sinh_01(spec.config.de_level);
        let mut cmoments: Vec<Vec<Complex64>> = Vec::with_capacity(ne);
        for e in 0..ne {
            let expo = c[e] + Complex64::new(f64::from(self.depths[e]) - 1.0, 0.0);
            if expo.re <= -1.0 {
                return Err(CoreError::Precondition(format!(
                    "continuation remainder diverges on axis {e}: Re(c + k) = {}",
                    expo.re + 1.0
                )));
            }
            let deg = self.dims[e] - 1;
            let mut per_j = vec![Complex64::ZERO; deg + 1];
            for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
                let tv = crate::quadrature::chebyshev_values(deg, t);
                let base = Complex64::new(t, 0.0).powc(expo) * w;
                for (j, &tj) in tv.iter().enumerate() {
                    per_j[j] += base * tj;
                }
            }
            cmoments.push(per_j);
        }
        let mut total = Complex64::ZERO;
        for choice in &self.choices {
            let (sign, poles, holo_factors, beta, r_axes) = self.term_shape(spec, choice);
            let b_idx = self
                .beta_basis
                .index_of(&beta)
                .ok_or_else(|| CoreError::Precondition("beta outside caps".into()))?;
            let tensor = &self.coeff_tensors[b_idx];
            let (s_tensor, r_dims) = contract_boundary(tensor, &self.dims, &r_axes);
            // contract against the complex moments
            let mut acc = vec![Complex64::ZERO];
            let mut cur: Vec<Complex64> = s_tensor.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for (pos, &e) in r_axes.iter().enumerate() {
                let dim0 = r_dims[pos];
                let rest: usize = r_dims[pos + 1..].iter().product::<usize>().max(1);
                let mut next = vec![Complex64::ZERO; rest];
                for r in 0..rest {
                    for j in 0..dim0 {
                        next[r] += cur[r * dim0 + j] * cmoments[e][j];
                    }
                }
                cur = next;
            }
            acc[0] = cur[0];
            // denominators at the point
            let mut value = acc[0] * Complex64::new(sign, 0.0);
            let mut den = Complex64::ONE;
            for l in &poles {
                den *= l.eval_complex(sigma);
            }
            for &(e, off) in &holo_factors {
                den *= spec.sigma_forms[e].eval_complex(sigma) + Complex64::new(off as f64, 0.0);
            }
            if den.norm() < 1e-12 {
                return Err(CoreError::Precondition(
                    "evaluation point too close to a pole of the continuation".into(),
                ));
            }
            value /= den;
            total += value;
        }
        Ok(total)
    }
}

/// Meromorphic continuation of one cube integral as a raw germ (sum of
/// simple-pole products with jet numerators). `decompose` turns it canonical.
pub fn ibp_extend_cube_raw(spec: &CubeIntegralSpec) -> Result<(RawGerm, SectorDiagnostics)> {
    let data = build_cube_data(spec)?;
    let raw = data.raw_germ(spec)?;
    let diag = SectorDiagnostics {
        permutation: vec![],
        divergent_slots: data.divergent,
        cheb_tail: data.cheb_tail,
    };
    Ok((raw, diag))
}

/// Evaluates the continued cube integral at a regular complex point.
pub fn cube_value_at(spec: &CubeIntegralSpec, sigma: &[Complex64]) -> Result<Complex64> {
    let data = build_cube_data(spec)?;
    data.value_at(spec, sigma)
}

/// Evaluates the sector-sum continuation of `<I_{G,k}(s), phi>` at a regular
/// point `s`: the same sector charts and integration-by-parts structure as
/// the germ extraction, with complex powers under the remaining integrals.
pub fn sector_sum_value(
    labelled: &LabelledGraph,
    s: &[Complex64],
    testfn: &TestFunction,
    geom: &FlatGeometry,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let ne = labelled.graph.edge_count();
    if ne > AMPLITUDE_EDGE_CAP {
        return Err(CoreError::EdgeCapExceeded(ne, AMPLITUDE_EDGE_CAP));
    }
    if s.len() != ne {
        return Err(CoreError::DimensionMismatch(s.len(), ne));
    }
    let d = geom.dim;
    let sigma: Vec<Complex64> = s.iter().map(|se| se - Complex64::ONE).collect();
    let perms: Vec<Vec<usize>> = Permutations::new(ne).collect();
    let vertices = labelled.graph.vertices().to_vec();
    let runner = |perm: &Vec<usize>| -> Result<Complex64> {
        let chart = SectorChart::new(labelled, perm, d)?;
        let chi = ChiClosedForm::new(&chart, geom, vertices.clone(), testfn)?;
        let (sigma_forms, offsets) = crate::blowup::sector_exponent_forms(labelled, perm, d)?;
        let spec = CubeIntegralSpec {
            dim: ne,
            sigma_forms,
            offsets,
            factor: &chi,
            order: 0,
            config: cfg,
            cache_key: None,
        };
        cube_value_at(&spec, &sigma)
    };
    let results: Vec<Result<Complex64>> = if cfg.jobs == 1 {
        perms.iter().map(runner).collect()
    } else {
        perms.par_iter().map(runner).collect()
    };
    let mut total = Complex64::ZERO;
    for r in results {
        total += r?;
    }
    let mut pref = Complex64::new(
        (4.0 * std::f64::consts::PI).powf(-(d as f64) * ne as f64 / 2.0),
        0.0,
    );
    for se in s {
        pref /= gamma_complex(*se);
    }
    Ok(pref * total)
}

/// Public variant returning the canonical germ.
pub fn ibp_extend_cube(spec: &CubeIntegralSpec) -> Result<MeromorphicGerm> {
    let (raw, _) = ibp_extend_cube_raw(spec)?;
    decompose(&raw, spec.order)
}

/// `1/(L + m)` as a jet: `(1/m) sum_q (-L/m)^q`.
fn inverse_affine_jet(l_jet: &Jet<Complex64>, m: f64) -> Result<Jet<Complex64>> {
    if m == 0.0 {
        return Err(CoreError::ZeroDenominator);
    }
    let mut f = l_jet.scale(Complex64::new(1.0, 0.0));
    f.coeffs[0] += Complex64::new(m, 0.0);
    f.recip()
}

/// Sums a coefficient tensor over all axes except `keep`, in order.
fn contract_boundary(tensor: &[f64], dims: &[usize], keep: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let r_dims: Vec<usize> = keep.iter().map(|&e| dims[e]).collect();
    let out_len: usize = r_dims.iter().product::<usize>().max(1);
    let mut out = vec![0.0; out_len];
    for (flat, &v) in tensor.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let mut rem = flat;
        let mut out_flat = 0;
        for (k, &dim_k) in dims.iter().enumerate() {
            let idx = rem % dim_k;
            rem /= dim_k;
            if let Some(pos) = keep.iter().position(|&e| e == k) {
                let pre: usize = keep[..pos].iter().map(|&e| dims[e]).product();
                out_flat += idx * pre;
            }
        }
        out[out_flat] += v;
    }
    (out, r_dims)
}

/// Recursively contracts the remaining axes against per-axis log moments,
/// enumerating log patterns within the total budget.
fn contract_log_patterns(
    tensor: &mut Vec<f64>,
    dims: &[usize],
    axes: &[usize],
    moments: &[Vec<Vec<f64>>],
    budget: u32,
    prefix: &mut Vec<u32>,
    out: &mut Vec<(Vec<u32>, f64)>,
) {
    if axes.is_empty() {
        debug_assert_eq!(tensor.len(), 1);
        out.push((prefix.clone(), tensor[0]));
        return;
    }
    let e = axes[0];
    let dim0 = dims[0];
    let rest_len: usize = dims[1..].iter().product::<usize>().max(1);
    for q in 0..=budget {
        // contract the first axis with M[e][q][.]
        let m = &moments[e][q as usize];
        let mut reduced = vec![0.0; rest_len];
        for j in 0..dim0 {
            let w = m[j];
            if w == 0.0 {
                continue;
            }
            for r in 0..rest_len {
                reduced[r] += w * tensor[r * dim0 + j];
            }
        }
        prefix.push(q);
        contract_log_patterns(
            &mut reduced,
            &dims[1..],
            &axes[1..],
            moments,
            budget - q,
            prefix,
            out,
        );
        prefix.pop();
    }
}

/// Exact moments `int_0^1 t^m (ln t)^q T_j(2t-1) dt / q!` for
/// `q = 0..=q_max`, `j = 0..=deg`, computed in rational arithmetic from the
/// integer coefficients of the shifted Chebyshev polynomials.
fn exact_log_moments(m: u32, q_max: u32, deg: usize) -> Vec<Vec<f64>> {
    use crate::linform::Rational;
    use num_bigint::BigInt;
    use num_traits::{One, ToPrimitive, Zero};
    // shifted Chebyshev coefficient table: T*_{j+1} = (4t - 2) T*_j - T*_{j-1}
    let mut polys: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    if deg >= 1 {
        polys.push(vec![BigInt::from(-1), BigInt::from(2)]);
    }
    for j in 2..=deg {
        let prev = &polys[j - 1];
        let prev2 = &polys[j - 2];
        let mut next = vec![BigInt::zero(); j + 1];
        for (r, c) in prev.iter().enumerate() {
            next[r + 1] += 4 * c;
            next[r] -= 2 * c;
        }
        for (r, c) in prev2.iter().enumerate() {
            next[r] -= c;
        }
        polys.push(next);
    }
    // moment of t^{m+r} against (ln t)^q / q!: (-1)^q / (m+r+1)^{q+1}
    (0..=q_max)
        .map(|q| {
            polys
                .iter()
                .map(|coeffs| {
                    let mut acc = Rational::zero();
                    for (r, c) in coeffs.iter().enumerate() {
                        let base = BigInt::from(m as u64 + r as u64 + 1);
                        let den = base.pow(q + 1);
                        let mut term = Rational::new(c.clone(), den);
                        if q % 2 == 1 {
                            term = -term;
                        }
                        acc += term;
                    }
                    acc.to_f64().unwrap()
                })
                .collect()
        })
        .collect()
}

/// Type-I DCT along one axis of a flat tensor.
fn dct_axis(tensor: &[f64], dims: &[usize], axis: usize) -> Vec<f64> {
    let n = dims[axis] - 1;
    let stride: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; tensor.len()];
    let mut line = vec![0.0; n + 1];
    for o in 0..outer {
        for s in 0..stride {
            for (k, item) in line.iter_mut().enumerate() {
                *item = tensor[o * stride * (n + 1) + k * stride + s];
            }
            let coeffs = chebyshev_coeffs(&line);
            for (k, &c) in coeffs.iter().enumerate() {
                out[o * stride * (n + 1) + k * stride + s] = c;
            }
        }
    }
    out
}

/// Exact germ of the model integral `int_{[0,1]^E} prod t_e^{c_e(s)-1} psi dt`
/// for polynomial `psi`: each monomial integrates to
/// `prod_e 1/(c_e(s) + beta_e)`; offsets that vanish at the base point become
/// pole denominators, the rest are expanded as holomorphic jets.
pub fn model_integral_exact(
    dim: usize,
    sigma_forms: &[LinearForm],
    offsets: &[i64],
    psi: &PolyFactor,
    order: u32,
) -> Result<MeromorphicGerm> {
    let ne = sigma_forms.len();
    let max_poles = offsets.iter().filter(|&&a| a <= 0).count() as u32;
    let n_max = order + max_poles;
    let basis = JetBasis::isotropic(dim, n_max);
    let mut raw = RawGerm::new(dim);
    for (mono, coef) in &psi.terms {
        let mut num = Jet::constant(&basis, Complex64::new(*coef, 0.0));
        let mut dens: Vec<(LinearForm, u32)> = vec![];
        for e in 0..ne {
            let off = offsets[e] + i64::from(mono[e]);
            if off == 0 {
                dens.push((sigma_forms[e].clone(), 1));
            } else {
                let lin: Vec<Complex64> = sigma_forms[e]
                    .coeffs_f64()
                    .iter()
                    .map(|&c| Complex64::new(c, 0.0))
                    .collect();
                let l = Jet::affine(&basis, Complex64::ZERO, &lin);
                let inv = inverse_affine_jet(&l, off as f64)?;
                num = num.mul(&inv);
            }
        }
        raw.push(RawTerm { num, dens });
    }
    decompose(&raw, order)
}

/// Amplitude germ plus diagnostics.
pub struct AmplitudeGermResult {
    pub germ: MeromorphicGerm,
    pub sectors: Vec<SectorDiagnostics>,
    pub realized_poles: Vec<LinearForm>,
    pub quad_error: f64,
}

/// Default sigma-jet order: the maximal number of divergent filtration steps
/// over all sectors, plus two.
pub fn default_jet_order(graph: &FeynmanGraph, d: usize) -> Result<u32> {
    let ne = graph.edge_count();
    if ne > AMPLITUDE_EDGE_CAP {
        return Err(CoreError::EdgeCapExceeded(ne, AMPLITUDE_EDGE_CAP));
    }
    let mut worst = 0;
    for perm in Permutations::new(ne) {
        let mut count = 0;
        for i in 1..=ne {
            let b1 = graph.betti_of_subset(&perm[..i])? as i64;
            if 2 * i as i64 - (d as i64) * b1 <= 0 {
                count += 1;
            }
        }
        worst = worst.max(count);
    }
    Ok(worst as u32 + 2)
}

/// Threshold below which a polar numerator counts as numerically zero when
/// reporting realized poles.
pub const POLE_THRESHOLD: f64 = 1e-9;

/// One labelled subgraph head term: sums the raw germs of all sectors of the
/// subgraph, in the ambient germ variables.
#[allow(clippy::too_many_arguments)]
fn head_raw_germ(
    sub: &LabelledGraph,
    edge_map: &[usize],
    ambient_vertices: &[usize],
    p: usize,
    testfn: &TestFunction,
    geom: &FlatGeometry,
    tails: &[(usize, usize)],
    crossings: &[(usize, usize)],
    cfg: &QuadratureConfig,
    order: u32,
) -> Result<(RawGerm, Vec<SectorDiagnostics>)> {
    let ne = sub.graph.edge_count();
    let d = geom.dim;
    let perms: Vec<Vec<usize>> = Permutations::new(ne).collect();
    let mix_level = mixture_level(cfg, tails.len() + crossings.len());
    let tail_nodes = if tails.is_empty() {
        vec![]
    } else {
        green_tail_mixture(geom, mix_level)?
    };
    let crossing_nodes = if crossings.is_empty() {
        vec![]
    } else {
        green_full_mixture(geom, mix_level)?
    };
    let runner = |perm: &Vec<usize>| -> Result<(RawGerm, SectorDiagnostics)> {
        let chart = SectorChart::new(sub, perm, d)?;
        let ambient_idx: Vec<usize> = ambient_vertices.to_vec();
        let base = ChiClosedForm::new(&chart, geom, ambient_idx, testfn)?;
        // embed the exponent forms into the ambient germ variables
        let (sigma_sub, offsets) = crate::blowup::sector_exponent_forms(sub, perm, d)?;
        let sigma_forms: Vec<LinearForm> =
            sigma_sub.iter().map(|l| l.embed(edge_map, p)).collect();
        let vmap: BTreeMap<usize, usize> = ambient_vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let mut mixtures: Vec<(usize, usize, Vec<(f64, f64)>)> = tails
            .iter()
            .map(|&(vi, vj)| (vmap[&vi], vmap[&vj], tail_nodes.clone()))
            .collect();
        mixtures.extend(
            crossings
                .iter()
                .map(|&(vi, vj)| (vmap[&vi], vmap[&vj], crossing_nodes.clone())),
        );
        let factor = MixtureChi { base, mixtures };
        let cache_key = sector_cache_key(sub, perm, d, geom, testfn, tails, crossings, cfg);
        let spec = CubeIntegralSpec {
            dim: p,
            sigma_forms,
            offsets,
            factor: &factor,
            order,
            config: cfg,
            cache_key: Some(cache_key),
        };
        let (raw, mut diag) = ibp_extend_cube_raw(&spec)?;
        diag.permutation = perm.iter().map(|&e| edge_map[e] + 1).collect();
        Ok((raw, diag))
    };
    let results: Vec<Result<(RawGerm, SectorDiagnostics)>> = if cfg.jobs == 1 {
        perms.iter().map(runner).collect()
    } else {
        perms.par_iter().map(runner).collect()
    };
    let mut raw = RawGerm::new(p);
    let mut diags = vec![];
    for r in results {
        let (g, diag) = r?;
        raw.terms.extend(g.terms);
        diags.push(diag);
    }
    // per-edge reciprocal-gamma jets (head variables only) and the constant
    let n_max = raw
        .terms
        .iter()
        .map(|t| t.num.basis.total_cap)
        .max()
        .unwrap_or(order);
    // gamma factors only for the head edges, in the ambient variables
    let gamma_head = {
        let basis = JetBasis::isotropic(p, n_max);
        let uni = crate::geometry::recip_gamma_jet(n_max);
        let mut acc = Jet::constant(&basis, Complex64::ONE);
        for &var in edge_map {
            let mut factor = Jet::zero(&basis);
            for k in 0..=n_max {
                let mut m = vec![0u32; p];
                m[var] = k;
                factor.set_coeff(&m, Complex64::new(uni.coeff(&[k]), 0.0));
            }
            acc = acc.mul(&factor);
        }
        acc
    };
    let scale = (4.0 * std::f64::consts::PI).powf(-(d as f64) * ne as f64 / 2.0);
    let basis = JetBasis::isotropic(p, n_max);
    let gamma = gamma_head.convert(&basis);
    for t in &mut raw.terms {
        let num = t.num.convert(&basis).mul(&gamma).scale(Complex64::new(scale, 0.0));
        t.num = num;
    }
    Ok((raw, diags))
}

/// `<I_{G,k}(s), phi>` as a meromorphic germ at the base point: the sum over
/// all sector charts of the continued cube integrals, times the per-edge
/// reciprocal gamma jets and the heat-kernel normalization.
pub fn labelled_amplitude_germ(
    labelled: &LabelledGraph,
    testfn: &TestFunction,
    geom: &FlatGeometry,
    cfg: &QuadratureConfig,
    order: u32,
) -> Result<AmplitudeGermResult> {
    let ne = labelled.graph.edge_count();
    if ne > AMPLITUDE_EDGE_CAP {
        return Err(CoreError::EdgeCapExceeded(ne, AMPLITUDE_EDGE_CAP));
    }
    let edge_map: Vec<usize> = (0..ne).collect();
    let vertices = labelled.graph.vertices().to_vec();
    let (raw, sectors) = head_raw_germ(
        labelled,
        &edge_map,
        &vertices,
        ne,
        testfn,
        geom,
        &[],
        &[],
        cfg,
        order,
    )?;
    let germ = decompose(&raw, order)?;
    let mut germ = germ;
    germ.prune(0.0);
    let realized = germ.realized_poles(POLE_THRESHOLD);
    let quad_error = sectors.iter().map(|s| s.cheb_tail).fold(0.0, f64::max);
    Ok(AmplitudeGermResult {
        germ,
        sectors,
        realized_poles: realized,
        quad_error,
    })
}

/// Brute-force oracle in the original variables: nested tanh-sinh over the
/// cube of heat times, closed-form Gaussian configuration integrals at every
/// node. Valid in the absolute-convergence region `Re(s_e) >= d/2 + 1/2`.
pub fn direct_amplitude_oracle(
    labelled: &LabelledGraph,
    s: &[Complex64],
    testfn: &TestFunction,
    geom: &FlatGeometry,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let graph = &labelled.graph;
    let ne = graph.edge_count();
    let d = geom.dim as f64;
    if s.len() != ne {
        return Err(CoreError::DimensionMismatch(s.len(), ne));
    }
    if !geom.is_identity_metric() {
        return Err(CoreError::Geometry(
            "oracle requires the identity metric".into(),
        ));
    }
    for se in s {
        if se.re < d / 2.0 + 0.5 {
            return Err(CoreError::Precondition(format!(
                "oracle needs Re(s_e) >= d/2 + 1/2, got {}",
                se.re
            )));
        }
    }
    let n = graph.vertex_count();
    let vidx: BTreeMap<usize, usize> = graph
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let quad = tanh_sinh_01(cfg.de_level.min(5));
    let mut total = Complex64::ZERO;
    let mut idx = vec![0usize; ne];
    'outer: loop {
        let lengths: Vec<f64> = idx.iter().map(|&i| quad.nodes[i]).collect();
        let wprod: f64 = idx.iter().map(|&i| quad.weights[i]).product();
        // couplings beyond f64 conditioning: the integrand there is
        // O(l^{d/2}) and the node is negligible in the convergence region
        if lengths.iter().any(|&l| 1.0 / (2.0 * l) > 1e10) {
            for k in 0..ne {
                idx[k] += 1;
                if idx[k] < quad.nodes.len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        // configuration integral at fixed lengths
        let mut config_value = 0.0;
        for term in &testfn.terms {
            let mut prob = GaussianProblem::new(n, geom.dim, &0.0f64);
            for (e, &(a, b)) in graph.edges().iter().enumerate() {
                let mut w = vec![0.0; n];
                w[vidx[&a]] = 1.0;
                w[vidx[&b]] = -1.0;
                prob.add_rank_one(&w, 1.0 / (2.0 * lengths[e]));
            }
            let iw2 = 1.0 / (term.width * term.width);
            let mut constant = 0.0;
            for i in 0..n {
                let mut w = vec![0.0; n];
                w[i] = 1.0;
                prob.add_rank_one(&w, iw2);
                for a in 0..geom.dim {
                    let mu = term.center[i * geom.dim + a];
                    prob.lin[i][a] += mu * iw2;
                    constant -= mu * mu * iw2 / 2.0;
                }
            }
            prob.constant = constant;
            let mut poly_terms = vec![];
            for (mono, &coef) in &term.poly.terms {
                let mut forms = vec![];
                for (var, &e) in mono.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let (i, a) = (var / geom.dim, var % geom.dim);
                    let mut wv = vec![0.0; n];
                    wv[i] = 1.0;
                    for _ in 0..e {
                        forms.push(AffineForm {
                            axis: a,
                            weights: wv.clone(),
                            offset: 0.0,
                        });
                    }
                }
                poly_terms.push((coef, forms));
            }
            prob.terms = poly_terms;
            config_value += prob.integrate();
        }
        if !config_value.is_finite() {
            // couplings 1/(2l) beyond f64 conditioning; the true integrand
            // is O(l^{d/2}) smaller there, so the node is negligible
            for k in 0..ne {
                idx[k] += 1;
                if idx[k] < quad.nodes.len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        // length powers
        let mut factor = Complex64::new(wprod * config_value, 0.0);
        for e in 0..ne {
            let expo = s[e] + Complex64::new(f64::from(labelled.labels[e]) - d / 2.0 - 1.0, 0.0);
            factor *= Complex64::new(lengths[e], 0.0).powc(expo);
        }
        total += factor;
        for k in 0..ne {
            idx[k] += 1;
            if idx[k] < quad.nodes.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    // prefactors
    let mut pref = Complex64::new((4.0 * std::f64::consts::PI).powf(-d * ne as f64 / 2.0), 0.0);
    for (e, se) in s.iter().enumerate() {
        pref /= gamma_complex(*se);
        // flat heat coefficients
        pref *= Complex64::new(geom.heat_coefficient(labelled.labels[e], &[], &[]), 0.0);
    }
    Ok(pref * total)
}

/// Quadrature level for Green-kernel mixture axes, stepped down as axes
/// multiply so nested grids stay affordable.
fn mixture_level(cfg: &QuadratureConfig, axes: usize) -> u32 {
    let base = cfg.de_level.min(4);
    match axes {
        0 | 1 => base,
        2 => base.saturating_sub(1).max(3),
        _ => base.saturating_sub(2).max(3),
    }
}

/// The full amplitude `<t_G(s), phi>` as a germ: head terms over every edge
/// subset with the complementary edges contributing smooth Green tails,
/// evaluated at their base point and folded into the effective test function.
pub fn assemble_full_amplitude(
    graph: &FeynmanGraph,
    testfn: &TestFunction,
    geom: &FlatGeometry,
    heat_order: u32,
    order: u32,
    cfg: &QuadratureConfig,
) -> Result<AmplitudeGermResult> {
    let active: Vec<usize> = (0..graph.edge_count()).collect();
    assemble_amplitude_restricted(graph, &active, &[], testfn, geom, heat_order, order, cfg)
}

/// Amplitude over a subset of the edges, with the `crossing` edges replaced
/// by full Green kernels at the base point (locality right-hand sides). Edges
/// in neither list are absent. Germ variables stay indexed by the ambient
/// graph's edges.
#[allow(clippy::too_many_arguments)]
pub fn assemble_amplitude_restricted(
    graph: &FeynmanGraph,
    active: &[usize],
    crossing: &[usize],
    testfn: &TestFunction,
    geom: &FlatGeometry,
    heat_order: u32,
    order: u32,
    cfg: &QuadratureConfig,
) -> Result<AmplitudeGermResult> {
    let ne = graph.edge_count();
    if ne > AMPLITUDE_EDGE_CAP {
        return Err(CoreError::EdgeCapExceeded(ne, AMPLITUDE_EDGE_CAP));
    }
    if geom.mass == 0.0 && heat_order > 0 {
        // the massless expansion is exact at order zero
        return assemble_amplitude_restricted(
            graph, active, crossing, testfn, geom, 0, order, cfg,
        );
    }
    let crossing_pairs: Vec<(usize, usize)> =
        crossing.iter().map(|&e| graph.edges()[e]).collect();
    let vertices = graph.vertices().to_vec();
    let vidx: BTreeMap<usize, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let mut raw = RawGerm::new(ne);
    let mut all_diags = vec![];
    let basis0 = JetBasis::isotropic(ne, order);
    let na = active.len();
    for mask in 0u32..(1 << na) {
        let head: Vec<usize> = (0..na)
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| active[k])
            .collect();
        let tail_edges: Vec<(usize, usize)> = (0..na)
            .filter(|&k| mask & (1 << k) == 0)
            .map(|k| graph.edges()[active[k]])
            .collect();
        if head.is_empty() {
            // pure tail term: a constant germ
            let value = pure_tail_value(
                graph,
                &tail_edges,
                &crossing_pairs,
                testfn,
                geom,
                cfg,
                &vidx,
            )?;
            let num = Jet::constant(&basis0, Complex64::new(value, 0.0));
            raw.push(RawTerm { num, dens: vec![] });
            continue;
        }
        let (sub_graph, idx) = graph.induced_subgraph(&head)?;
        // heat labels: exact zero for massless; sum over labels otherwise
        let label_range: Vec<Vec<u32>> = if geom.mass == 0.0 {
            vec![vec![0; idx.len()]]
        } else {
            let mut combos = vec![vec![]];
            for _ in 0..idx.len() {
                let mut next = vec![];
                for c in &combos {
                    for k in 0..=heat_order {
                        let mut cc: Vec<u32> = c.clone();
                        cc.push(k);
                        next.push(cc);
                    }
                }
                combos = next;
            }
            combos
        };
        for labels in label_range {
            let sub = LabelledGraph::new(sub_graph.clone(), labels)?;
            let (part, diags) = head_raw_germ(
                &sub,
                &idx,
                &vertices,
                ne,
                testfn,
                geom,
                &tail_edges,
                &crossing_pairs,
                cfg,
                order,
            )?;
            raw.terms.extend(part.terms);
            all_diags.extend(diags);
        }
    }
    let mut germ = decompose(&raw, order)?;
    germ.prune(0.0);
    let realized = germ.realized_poles(POLE_THRESHOLD);
    let quad_error = all_diags.iter().map(|s| s.cheb_tail).fold(0.0, f64::max);
    Ok(AmplitudeGermResult {
        germ,
        sectors: all_diags,
        realized_poles: realized,
        quad_error,
    })
}

/// `int prod_tails G_tail(x_i - x_j) phi dx` over the full configuration
/// space: nested mixture quadrature with a closed-form Gaussian at each node.
fn pure_tail_value(
    graph: &FeynmanGraph,
    tail_edges: &[(usize, usize)],
    crossing_pairs: &[(usize, usize)],
    testfn: &TestFunction,
    geom: &FlatGeometry,
    cfg: &QuadratureConfig,
    vidx: &BTreeMap<usize, usize>,
) -> Result<f64> {
    let n = graph.vertex_count();
    let axes_count = tail_edges.len() + crossing_pairs.len();
    let level = mixture_level(cfg, axes_count);
    let tail_nodes = if tail_edges.is_empty() {
        vec![]
    } else {
        green_tail_mixture(geom, level)?
    };
    let crossing_nodes = if crossing_pairs.is_empty() {
        vec![]
    } else {
        green_full_mixture(geom, level)?
    };
    // one mixture axis per tail edge, then per crossing edge
    let axes: Vec<((usize, usize), &Vec<(f64, f64)>)> = tail_edges
        .iter()
        .map(|&(a, b)| ((a, b), &tail_nodes))
        .chain(crossing_pairs.iter().map(|&(a, b)| ((a, b), &crossing_nodes)))
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; axes.len()];
    'outer: loop {
        let mut weight = 1.0;
        let mut couplings = vec![];
        for (k, &((a, b), nodes)) in axes.iter().enumerate() {
            let (coef, w) = nodes[idx[k]];
            weight *= w;
            couplings.push((vidx[&a], vidx[&b], coef));
        }
        // Gaussian problem over all vertices
        let mut config_value = 0.0;
        for term in &testfn.terms {
            let mut prob = GaussianProblem::new(n, geom.dim, &0.0f64);
            for &(i, j, coef) in &couplings {
                let mut w = vec![0.0; n];
                w[i] = 1.0;
                w[j] = -1.0;
                prob.add_rank_one(&w, 2.0 * coef);
            }
            let iw2 = 1.0 / (term.width * term.width);
            let mut constant = 0.0;
            for i in 0..n {
                let mut w = vec![0.0; n];
                w[i] = 1.0;
                prob.add_rank_one(&w, iw2);
                for a in 0..geom.dim {
                    let mu = term.center[i * geom.dim + a];
                    prob.lin[i][a] += mu * iw2;
                    constant -= mu * mu * iw2 / 2.0;
                }
            }
            prob.constant = constant;
            let mut poly_terms = vec![];
            for (mono, &coef) in &term.poly.terms {
                let mut forms = vec![];
                for (var, &e) in mono.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let (i, a) = (var / geom.dim, var % geom.dim);
                    let mut wv = vec![0.0; n];
                    wv[i] = 1.0;
                    for _ in 0..e {
                        forms.push(AffineForm {
                            axis: a,
                            weights: wv.clone(),
                            offset: 0.0,
                        });
                    }
                }
                poly_terms.push((coef, forms));
            }
            prob.terms = poly_terms;
            config_value += prob.integrate();
        }
        total += weight * config_value;
        if axes.is_empty() {
            break;
        }
        for k in 0..axes.len() {
            idx[k] += 1;
            if idx[k] < axes[k].1.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(total)
}
