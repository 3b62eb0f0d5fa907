//! Per-sector blow-up geometry: the spanning-tree change of variables, smooth
//! pullbacks of `dist^2 / l_e`, the per-slot exponent forms, and evaluation of
//! the smooth partial integral `chi(t)` together with its t-jets.
//!
//! A sector is a permutation of the edges (shortest first). Slot `k` carries
//! the k-th shortest edge; the blow-up coordinates are
//! `l_{slot k} = prod_{j >= k} t_j^2` and tree displacements `h_e`, with every
//! position `x_i = x_root + sum_{e in path} (prod_{j >= slot(e)} t_j) h_e`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::gauss::{AffineForm, GaussianProblem};
use crate::geometry::{FlatGeometry, GeometryBackend, TestFunction};
use crate::graph::{kruskal_forest, tree_path, LabelledGraph};
use crate::jet::{Jet, JetBasis};
use crate::linform::LinearForm;
use crate::quadrature::{gauss_hermite, QuadratureConfig};

/// Signed use of a tree slot along a path or cycle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignedSlot {
    /// index into `tree_slots`
    pub tree_pos: usize,
    /// slot (rank) of that tree edge
    pub slot: usize,
    pub sign: i8,
}

/// A sector chart: permutation, Kruskal forest, fundamental cycles, rooted
/// tree paths and the per-slot exponent forms.
#[derive(Debug, Clone)]
pub struct SectorChart {
    pub graph: LabelledGraph,
    pub dim: usize,
    /// slot -> edge index (the sector permutation, shortest first)
    pub perm: Vec<usize>,
    /// slots whose edges belong to the Kruskal forest, increasing
    pub tree_slots: Vec<usize>,
    /// connected components as sorted vertex ids; the first vertex is the root
    pub components: Vec<Vec<usize>>,
    /// for every vertex: its component index
    pub vertex_component: BTreeMap<usize, usize>,
    /// for every vertex: signed tree slots on the path root -> vertex
    pub paths: BTreeMap<usize, Vec<SignedSlot>>,
    /// for every non-tree slot: the signed cycle complement (tree part of the
    /// unique simple cycle, traversed from i(e) to j(e))
    pub cycles: BTreeMap<usize, Vec<SignedSlot>>,
    /// per slot: sigma-part of the exponent (dim = number of edges)
    pub exponent_sigma: Vec<LinearForm>,
    /// per slot: integer exponent offset at the base point
    pub exponent_offset: Vec<i64>,
}

impl SectorChart {
    pub fn new(labelled: &LabelledGraph, perm: &[usize], d: usize) -> Result<Self> {
        let graph = &labelled.graph;
        let ne = graph.edge_count();
        let forest = kruskal_forest(graph, perm)?;
        let slot_of_edge: BTreeMap<usize, usize> =
            perm.iter().enumerate().map(|(s, &e)| (e, s)).collect();
        let mut tree_slots: Vec<usize> = forest.tree_edges.iter().map(|e| slot_of_edge[e]).collect();
        tree_slots.sort_unstable();
        let tree_pos_of_slot: BTreeMap<usize, usize> = tree_slots
            .iter()
            .enumerate()
            .map(|(p, &s)| (s, p))
            .collect();

        // components with minimum-vertex roots
        let mut comp_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut components: Vec<Vec<usize>> = vec![];
        for &v in graph.vertices() {
            if comp_of.contains_key(&v) {
                continue;
            }
            // flood fill along all edges
            let mut stack = vec![v];
            let mut comp = vec![];
            while let Some(u) = stack.pop() {
                if comp_of.contains_key(&u) {
                    continue;
                }
                comp_of.insert(u, components.len());
                comp.push(u);
                for &(a, b) in graph.edges() {
                    if a == u && !comp_of.contains_key(&b) {
                        stack.push(b);
                    }
                    if b == u && !comp_of.contains_key(&a) {
                        stack.push(a);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }

        // rooted tree paths
        let mut paths = BTreeMap::new();
        for &v in graph.vertices() {
            let root = components[comp_of[&v]][0];
            let path = tree_path(graph, &forest.tree_edges, root, v)
                .ok_or_else(|| CoreError::Graph("tree does not span its component".into()))?;
            let signed: Vec<SignedSlot> = path
                .iter()
                .map(|&(e, sign)| {
                    let slot = slot_of_edge[&e];
                    SignedSlot {
                        tree_pos: tree_pos_of_slot[&slot],
                        slot,
                        sign,
                    }
                })
                .collect();
            paths.insert(v, signed);
        }

        // fundamental cycles for non-tree slots: difference of endpoint paths
        let mut cycles = BTreeMap::new();
        for slot in 0..ne {
            if tree_pos_of_slot.contains_key(&slot) {
                continue;
            }
            let e = perm[slot];
            let (iv, jv) = graph.endpoints(e)?;
            let mut acc: BTreeMap<usize, (usize, i32)> = BTreeMap::new();
            for s in &paths[&iv] {
                acc.entry(s.tree_pos).or_insert((s.slot, 0)).1 += i32::from(s.sign);
            }
            for s in &paths[&jv] {
                acc.entry(s.tree_pos).or_insert((s.slot, 0)).1 -= i32::from(s.sign);
            }
            let mut cyc = vec![];
            for (tree_pos, (slot_e, net)) in acc {
                if net != 0 {
                    cyc.push(SignedSlot {
                        tree_pos,
                        slot: slot_e,
                        sign: net as i8,
                    });
                }
            }
            // every tree edge of the cycle is strictly shorter than e
            debug_assert!(cyc.iter().all(|s| s.slot < slot));
            cycles.insert(slot, cyc);
        }

        let (exponent_sigma, exponent_offset) = sector_exponent_forms(labelled, perm, d)?;
        Ok(SectorChart {
            graph: labelled.clone(),
            dim: d,
            perm: perm.to_vec(),
            tree_slots,
            components,
            vertex_component: comp_of,
            paths,
            cycles,
            exponent_sigma,
            exponent_offset,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.perm.len()
    }

    /// `prod_{j >= slot} t_j`
    fn tail_product(&self, t: &[f64], slot: usize) -> f64 {
        t[slot..].iter().product()
    }

    /// Lengths per original edge index.
    pub fn lengths_from_t(&self, t: &[f64]) -> Vec<f64> {
        let ne = self.edge_count();
        let mut lengths = vec![0.0; ne];
        for slot in 0..ne {
            let p = self.tail_product(t, slot);
            lengths[self.perm[slot]] = p * p;
        }
        lengths
    }

    /// The forward change of variables: positions (ordered like the graph's
    /// vertex list) and per-edge lengths. `x` holds one base point per
    /// component, `h` one displacement per tree slot.
    pub fn pi_forward(
        &self,
        t: &[f64],
        x: &[Vec<f64>],
        h: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let d = self.dim;
        if t.len() != self.edge_count()
            || x.len() != self.components.len()
            || h.len() != self.tree_slots.len()
        {
            return Err(CoreError::Precondition("pi_forward shape mismatch".into()));
        }
        let mut positions = vec![];
        for &v in self.graph.graph.vertices() {
            let mut pos = x[self.vertex_component[&v]].clone();
            for s in &self.paths[&v] {
                let c = f64::from(s.sign) * self.tail_product(t, s.slot);
                for a in 0..d {
                    pos[a] += c * h[s.tree_pos][a];
                }
            }
            positions.push(pos);
        }
        Ok((positions, self.lengths_from_t(t)))
    }

    /// Inverse on the open sector `0 < l_{slot 1} < ... < l_{slot E} < 1`.
    pub fn pi_inverse(
        &self,
        positions: &[Vec<f64>],
        lengths: &[f64],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let ne = self.edge_count();
        let slot_lengths: Vec<f64> = self.perm.iter().map(|&e| lengths[e]).collect();
        for k in 0..ne {
            let ok = slot_lengths[k] > 0.0
                && slot_lengths[k] < 1.0
                && (k + 1 == ne || slot_lengths[k] < slot_lengths[k + 1]);
            if !ok {
                return Err(CoreError::Precondition(
                    "lengths outside the open sector".into(),
                ));
            }
        }
        let mut t = vec![0.0; ne];
        for k in 0..ne {
            t[k] = if k + 1 == ne {
                slot_lengths[k].sqrt()
            } else {
                (slot_lengths[k] / slot_lengths[k + 1]).sqrt()
            };
        }
        // roots first, then peel tree displacements along the paths
        let vidx: BTreeMap<usize, usize> = self
            .graph
            .graph
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let x: Vec<Vec<f64>> = self
            .components
            .iter()
            .map(|comp| positions[vidx[&comp[0]]].clone())
            .collect();
        let mut h = vec![vec![0.0; self.dim]; self.tree_slots.len()];
        // process vertices by increasing path length so prefixes are known
        let mut verts: Vec<usize> = self.graph.graph.vertices().to_vec();
        verts.sort_by_key(|v| self.paths[v].len());
        for &v in &verts {
            let path = &self.paths[&v];
            if path.is_empty() {
                continue;
            }
            let last = path.last().unwrap();
            // x_v = x_prefix + sign * prod * h_last where x_prefix is the
            // position of the path without its last edge, i.e. of the vertex
            // one step earlier; reconstruct it from known h values
            let mut prefix = x[self.vertex_component[&v]].clone();
            for s in &path[..path.len() - 1] {
                let c = f64::from(s.sign) * self.tail_product(&t, s.slot);
                for a in 0..self.dim {
                    prefix[a] += c * h[s.tree_pos][a];
                }
            }
            let c = f64::from(last.sign) * self.tail_product(&t, last.slot);
            if c == 0.0 {
                return Err(CoreError::Precondition("degenerate t".into()));
            }
            let pv = &positions[vidx[&v]];
            for a in 0..self.dim {
                h[last.tree_pos][a] = (pv[a] - prefix[a]) / c;
            }
        }
        Ok((t, x, h))
    }

    /// Smooth pullback of `dist^2(x_i(e), x_j(e)) / l_e` for the edge in the
    /// given slot, on the flat backend. Never divides by `l_e`.
    pub fn pullback_edge(
        &self,
        slot: usize,
        t: &[f64],
        h: &[Vec<f64>],
        geom: &FlatGeometry,
    ) -> Result<f64> {
        if let Some(pos) = self.tree_slots.iter().position(|&s| s == slot) {
            return Ok(geom.norm2(&h[pos]));
        }
        let cyc = &self.cycles[&slot];
        let mut v = vec![0.0; self.dim];
        for s in cyc {
            // partial product prod_{slot(e') <= j < slot} t_j
            let c: f64 = t[s.slot..slot].iter().product::<f64>() * f64::from(s.sign);
            for a in 0..self.dim {
                v[a] += c * h[s.tree_pos][a];
            }
        }
        Ok(geom.norm2(&v))
    }

    /// Depth of integration by parts needed per slot so the remaining
    /// exponent at the base point is strictly positive.
    pub fn required_ibp_depths(&self) -> Vec<u32> {
        self.exponent_offset
            .iter()
            .map(|&a| if a >= 1 { 0 } else { (1 - a) as u32 })
            .collect()
    }

    /// Diagnostics dump for the CLI.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "permutation": self.perm.iter().map(|e| e + 1).collect::<Vec<_>>(),
            "tree_edges": self.tree_slots.iter().map(|&s| self.perm[s] + 1).collect::<Vec<_>>(),
            "cycles": self.cycles.iter().map(|(slot, cyc)| {
                serde_json::json!({
                    "edge": self.perm[*slot] + 1,
                    "tree_part": cyc.iter().map(|s| {
                        serde_json::json!({"edge": self.perm[s.slot] + 1, "sign": s.sign})
                    }).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
            "exponents": self.exponent_sigma.iter().zip(&self.exponent_offset).map(|(l, o)| {
                serde_json::json!({"sigma_part": l, "offset": o})
            }).collect::<Vec<_>>(),
        })
    }
}

/// Per-slot exponent data: the sigma-part `sum_{i <= slot} 2 sigma_{perm(i)}`
/// and the integer offset `2(slot+1) + 2 sum labels - d b1(G_slot)`.
pub fn sector_exponent_forms(
    labelled: &LabelledGraph,
    perm: &[usize],
    d: usize,
) -> Result<(Vec<LinearForm>, Vec<i64>)> {
    let graph = &labelled.graph;
    let ne = graph.edge_count();
    let mut sigma = vec![];
    let mut offset = vec![];
    let mut label_sum: i64 = 0;
    for k in 0..ne {
        label_sum += i64::from(labelled.labels[perm[k]]);
        let step: Vec<usize> = perm[..=k].to_vec();
        let b1 = graph.betti_of_subset(&step)? as i64;
        let mut coeffs = vec![crate::linform::rat_int(0); ne];
        for &e in &step {
            coeffs[e] = crate::linform::rat_int(2);
        }
        sigma.push(LinearForm::new(coeffs));
        offset.push(2 * (k as i64 + 1) + 2 * label_sum - (d as i64) * b1);
    }
    Ok((sigma, offset))
}

/// Extra Gaussian coupling `exp(-coef * |x_vi - x_vj|^2)` between ambient
/// vertices, used to fold Green-kernel mixture nodes (tail and crossing
/// factors) into the smooth integrand.
#[derive(Debug, Clone, Copy)]
pub struct ExtraCoupling {
    pub vi: usize,
    pub vj: usize,
    pub coef: f64,
}

/// Closed-form evaluator of the sector partial integral
/// `chi(t) = 2^E prod_e a_{k_e} int A(t, x, h) dx dh` on the flat backend.
/// Positions are affine in the Gaussian slots with t-jet coefficients, so the
/// whole integral reduces to the Gaussian-moment engine and t-derivatives
/// propagate exactly.
pub struct ChiClosedForm<'a> {
    pub chart: &'a SectorChart,
    pub geom: &'a FlatGeometry,
    /// ambient vertex ids, ordered like the test function's points
    pub ambient: Vec<usize>,
    pub testfn: &'a TestFunction,
    pub extra: Vec<ExtraCoupling>,
    /// overall scalar multiplier (mixture weights etc.)
    pub prefactor: f64,
}

impl<'a> ChiClosedForm<'a> {
    pub fn new(
        chart: &'a SectorChart,
        geom: &'a FlatGeometry,
        ambient: Vec<usize>,
        testfn: &'a TestFunction,
    ) -> Result<Self> {
        if !geom.is_identity_metric() {
            return Err(CoreError::Geometry(
                "the sector pipeline requires the identity metric".into(),
            ));
        }
        if geom.dim != chart.dim {
            return Err(CoreError::DimensionMismatch(geom.dim, chart.dim));
        }
        if testfn.points != ambient.len() || testfn.dim != chart.dim {
            return Err(CoreError::DimensionMismatch(
                testfn.points,
                ambient.len(),
            ));
        }
        // heat-label constants
        let mut pref = 2.0f64.powi(chart.edge_count() as i32);
        for (e, &k) in chart.graph.labels.iter().enumerate() {
            let _ = e;
            pref *= geom.heat_coefficient(k, &[], &[]);
        }
        Ok(ChiClosedForm {
            chart,
            geom,
            ambient,
            testfn,
            extra: vec![],
            prefactor: pref,
        })
    }

    fn slot_layout(&self) -> (usize, Vec<Option<usize>>) {
        // slots: [component roots][tree h][spectators]; returns total count
        // and, for each ambient vertex, its spectator slot if any
        let chart = self.chart;
        let c = chart.components.len();
        let ht = chart.tree_slots.len();
        let mut spectator = vec![None; self.ambient.len()];
        let mut next = c + ht;
        for (i, v) in self.ambient.iter().enumerate() {
            if !chart.vertex_component.contains_key(v) {
                spectator[i] = Some(next);
                next += 1;
            }
        }
        (next, spectator)
    }

    /// chi and its mixed t-derivatives up to `caps` at the point `t0`, as an
    /// anisotropic jet (degree `caps[k]` in axis `k`).
    pub fn jet_at(&self, t0: &[f64], caps: &[u32]) -> Result<Jet<f64>> {
        let chart = self.chart;
        let d = chart.dim;
        let ne = chart.edge_count();
        let total: u32 = caps.iter().sum();
        let basis = JetBasis::cached(caps.to_vec(), total);
        let zero = Jet::zero(&basis);
        // jet-valued t variables
        let tj: Vec<Jet<f64>> = (0..ne).map(|k| Jet::variable(&basis, k, t0[k])).collect();
        // tail products prod_{j >= slot} t_j as jets
        let mut tails = vec![Jet::constant(&basis, 1.0); ne + 1];
        for k in (0..ne).rev() {
            tails[k] = tails[k + 1].mul(&tj[k]);
        }
        let (slots, spectator) = self.slot_layout();
        let c_count = chart.components.len();

        // ambient vertex -> per-slot weight vector (affine, zero offsets)
        let weight_of_vertex = |i: usize| -> Vec<Jet<f64>> {
            let mut w = vec![zero.clone(); slots];
            let v = self.ambient[i];
            if let Some(spec) = spectator[i] {
                w[spec] = Jet::constant(&basis, 1.0);
            } else {
                w[chart.vertex_component[&v]] = Jet::constant(&basis, 1.0);
                for s in &chart.paths[&v] {
                    let c = tails[s.slot].scale(f64::from(s.sign));
                    w[c_count + s.tree_pos] = w[c_count + s.tree_pos].add(&c);
                }
            }
            w
        };

        let mut prob: GaussianProblem<Jet<f64>> = GaussianProblem::new(slots, d, &zero);
        // tree-edge Gaussians exp(-|h|^2/4)
        for pos in 0..chart.tree_slots.len() {
            let a = prob.a_mut(c_count + pos, c_count + pos);
            *a = a.add(&Jet::constant(&basis, 0.5));
        }
        // non-tree cycles exp(-|sum sign * partial * h|^2 / 4)
        for (slot, cyc) in &chart.cycles {
            let mut w = vec![zero.clone(); slots];
            for s in cyc {
                // partial product prod_{slot(e') <= j < slot} t_j
                let mut c = Jet::constant(&basis, f64::from(s.sign));
                for j in s.slot..*slot {
                    c = c.mul(&tj[j]);
                }
                w[c_count + s.tree_pos] = w[c_count + s.tree_pos].add(&c);
            }
            prob.add_rank_one(&w, 0.5);
        }
        // extra couplings exp(-coef |x_vi - x_vj|^2)
        let vertex_weights: Vec<Vec<Jet<f64>>> =
            (0..self.ambient.len()).map(weight_of_vertex).collect();
        for ex in &self.extra {
            let mut w = vec![zero.clone(); slots];
            for (k, item) in w.iter_mut().enumerate() {
                *item = vertex_weights[ex.vi][k].sub(&vertex_weights[ex.vj][k]);
            }
            prob.add_rank_one(&w, 2.0 * ex.coef);
        }

        // one Gaussian problem per test-function term (widths differ)
        let mut out = Jet::zero(&basis);
        for term in &self.testfn.terms {
            let mut p = prob.clone();
            let iw2 = 1.0 / (term.width * term.width);
            let mut constant = 0.0;
            for (i, wv) in vertex_weights.iter().enumerate() {
                p.add_rank_one(wv, iw2);
                for a in 0..d {
                    let mu = term.center[i * d + a];
                    constant += -mu * mu * iw2 / 2.0;
                    for (k, item) in wv.iter().enumerate() {
                        if !item.coeffs.iter().all(|&c| c == 0.0) {
                            p.lin[k][a] = p.lin[k][a].add(&item.scale(mu * iw2));
                        }
                    }
                }
            }
            p.constant = Jet::constant(&basis, constant);
            // polynomial factor: each coordinate (i, a) is an affine form
            let mut forms_cache: BTreeMap<(usize, usize), AffineForm<Jet<f64>>> = BTreeMap::new();
            let mut poly_terms = vec![];
            for (mono, &coef) in &term.poly.terms {
                let mut forms = vec![];
                for (var, &e) in mono.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let (i, a) = (var / d, var % d);
                    let f = forms_cache.entry((i, a)).or_insert_with(|| AffineForm {
                        axis: a,
                        weights: vertex_weights[i].clone(),
                        offset: zero.clone(),
                    });
                    for _ in 0..e {
                        forms.push(f.clone());
                    }
                }
                poly_terms.push((Jet::constant(&basis, coef), forms));
            }
            p.terms = poly_terms;
            out = out.add(&p.integrate());
        }
        Ok(out.scale(self.prefactor))
    }

    pub fn value_at(&self, t0: &[f64]) -> Result<f64> {
        let caps = vec![0u32; self.chart.edge_count()];
        Ok(self.jet_at(t0, &caps)?.value())
    }

    /// Single mixed derivative, picked out of the jet.
    pub fn t_derivative(&self, t0: &[f64], beta: &[u32]) -> Result<f64> {
        Ok(self.jet_at(t0, beta)?.derivative_at_zero(beta))
    }
}

/// Pointwise evaluator of the same partial integral by tensor Gauss-Hermite
/// (or seeded Monte Carlo beyond `mc_axis_threshold` axes). Independent of
/// the closed form: it evaluates the pulled-back integrand at quadrature
/// nodes, so it also serves backends without closed-form Gaussians.
pub struct ChiPointwise<'a> {
    pub chart: &'a SectorChart,
    pub geom: &'a FlatGeometry,
    pub ambient: Vec<usize>,
    pub testfn: &'a TestFunction,
    pub extra: Vec<ExtraCoupling>,
    pub prefactor: f64,
}

/// Above this many scalar integration axes the pointwise evaluator switches
/// to Monte Carlo.
pub const MC_AXIS_THRESHOLD: usize = 8;

impl<'a> ChiPointwise<'a> {
    pub fn new(
        chart: &'a SectorChart,
        geom: &'a FlatGeometry,
        ambient: Vec<usize>,
        testfn: &'a TestFunction,
    ) -> Result<Self> {
        let closed = ChiClosedForm::new(chart, geom, ambient.clone(), testfn)?;
        Ok(ChiPointwise {
            chart,
            geom,
            ambient,
            testfn,
            extra: vec![],
            prefactor: closed.prefactor,
        })
    }

    /// The integrand of chi at fixed (t, x, h) in chart coordinates.
    fn integrand(&self, t: &[f64], x: &[Vec<f64>], h: &[Vec<f64>]) -> Result<f64> {
        let chart = self.chart;
        let (positions, _) = chart.pi_forward(t, x, h)?;
        let mut acc = self.prefactor;
        for slot in 0..chart.edge_count() {
            acc *= (-chart.pullback_edge(slot, t, h, self.geom)? / 4.0).exp();
        }
        // ambient positions: chart vertices from the blow-up, spectators as-is
        let vidx: BTreeMap<usize, usize> = chart
            .graph
            .graph
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        // spectators are appended after x slots by the caller's convention
        let mut flat = vec![0.0; self.testfn.nvars()];
        let mut spec_i = 0;
        for (i, v) in self.ambient.iter().enumerate() {
            let pos: &[f64] = if let Some(&k) = vidx.get(v) {
                &positions[k]
            } else {
                let p = &x[chart.components.len() + spec_i];
                spec_i += 1;
                p
            };
            flat[i * chart.dim..(i + 1) * chart.dim].copy_from_slice(pos);
        }
        for ex in &self.extra {
            let d = chart.dim;
            let mut r2 = 0.0;
            for a in 0..d {
                let diff = flat[ex.vi * d + a] - flat[ex.vj * d + a];
                r2 += diff * diff;
            }
            acc *= (-ex.coef * r2).exp();
        }
        Ok(acc * self.testfn.eval(&flat))
    }

    /// chi(t) by tensor Gauss-Hermite over all slots, or Monte Carlo when the
    /// axis count exceeds the threshold.
    pub fn value_at(&self, t: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
        let chart = self.chart;
        let d = chart.dim;
        let n_spec = self
            .ambient
            .iter()
            .filter(|v| !chart.vertex_component.contains_key(v))
            .count();
        let n_x = chart.components.len() + n_spec;
        let n_h = chart.tree_slots.len();
        let axes = (n_x + n_h) * d;
        // importance Gaussians: h ~ exp(-|h|^2/4); x slots follow the first
        // test-function term's width and a center from its data
        let w0 = self.testfn.terms.first().map(|t| t.width).unwrap_or(1.0);
        if axes <= MC_AXIS_THRESHOLD {
            let gh = gauss_hermite(cfg.gh_order);
            let mut total = 0.0;
            let mut idx = vec![0usize; axes];
            'outer: loop {
                // assemble the point
                let mut weight = 1.0;
                let mut xs = vec![vec![0.0; d]; n_x];
                let mut hs = vec![vec![0.0; d]; n_h];
                for (ax, &i) in idx.iter().enumerate() {
                    let u = gh.nodes[i];
                    let gw = gh.weights[i];
                    let slot = ax / d;
                    let a = ax % d;
                    if slot < n_x {
                        // x = c + sqrt(2) w0 u with weight e^{-u^2}
                        let center = self.x_center(slot, a, w0);
                        xs[slot][a] = center + std::f64::consts::SQRT_2 * w0 * u;
                        weight *= gw * (u * u).exp() * std::f64::consts::SQRT_2 * w0;
                    } else {
                        // h = 2u with weight e^{-u^2} absorbing e^{-|h|^2/4}
                        hs[slot - n_x][a] = 2.0 * u;
                        weight *= gw * (u * u).exp() * 2.0;
                    }
                }
                total += weight * self.integrand(t, &xs, &hs)?;
                // increment multi-index
                for k in 0..axes {
                    idx[k] += 1;
                    if idx[k] < gh.nodes.len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
            Ok(total)
        } else {
            // seeded Monte Carlo with the same importance sampling
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut total = 0.0;
            let norm_x = (2.0 * std::f64::consts::PI).powf(0.5) * w0;
            let norm_h = (4.0 * std::f64::consts::PI).powf(0.5);
            for _ in 0..cfg.mc_samples {
                let mut xs = vec![vec![0.0; d]; n_x];
                let mut hs = vec![vec![0.0; d]; n_h];
                let mut weight = 1.0;
                for slot in 0..n_x {
                    for a in 0..d {
                        let g: f64 = sample_standard_normal(&mut rng);
                        let center = self.x_center(slot, a, w0);
                        xs[slot][a] = center + w0 * g;
                        weight *= norm_x * (g * g / 2.0).exp();
                    }
                }
                for hslot in 0..n_h {
                    for a in 0..d {
                        let g: f64 = sample_standard_normal(&mut rng);
                        hs[hslot][a] = g * std::f64::consts::SQRT_2;
                        weight *= norm_h * (g * g / 2.0).exp();
                    }
                }
                total += weight * self.integrand(t, &xs, &hs)?;
            }
            Ok(total / cfg.mc_samples as f64)
        }
    }

    fn x_center(&self, slot: usize, axis: usize, _w0: f64) -> f64 {
        // center the x-importance Gaussian at the first term's center of the
        // component root (or spectator vertex)
        let chart = self.chart;
        let Some(term) = self.testfn.terms.first() else {
            return 0.0;
        };
        let d = chart.dim;
        if slot < chart.components.len() {
            let root = chart.components[slot][0];
            if let Some(i) = self.ambient.iter().position(|&v| v == root) {
                return term.center[i * d + axis];
            }
            0.0
        } else {
            // spectator slots in ambient order
            let mut k = chart.components.len();
            for (i, v) in self.ambient.iter().enumerate() {
                if !chart.vertex_component.contains_key(v) {
                    if k == slot {
                        return term.center[i * d + axis];
                    }
                    k += 1;
                }
            }
            0.0
        }
    }
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// chi and t-jets for a labelled graph and test function on the flat
/// backend; this is the object the continuation engine consumes.
pub fn chi_closed_form<'a>(
    chart: &'a SectorChart,
    geom: &'a FlatGeometry,
    testfn: &'a TestFunction,
) -> Result<ChiClosedForm<'a>> {
    let ambient = chart.graph.graph.vertices().to_vec();
    ChiClosedForm::new(chart, geom, ambient, testfn)
}

/// Evaluates a complex power of a jet of the exponent linear form:
/// `t^{L(sigma)+a}` expanded as `t^a sum_j (L(sigma) ln t)^j / j!`. Used by
/// tests; the continuation engine works with the log-moment integrals
/// directly.
pub fn power_with_sigma_jet(
    t: f64,
    form: &LinearForm,
    offset: i64,
    basis: &std::sync::Arc<JetBasis>,
) -> Jet<Complex64> {
    let lnt = t.ln();
    let lin: Vec<Complex64> = form
        .coeffs_f64()
        .iter()
        .map(|&c| Complex64::new(c * lnt, 0.0))
        .collect();
    let expo = Jet::affine(basis, Complex64::ZERO, &lin).exp();
    expo.scale(Complex64::new(t.powi(offset as i32), 0.0))
}
