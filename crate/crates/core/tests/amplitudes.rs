//! Amplitude germs against independent oracles: head-Green pairings computed
//! by direct quadrature, the closed-form bubble residue, and the direct
//! parameter-space oracle in the absolute-convergence region.

use num_complex::Complex64;
use std::f64::consts::PI;

use germrenorm::continuation::{
    assemble_full_amplitude, direct_amplitude_oracle, labelled_amplitude_germ, sector_sum_value,
};
use germrenorm::gauss::GaussianProblem;
use germrenorm::geometry::{FlatGeometry, TestFunction};
use germrenorm::graph::{families, LabelledGraph};
use germrenorm::linform::LinearForm;
use germrenorm::quadrature::{tanh_sinh_01, QuadratureConfig};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Gaussian profile on n points with all centers equal, width w.
fn centered_gaussian(d: usize, n: usize, mu: &[f64], w: f64) -> TestFunction {
    let mut center = vec![];
    for _ in 0..n {
        center.extend_from_slice(mu);
    }
    TestFunction::gaussian(d, n, center, w).unwrap()
}

/// `int phi(x, x) dx` for a two-point profile, via the scalar Gaussian
/// engine (independent of the sector pipeline).
fn diagonal_integral(phi: &TestFunction, d: usize) -> f64 {
    let mut total = 0.0;
    for term in &phi.terms {
        let mut prob = GaussianProblem::new(1, d, &0.0f64);
        let iw2 = 1.0 / (term.width * term.width);
        // |x - mu1|^2 + |x - mu2|^2 over 2 w^2
        let mut constant = 0.0;
        for pt in 0..2 {
            let mut wv = vec![0.0; 1];
            wv[0] = 1.0;
            prob.add_rank_one(&wv, iw2);
            for a in 0..d {
                let mu = term.center[pt * d + a];
                prob.lin[0][a] += mu * iw2;
                constant -= mu * mu * iw2 / 2.0;
            }
        }
        prob.constant = constant;
        let mut forms = vec![];
        for (mono, &coef) in &term.poly.terms {
            let mut fs = vec![];
            for (var, &e) in mono.iter().enumerate() {
                let a = var % d;
                for _ in 0..e {
                    fs.push(germrenorm::gauss::AffineForm {
                        axis: a,
                        weights: vec![1.0],
                        offset: 0.0,
                    });
                }
            }
            forms.push((coef, fs));
        }
        prob.terms = forms;
        total += prob.integrate();
    }
    total
}

/// `int G_head(|x-y|) phi(x,y) dx dy` with `G_head = int_0^1 K_t dt`, by
/// tanh-sinh in t and closed-form Gaussians in (x, y).
fn head_green_pairing(phi: &TestFunction, geom: &FlatGeometry) -> f64 {
    let d = geom.dim;
    let q = tanh_sinh_01(6);
    let mut total = 0.0;
    for (&t, &w) in q.nodes.iter().zip(&q.weights) {
        let mut config = 0.0;
        for term in &phi.terms {
            let mut prob = GaussianProblem::new(2, d, &0.0f64);
            prob.add_rank_one(&[1.0, -1.0], 1.0 / (2.0 * t));
            let iw2 = 1.0 / (term.width * term.width);
            let mut constant = 0.0;
            for pt in 0..2 {
                let mut wv = vec![0.0; 2];
                wv[pt] = 1.0;
                prob.add_rank_one(&wv, iw2);
                for a in 0..d {
                    let mu = term.center[pt * d + a];
                    prob.lin[pt][a] += mu * iw2;
                    constant -= mu * mu * iw2 / 2.0;
                }
            }
            prob.constant = constant;
            prob.terms = vec![(1.0, vec![])];
            config += prob.integrate();
        }
        if !config.is_finite() {
            continue;
        }
        total += w * (4.0 * PI * t).powf(-(d as f64) / 2.0)
            * (-t * geom.mass * geom.mass).exp()
            * config;
    }
    total
}

#[test]
fn single_edge_head_value_d4() {
    // convergent graph: the germ is holomorphic and its value at the base
    // point is the head-Green pairing
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let phi = centered_gaussian(d, 2, &[0.1, 0.0, -0.2, 0.0], 0.9);
    let lg = LabelledGraph::zero_labels(families::single_edge());
    let cfg = QuadratureConfig::default();
    let result = labelled_amplitude_germ(&lg, &phi, &geom, &cfg, 2).unwrap();
    assert!(result.realized_poles.is_empty(), "single edge must be regular");
    let value = result.germ.eval(&[Complex64::ZERO]).re;
    let reference = head_green_pairing(&phi, &geom);
    let rel = (value - reference).abs() / reference.abs();
    assert!(
        rel <= 1e-6,
        "head pairing mismatch: {value} vs {reference} (rel {rel:.2e})"
    );
}

#[test]
fn bubble_residue_d4() {
    // banana-2 in d=4: residue along s1 + s2 = 2 is int phi(x,x) / (16 pi^2)
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let w = 0.8;
    let mu = [0.2, -0.1, 0.3, 0.0];
    let phi = centered_gaussian(d, 2, &mu, w);
    let lg = LabelledGraph::zero_labels(families::banana(2));
    let cfg = QuadratureConfig::default();
    let result = labelled_amplitude_germ(&lg, &phi, &geom, &cfg, 3).unwrap();
    let hyper = LinearForm::from_integers(&[1, 1]);
    assert_eq!(result.realized_poles, vec![hyper.clone()]);
    let residue = result.germ.residue_along(&hyper).re;
    // closed form for the equal-center Gaussian: int phi(x,x) dx = (pi w^2)^2
    let diag = diagonal_integral(&phi, d);
    assert!((diag - (PI * w * w).powi(2)).abs() <= 1e-10 * diag);
    let reference = diag / (16.0 * PI * PI);
    let rel = (residue - reference).abs() / reference.abs();
    assert!(
        rel <= 1e-6,
        "bubble residue mismatch: {residue} vs {reference} (rel {rel:.2e})"
    );
}

#[test]
fn triangle_d4_is_holomorphic() {
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let phi = centered_gaussian(d, 3, &[0.0, 0.0, 0.0, 0.0], 0.7);
    let lg = LabelledGraph::zero_labels(families::triangle());
    let cfg = QuadratureConfig {
        cheb_degree: 10,
        ..QuadratureConfig::default()
    };
    let result = labelled_amplitude_germ(&lg, &phi, &geom, &cfg, 1).unwrap();
    assert!(
        result.realized_poles.is_empty(),
        "triangle in d=4 is power-counting finite, got poles {:?}",
        result.realized_poles
    );
    assert!(result.germ.eval(&[Complex64::ZERO; 3]).re > 0.0);
}

#[test]
fn sector_sum_matches_direct_oracle() {
    let cfg = QuadratureConfig::default();
    // banana-2 in d=1 at s = (1.5, 1.5)
    let geom = FlatGeometry::new(1, 0.0).unwrap();
    let phi = centered_gaussian(1, 2, &[0.2], 1.1);
    let lg = LabelledGraph::zero_labels(families::banana(2));
    let s = [c(1.5), c(1.5)];
    let oracle = direct_amplitude_oracle(&lg, &s, &phi, &geom, &cfg).unwrap();
    let sector = sector_sum_value(&lg, &s, &phi, &geom, &cfg).unwrap();
    let rel = (oracle - sector).norm() / oracle.norm();
    assert!(
        rel <= 1e-6,
        "banana-2 d=1: oracle {oracle} vs sectors {sector} (rel {rel:.2e})"
    );

    // triangle in d=2 at s = (2, 2, 2), three points
    let geom = FlatGeometry::new(2, 0.0).unwrap();
    let phi = centered_gaussian(2, 3, &[0.0, 0.3], 0.9);
    let lg = LabelledGraph::zero_labels(families::triangle());
    let s = [c(2.0), c(2.0), c(2.0)];
    let oracle = direct_amplitude_oracle(&lg, &s, &phi, &geom, &cfg).unwrap();
    let sector = sector_sum_value(&lg, &s, &phi, &geom, &cfg).unwrap();
    let rel = (oracle - sector).norm() / oracle.norm();
    assert!(
        rel <= 1e-6,
        "triangle d=2: oracle {oracle} vs sectors {sector} (rel {rel:.2e})"
    );

    // complex regulator off the real axis
    let phi = centered_gaussian(2, 2, &[0.1, -0.2], 1.0);
    let lg = LabelledGraph::zero_labels(families::banana(2));
    let s = [c(2.2) + Complex64::new(0.0, 0.3), c(1.9)];
    let oracle = direct_amplitude_oracle(&lg, &s, &phi, &geom, &cfg).unwrap();
    let sector = sector_sum_value(&lg, &s, &phi, &geom, &cfg).unwrap();
    let rel = (oracle - sector).norm() / oracle.norm();
    assert!(rel <= 1e-6, "complex s: rel {rel:.2e}");
}

#[test]
fn oracle_preconditions() {
    let cfg = QuadratureConfig::default();
    let geom = FlatGeometry::new(2, 0.0).unwrap();
    let phi = centered_gaussian(2, 2, &[0.0, 0.0], 1.0);
    let lg = LabelledGraph::zero_labels(families::banana(2));
    // phi = 0 -> 0
    let zero = phi.scale(0.0);
    let v = direct_amplitude_oracle(&lg, &[c(2.0), c(2.0)], &zero, &geom, &cfg).unwrap();
    assert_eq!(v, Complex64::ZERO);
    // outside the convergence region
    assert!(direct_amplitude_oracle(&lg, &[c(1.0), c(2.0)], &phi, &geom, &cfg).is_err());
}

#[test]
fn assemble_single_edge_full_green_d4() {
    // closed-form reference: for an equal-center Gaussian pair of width w in
    // d=4, int phi / (4 pi^2 r^2) = pi^2 w^6
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let w = 0.75;
    let phi = centered_gaussian(d, 2, &[0.3, 0.0, -0.1, 0.2], w);
    let cfg = QuadratureConfig::default();
    let result =
        assemble_full_amplitude(&families::single_edge(), &phi, &geom, 0, 2, &cfg).unwrap();
    assert!(result.realized_poles.is_empty());
    let value = result.germ.eval(&[Complex64::ZERO]).re;
    let reference = PI * PI * w.powi(6);
    let rel = (value - reference).abs() / reference;
    assert!(
        rel <= 1e-5,
        "full single-edge amplitude {value} vs closed form {reference} (rel {rel:.2e})"
    );
}

#[test]
fn assemble_banana2_residue_unchanged_by_tails() {
    // tail and cross terms are holomorphic: the residue is the head residue
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let w = 0.8;
    let phi = centered_gaussian(d, 2, &[0.0; 4], w);
    let cfg = QuadratureConfig::default();
    let result = assemble_full_amplitude(&families::banana(2), &phi, &geom, 0, 3, &cfg).unwrap();
    let hyper = LinearForm::from_integers(&[1, 1]);
    assert_eq!(result.realized_poles, vec![hyper.clone()]);
    let residue = result.germ.residue_along(&hyper).re;
    let reference = (PI * w * w).powi(2) / (16.0 * PI * PI);
    let rel = (residue - reference).abs() / reference;
    assert!(
        rel <= 1e-6,
        "assembled residue {residue} vs {reference} (rel {rel:.2e})"
    );
}

#[test]
fn edge_relabelling_permutes_germ_variables() {
    // path with two edges: convergent in d = 1; swapping the edge order must
    // transpose the holomorphic coefficients
    let d = 1;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let phi = TestFunction::gaussian(d, 3, vec![0.0, 0.4, 0.9], 0.8).unwrap();
    let g1 = germrenorm::FeynmanGraph::new(vec![1, 2, 3], vec![(1, 2), (2, 3)]).unwrap();
    let g2 = germrenorm::FeynmanGraph::new(vec![1, 2, 3], vec![(2, 3), (1, 2)]).unwrap();
    let cfg = QuadratureConfig::default();
    let r1 = labelled_amplitude_germ(&LabelledGraph::zero_labels(g1), &phi, &geom, &cfg, 2)
        .unwrap();
    let r2 = labelled_amplitude_germ(&LabelledGraph::zero_labels(g2), &phi, &geom, &cfg, 2)
        .unwrap();
    for m in &r1.germ.holo.basis.monomials {
        let swapped = vec![m[1], m[0]];
        let a = r1.germ.holo.coeff(m);
        let b = r2.germ.holo.coeff(&swapped);
        assert!(
            (a - b).norm() <= 1e-10 * a.norm().max(1.0),
            "coefficient {m:?}: {a} vs {b}"
        );
    }
}

#[test]
fn cap_enforced() {
    let d = 2;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let phi = centered_gaussian(d, 2, &[0.0, 0.0], 1.0);
    let lg = LabelledGraph::zero_labels(families::banana(7));
    let cfg = QuadratureConfig::default();
    assert!(labelled_amplitude_germ(&lg, &phi, &geom, &cfg, 1).is_err());
}
