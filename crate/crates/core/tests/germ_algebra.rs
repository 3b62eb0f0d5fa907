//! Canonical decomposition of meromorphic germs: worked examples checked by
//! hand plus evaluation-based round trips at random regular points.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use germrenorm::germ::{
    decompose, evaluate_at_base, external_product, germ_from_json, germ_to_json,
    multiply_by_holomorphic, reduce_dependent_denominators, MeromorphicGerm, RawGerm, RawTerm,
};
use germrenorm::jet::{Jet, JetBasis};
use germrenorm::linform::{rat, rat_int, LinearForm};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn coord(i: usize, p: usize) -> LinearForm {
    LinearForm::coordinate(i, p)
}

/// 1/prod(dens) as a raw germ with constant numerator, order `ord`.
fn inverse_product(p: usize, dens: Vec<(LinearForm, u32)>, ord: u32) -> RawGerm {
    let basis = JetBasis::isotropic(p, ord);
    let mut raw = RawGerm::new(p);
    raw.push(RawTerm {
        num: Jet::constant(&basis, c(1.0)),
        dens,
    });
    raw
}

fn random_regular_points(
    forms: &[LinearForm],
    p: usize,
    n: usize,
    seed: u64,
) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![];
    while out.len() < n {
        let pt: Vec<Complex64> = (0..p)
            .map(|_| Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        if forms
            .iter()
            .all(|f| f.eval_complex(&pt).norm() > 0.05)
        {
            out.push(pt);
        }
    }
    out
}

#[test]
fn reduce_leaves_independent_terms_alone() {
    let p = 2;
    let raw = inverse_product(p, vec![(coord(0, p), 1), (coord(1, p), 1)], 3);
    let red = reduce_dependent_denominators(&raw).unwrap();
    assert_eq!(red.terms.len(), 1);
    assert_eq!(red.terms[0].dens.len(), 2);
}

#[test]
fn reduce_partial_fraction_identity() {
    // 1/(s1 s2 (s1+s2)) = 1/(s2 (s1+s2)^2) + 1/(s1 (s1+s2)^2)
    let p = 2;
    let s12 = coord(0, p).add(&coord(1, p)).unwrap();
    let raw = inverse_product(
        p,
        vec![(coord(0, p), 1), (coord(1, p), 1), (s12.clone(), 1)],
        4,
    );
    let red = reduce_dependent_denominators(&raw).unwrap();
    assert_eq!(red.terms.len(), 2);
    for t in &red.terms {
        assert_eq!(t.num.value(), c(1.0));
        let mult_s12 = t
            .dens
            .iter()
            .find(|(l, _)| *l == s12)
            .map(|(_, n)| *n)
            .unwrap();
        assert_eq!(mult_s12, 2);
        assert_eq!(t.dens.iter().map(|(_, n)| n).sum::<u32>(), 3);
    }
    // symbolic check by clearing denominators: evaluate both sides
    for pt in random_regular_points(&[coord(0, p), coord(1, p), s12], p, 10, 7) {
        let lhs = raw.eval(&pt);
        let rhs = red.eval(&pt);
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }
}

#[test]
fn reduce_merges_proportional_forms() {
    // 1/(s1 * 2 s1) = (1/2) / s1^2
    let p = 2;
    let raw = inverse_product(
        p,
        vec![(coord(0, p), 1), (coord(0, p).scale(&rat_int(2)), 1)],
        3,
    );
    let red = reduce_dependent_denominators(&raw).unwrap();
    assert_eq!(red.terms.len(), 1);
    assert_eq!(red.terms[0].dens, vec![(coord(0, p), 2)]);
    assert_eq!(red.terms[0].num.value(), c(0.5));
}

#[test]
fn decompose_splits_linear_over_pole() {
    // (s1 + s2)/s1 -> holo 1, polar s2/s1
    let p = 2;
    let basis = JetBasis::isotropic(p, 3);
    let num = Jet::affine(&basis, c(0.0), &[c(1.0), c(1.0)]);
    let mut raw = RawGerm::new(p);
    raw.push(RawTerm {
        num,
        dens: vec![(coord(0, p), 1)],
    });
    let g = decompose(&raw, 2).unwrap();
    assert_eq!(g.holo.value(), c(1.0));
    assert_eq!(g.holo.coeff(&[1, 0]), c(0.0));
    assert_eq!(g.holo.coeff(&[0, 1]), c(0.0));
    assert_eq!(g.polar.len(), 1);
    let t = &g.polar[0];
    assert_eq!(t.dens, vec![(coord(0, p), 1)]);
    assert!(t.orthogonality_holds());
    // numerator is s2 in the ell coordinates (ell = [s2])
    assert_eq!(t.ell, vec![coord(1, p)]);
    assert_eq!(t.num.coeff(&[1]), c(1.0));
    assert_eq!(t.num.value(), c(0.0));
}

#[test]
fn decompose_square_over_pole() {
    // (s1 + s2)^2/s1 -> holo s1 + 2 s2, polar s2^2/s1
    let p = 2;
    let basis = JetBasis::isotropic(p, 3);
    let lin = Jet::affine(&basis, c(0.0), &[c(1.0), c(1.0)]);
    let num = lin.mul(&lin);
    let mut raw = RawGerm::new(p);
    raw.push(RawTerm {
        num,
        dens: vec![(coord(0, p), 1)],
    });
    let g = decompose(&raw, 2).unwrap();
    assert_eq!(g.holo.value(), c(0.0));
    assert_eq!(g.holo.coeff(&[1, 0]), c(1.0));
    assert_eq!(g.holo.coeff(&[0, 1]), c(2.0));
    assert_eq!(g.polar.len(), 1);
    assert_eq!(g.polar[0].num.coeff(&[2]), c(1.0));
    // project_holomorphic of this germ, per the worked example
    let proj = g.project_holomorphic();
    assert_eq!(proj.coeff(&[1, 0]), c(1.0));
    assert_eq!(proj.coeff(&[0, 1]), c(2.0));
}

#[test]
fn decompose_pure_polar_nonorthogonal_pair() {
    // 1/(s1 (s1+s2)): already polar, constant numerator, holo 0
    let p = 2;
    let s12 = coord(0, p).add(&coord(1, p)).unwrap();
    let raw = inverse_product(p, vec![(coord(0, p), 1), (s12, 1)], 4);
    let g = decompose(&raw, 2).unwrap();
    assert_eq!(g.holo.max_norm(), 0.0);
    assert_eq!(g.polar.len(), 1);
    assert_eq!(g.polar[0].num.value(), c(1.0));
    assert!(g.polar[0].orthogonality_holds());
    // pure polar projects to zero
    assert_eq!(g.project_holomorphic().max_norm(), 0.0);
}

#[test]
fn evaluate_at_base_examples() {
    let p = 2;
    let basis = JetBasis::isotropic(p, 2);
    let jet = Jet::affine(&basis, c(3.0), &[c(0.0), c(1.0)]);
    assert_eq!(evaluate_at_base(&jet), c(3.0));
    let mut prod = Jet::zero(&basis);
    prod.set_coeff(&[1, 1], c(1.0));
    assert_eq!(evaluate_at_base(&prod), c(0.0));
}

#[test]
fn decompose_insufficient_order_errors() {
    let p = 2;
    let raw = inverse_product(p, vec![(coord(0, p), 2)], 2);
    assert!(decompose(&raw, 2).is_err());
    assert!(decompose(&raw, 0).is_ok());
}

#[test]
fn roundtrip_random_raw_germs() {
    let p = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let forms = vec![
        coord(0, p),
        coord(1, p),
        coord(2, p),
        coord(0, p).add(&coord(1, p)).unwrap(),
        coord(1, p).add(&coord(2, p)).unwrap(),
    ];
    for trial in 0..6 {
        let order = 4;
        let basis = JetBasis::isotropic(p, order);
        let mut raw = RawGerm::new(p);
        for _ in 0..3 {
            let mut num = Jet::zero(&basis);
            for k in 0..basis.len() {
                if basis.monomials[k].iter().sum::<u32>() <= 2 {
                    num.coeffs[k] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                }
            }
            let nd = rng.gen_range(0..3usize);
            let mut dens = vec![];
            for _ in 0..nd {
                dens.push((forms[rng.gen_range(0..forms.len())].clone(), 1u32));
            }
            raw.push(RawTerm { num, dens });
        }
        let germ = decompose(&raw, 2).unwrap();
        for t in &germ.polar {
            assert!(t.orthogonality_holds(), "trial {trial}");
        }
        for pt in random_regular_points(&forms, p, 20, 100 + trial) {
            let lhs = raw.eval(&pt);
            let rhs = germ.eval(&pt);
            let scale = lhs.norm().max(1.0);
            assert!(
                (lhs - rhs).norm() <= 1e-10 * scale,
                "trial {trial}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn split_independent_of_term_order() {
    let p = 2;
    let s12 = coord(0, p).add(&coord(1, p)).unwrap();
    let basis = JetBasis::isotropic(p, 4);
    let t1 = RawTerm {
        num: Jet::affine(&basis, c(1.0), &[c(2.0), c(-1.0)]),
        dens: vec![(coord(0, p), 1), (s12.clone(), 1)],
    };
    let t2 = RawTerm {
        num: Jet::affine(&basis, c(-0.5), &[c(0.0), c(3.0)]),
        dens: vec![(coord(1, p), 1)],
    };
    let mut raw_a = RawGerm::new(p);
    raw_a.push(t1.clone());
    raw_a.push(t2.clone());
    let mut raw_b = RawGerm::new(p);
    raw_b.push(t2);
    raw_b.push(t1);
    let ga = decompose(&raw_a, 2).unwrap();
    let gb = decompose(&raw_b, 2).unwrap();
    for k in 0..ga.holo.basis.len() {
        assert!((ga.holo.coeffs[k] - gb.holo.coeffs[k]).norm() <= 1e-13);
    }
    assert_eq!(ga.polar.len(), gb.polar.len());
    for (ta, tb) in ga.polar.iter().zip(&gb.polar) {
        assert_eq!(ta.dens, tb.dens);
        for k in 0..ta.num.basis.len() {
            assert!((ta.num.coeffs[k] - tb.num.coeffs[k]).norm() <= 1e-13);
        }
    }
}

#[test]
fn projection_idempotent() {
    let p = 2;
    let basis = JetBasis::isotropic(p, 3);
    let h = Jet::affine(&basis, c(1.5), &[c(0.25), c(-2.0)]);
    let germ = MeromorphicGerm::from_holo(h.clone());
    let once = germ.project_holomorphic();
    let twice = MeromorphicGerm::from_holo(once.clone()).project_holomorphic();
    for k in 0..basis.len() {
        assert_eq!(h.coeffs[k], once.coeffs[k]);
        assert_eq!(once.coeffs[k], twice.coeffs[k]);
    }
}

#[test]
fn external_product_examples() {
    // (1/s1) x (1/s2) -> 1/(s1 s2), purely polar
    let g1 = decompose(&inverse_product(1, vec![(coord(0, 1), 1)], 3), 2).unwrap();
    let g2 = decompose(&inverse_product(1, vec![(coord(0, 1), 1)], 3), 2).unwrap();
    let prod = external_product(&g1, &g2).unwrap();
    assert_eq!(prod.dim, 2);
    assert_eq!(prod.holo.max_norm(), 0.0);
    assert_eq!(prod.polar.len(), 1);
    let mut dens = prod.polar[0].dens.clone();
    dens.sort_by_key(|(l, _)| l.coeffs_f64().iter().position(|&c| c != 0.0));
    assert_eq!(dens, vec![(coord(0, 2), 1), (coord(1, 2), 1)]);

    // (1 + s1) x (2) -> 2 + 2 s1, holomorphic
    let b1 = JetBasis::isotropic(1, 2);
    let h1 = MeromorphicGerm::from_holo(Jet::affine(&b1, c(1.0), &[c(1.0)]));
    let h2 = MeromorphicGerm::from_holo(Jet::constant(&b1, c(2.0)));
    let prod = external_product(&h1, &h2).unwrap();
    assert!(prod.polar.is_empty());
    assert_eq!(prod.holo.value(), c(2.0));
    assert_eq!(prod.holo.coeff(&[1, 0]), c(2.0));
    assert_eq!(prod.holo.coeff(&[0, 1]), c(0.0));

    // (1/s1 + 1) x (1/s2 + 1) -> polar {1/(s1 s2), 1/s1, 1/s2}, holo 1
    let one = MeromorphicGerm::from_holo(Jet::constant(&b1, c(1.0)));
    let ga = g1.add(&one).unwrap();
    let gb = g2.add(&one).unwrap();
    let prod = external_product(&ga, &gb).unwrap();
    assert_eq!(prod.holo.value(), c(1.0));
    assert_eq!(prod.polar.len(), 3);

    // factorization: pi(g1 x g2) = pi(g1) x pi(g2), coefficient-exact
    let pi_prod = prod.project_holomorphic();
    let pi_fact = external_product(
        &MeromorphicGerm::from_holo(ga.project_holomorphic()),
        &MeromorphicGerm::from_holo(gb.project_holomorphic()),
    )
    .unwrap();
    for (k, m) in pi_prod.basis.monomials.iter().enumerate() {
        assert_eq!(pi_prod.coeffs[k], pi_fact.holo.coeff(m));
    }
}

#[test]
fn multiply_by_holomorphic_examples() {
    let p = 1;
    // (1/s1) * s1 = 1
    let g = decompose(&inverse_product(p, vec![(coord(0, p), 1)], 4), 2).unwrap();
    let b = JetBasis::isotropic(p, 4);
    let s1 = Jet::affine(&b, c(0.0), &[c(1.0)]);
    let out = multiply_by_holomorphic(&g, &s1, 2).unwrap();
    assert!(out.polar.is_empty());
    assert_eq!(out.holo.value(), c(1.0));
    assert_eq!(out.holo.coeff(&[1]), c(0.0));

    // (1/s1) * (1 + s2) in p = 2: purely polar 1/s1 + s2/s1
    let p = 2;
    let g = decompose(&inverse_product(p, vec![(coord(0, p), 1)], 4), 2).unwrap();
    let b = JetBasis::isotropic(p, 4);
    let h = Jet::affine(&b, c(1.0), &[c(0.0), c(1.0)]);
    let out = multiply_by_holomorphic(&g, &h, 2).unwrap();
    assert_eq!(out.holo.max_norm(), 0.0);
    assert_eq!(out.polar.len(), 1);
    assert_eq!(out.polar[0].num.value(), c(1.0));
    assert_eq!(out.polar[0].num.coeff(&[1]), c(1.0));

    // (s2^2/s1) * s1 = s2^2, holomorphic
    let basis = JetBasis::isotropic(p, 4);
    let mut num = Jet::zero(&basis);
    num.set_coeff(&[0, 2], c(1.0));
    let mut raw = RawGerm::new(p);
    raw.push(RawTerm {
        num,
        dens: vec![(coord(0, p), 1)],
    });
    let g = decompose(&raw, 2).unwrap();
    let s1 = Jet::affine(&basis, c(0.0), &[c(1.0), c(0.0)]);
    let out = multiply_by_holomorphic(&g, &s1, 2).unwrap();
    assert!(out.polar.is_empty());
    assert_eq!(out.holo.coeff(&[0, 2]), c(1.0));
}

#[test]
fn linearity_of_decompose() {
    let p = 2;
    let basis = JetBasis::isotropic(p, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s12 = coord(0, p).add(&coord(1, p)).unwrap();
    let mk = |rng: &mut ChaCha8Rng| {
        let mut raw = RawGerm::new(p);
        let mut num = Jet::zero(&basis);
        for k in 0..basis.len() {
            if basis.monomials[k].iter().sum::<u32>() <= 2 {
                num.coeffs[k] = c(rng.gen_range(-1.0..1.0));
            }
        }
        raw.push(RawTerm {
            num,
            dens: vec![(coord(0, p), 1), (s12.clone(), 1)],
        });
        raw
    };
    let f = mk(&mut rng);
    let g = mk(&mut rng);
    let (a, b) = (rat(2, 3), rat(-7, 4));
    let (af, bf) = (
        c(2.0 / 3.0),
        c(-7.0 / 4.0),
    );
    let mut comb = RawGerm::new(p);
    for t in &f.terms {
        comb.push(RawTerm {
            num: t.num.scale(af),
            dens: t.dens.clone(),
        });
    }
    for t in &g.terms {
        comb.push(RawTerm {
            num: t.num.scale(bf),
            dens: t.dens.clone(),
        });
    }
    let lhs = decompose(&comb, 2).unwrap();
    let rhs = decompose(&f, 2)
        .unwrap()
        .scale(af)
        .add(&decompose(&g, 2).unwrap().scale(bf))
        .unwrap();
    for (k, m) in lhs.holo.basis.monomials.iter().enumerate() {
        assert!((lhs.holo.coeffs[k] - rhs.holo.coeff(m)).norm() <= 1e-12);
    }
    let _ = (a, b);
}

#[test]
fn germ_json_roundtrip() {
    let p = 2;
    let s12 = coord(0, p).add(&coord(1, p)).unwrap();
    let basis = JetBasis::isotropic(p, 4);
    let mut raw = RawGerm::new(p);
    raw.push(RawTerm {
        num: Jet::affine(&basis, c(1.0), &[c(0.5), c(-0.25)]),
        dens: vec![(coord(0, p), 1), (s12.clone(), 1)],
    });
    let germ = decompose(&raw, 2).unwrap();
    let j = germ_to_json(&germ);
    let text = serde_json::to_string(&j).unwrap();
    let back = germ_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    for pt in random_regular_points(&[coord(0, p), coord(1, p), s12], p, 10, 11) {
        assert!((germ.eval(&pt) - back.eval(&pt)).norm() <= 1e-12);
    }
}
