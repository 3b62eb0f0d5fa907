//! Criterion benchmarks of the pipeline's hot paths: Kruskal charts, the
//! canonical germ decomposition, closed-form chi jets and a full sector
//! continuation.

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

use germrenorm::blowup::{chi_closed_form, SectorChart};
use germrenorm::continuation::{ibp_extend_cube, CubeIntegralSpec};
use germrenorm::geometry::{FlatGeometry, TestFunction};
use germrenorm::germ::{decompose, RawGerm, RawTerm};
use germrenorm::graph::{families, kruskal_tree, LabelledGraph, MetricGraph};
use germrenorm::jet::{Jet, JetBasis};
use germrenorm::linform::LinearForm;
use germrenorm::quadrature::QuadratureConfig;

fn bench_kruskal(c: &mut Criterion) {
    let graph = families::sunset_with_legs();
    let metric = MetricGraph::new(graph, vec![0.11, 0.23, 0.37, 0.41, 0.53]).unwrap();
    c.bench_function("kruskal_sunset_with_legs", |b| {
        b.iter(|| kruskal_tree(black_box(&metric)).unwrap())
    });
}

fn bench_decompose(c: &mut Criterion) {
    let p = 3;
    let coord = |i: usize| LinearForm::coordinate(i, p);
    let s12 = coord(0).add(&coord(1)).unwrap();
    let s123 = s12.add(&coord(2)).unwrap();
    let basis = JetBasis::isotropic(p, 5);
    let mut raw = RawGerm::new(p);
    let mut num = Jet::zero(&basis);
    for k in 0..basis.len() {
        num.coeffs[k] = Complex64::new(1.0 / (k + 1) as f64, 0.0);
    }
    raw.push(RawTerm {
        num: num.clone(),
        dens: vec![(coord(0), 1), (s12.clone(), 1), (s123.clone(), 1)],
    });
    raw.push(RawTerm {
        num,
        dens: vec![(coord(1), 2), (s123, 1)],
    });
    c.bench_function("decompose_three_variables", |b| {
        b.iter(|| decompose(black_box(&raw), 2).unwrap())
    });
}

fn bench_chi_jet(c: &mut Criterion) {
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let lg = LabelledGraph::zero_labels(families::banana(3));
    let chart = SectorChart::new(&lg, &[0, 1, 2], d).unwrap();
    let phi = TestFunction::gaussian(d, 2, vec![0.0; 2 * d], 0.8).unwrap();
    let chi = chi_closed_form(&chart, &geom, &phi).unwrap();
    let caps = chart.required_ibp_depths();
    c.bench_function("chi_jet_banana3_d4", |b| {
        b.iter(|| chi.jet_at(black_box(&[0.3, 0.5, 0.7]), &caps).unwrap())
    });
}

fn bench_sector_continuation(c: &mut Criterion) {
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let lg = LabelledGraph::zero_labels(families::banana(2));
    let chart = SectorChart::new(&lg, &[0, 1], d).unwrap();
    let phi = TestFunction::gaussian(d, 2, vec![0.0; 2 * d], 0.8).unwrap();
    let chi = chi_closed_form(&chart, &geom, &phi).unwrap();
    let cfg = QuadratureConfig::default();
    let (sigma_forms, offsets) =
        germrenorm::blowup::sector_exponent_forms(&lg, &[0, 1], d).unwrap();
    c.bench_function("ibp_sector_banana2_d4", |b| {
        b.iter(|| {
            let spec = CubeIntegralSpec {
                dim: 2,
                sigma_forms: sigma_forms.clone(),
                offsets: offsets.clone(),
                factor: &chi,
                order: 3,
                config: &cfg,
                cache_key: None,
            };
            ibp_extend_cube(black_box(&spec)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_kruskal,
    bench_decompose,
    bench_chi_jet,
    bench_sector_continuation
);
criterion_main!(benches);
