use germrenorm::blowup::{chi_closed_form, SectorChart};
use germrenorm::continuation::{ibp_extend_cube_raw, CubeIntegralSpec};
use germrenorm::geometry::{FlatGeometry, TestFunction};
use germrenorm::graph::{families, LabelledGraph};
use germrenorm::quadrature::QuadratureConfig;
use std::time::Instant;

fn main() {
    let d = 4;
    let geom = FlatGeometry::new(d, 0.0).unwrap();
    let g = families::sunset_with_legs();
    let lg = LabelledGraph::zero_labels(g);
    let phi = TestFunction::gaussian(d, 4, vec![0.0; 16], 0.8).unwrap();
    let perm: Vec<usize> = vec![1, 2, 3, 0, 4]; // sunset edges first: worst depths
    let chart = SectorChart::new(&lg, &perm, d).unwrap();
    println!("depths: {:?}", chart.required_ibp_depths());
    let chi = chi_closed_form(&chart, &geom, &phi).unwrap();
    let caps = chart.required_ibp_depths();
    let t0 = Instant::now();
    let n_eval = 200;
    for i in 0..n_eval {
        let t = [0.3 + 0.001 * i as f64 / n_eval as f64, 0.5, 0.7, 0.2, 0.9];
        let _ = chi.jet_at(&t, &caps).unwrap();
    }
    let per_eval = t0.elapsed().as_secs_f64() / n_eval as f64;
    println!("chi jet eval: {:.1} us", per_eval * 1e6);
    let cfg = QuadratureConfig { cheb_degree: 8, ..QuadratureConfig::default() };
    let grid_nodes: usize = 9usize.pow(5);
    println!("grid nodes: {grid_nodes}, projected grid time: {:.1} s", grid_nodes as f64 * per_eval);
    let (sigma_forms, offsets) = germrenorm::blowup::sector_exponent_forms(&lg, &perm, d).unwrap();
    let spec = CubeIntegralSpec { dim: 5, sigma_forms, offsets, factor: &chi, order: 0, config: &cfg, cache_key: None };
    let t1 = Instant::now();
    let (raw, _) = ibp_extend_cube_raw(&spec).unwrap();
    println!("one full sector: {:.1} s, raw terms {}", t1.elapsed().as_secs_f64(), raw.terms.len());
}
