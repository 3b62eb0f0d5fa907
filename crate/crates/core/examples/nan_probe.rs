use germrenorm::continuation::direct_amplitude_oracle;
use germrenorm::geometry::{FlatGeometry, TestFunction};
use germrenorm::graph::{families, LabelledGraph};
use germrenorm::quadrature::{tanh_sinh_01, QuadratureConfig};
use germrenorm::gauss::GaussianProblem;
use num_complex::Complex64;
use std::f64::consts::PI;

fn main() {
    let cfg = QuadratureConfig::default();
    let geom = FlatGeometry::new(2, 0.0).unwrap();
    let phi = TestFunction::gaussian(2, 2, vec![0.0;4], 1.0).unwrap();
    let lg = LabelledGraph::zero_labels(families::banana(2));
    let v = direct_amplitude_oracle(&lg, &[Complex64::new(2.0,0.0), Complex64::new(2.0,0.0)], &phi, &geom, &cfg);
    println!("oracle: {v:?}");
    let q = tanh_sinh_01(6);
    let tmin = q.nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("tmin = {tmin:e}");
    for &t in &[tmin, 1e-30, 1e-10] {
        let mut prob = GaussianProblem::new(2, 4, &0.0f64);
        prob.add_rank_one(&[1.0, -1.0], 1.0 / (2.0 * t));
        for pt in 0..2 {
            let mut wv = vec![0.0; 2];
            wv[pt] = 1.0;
            prob.add_rank_one(&wv, 1.0);
        }
        prob.terms = vec![(1.0, vec![])];
        let config = prob.integrate();
        let pref = (4.0 * PI * t).powf(-2.0);
        println!("t={t:e} config={config:e} pref={pref:e} product={:e}", config*pref);
    }
}
