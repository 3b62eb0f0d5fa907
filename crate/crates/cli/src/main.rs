//! Command-line front end: parse graph/geometry/test-function JSON, dispatch
//! computations, emit JSON reports.
//!
//! Exit codes: 0 ok, 2 input error, 3 precondition violation, 4 resource cap,
//! 5 numerical failure.

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use germrenorm::blowup::SectorChart;
use germrenorm::continuation::{
    assemble_full_amplitude, default_jet_order, labelled_amplitude_germ,
};
use germrenorm::error::CoreError;
use germrenorm::geometry::{testfn_from_json, GeometryJson, TestFunction, TestFunctionTermJson};
use germrenorm::germ::{germ_from_json, germ_to_json};
use germrenorm::graph::{divergent_subgraphs, kruskal_tree, GraphJson, Permutations};
use germrenorm::quadrature::QuadratureConfig;
use germrenorm::renorm::{
    check_compatibility, check_disjoint_factorization, check_extension, check_locality,
    check_translation_covariance, renormalize, CheckReport,
};

#[derive(Parser)]
#[command(
    name = "germrenorm",
    about = "Regularized Feynman amplitudes on flat space as meromorphic germs, renormalized by polar-part subtraction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// sigma-jet order of computed germs (default: divergence depth + 2)
    #[arg(long)]
    order: Option<u32>,
    /// Chebyshev degree per sector axis
    #[arg(long, default_value_t = 16)]
    quad_nodes: usize,
    /// Monte-Carlo fallback sample count
    #[arg(long, default_value_t = 200_000)]
    mc_samples: usize,
    /// RNG seed (mandatory for reproducible Monte-Carlo fallbacks)
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// worker threads for sector parallelism (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// requested relative tolerance, reported with results
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonOpts {
    fn quad_config(&self) -> QuadratureConfig {
        QuadratureConfig {
            cheb_degree: self.quad_nodes,
            mc_samples: self.mc_samples,
            seed: self.seed,
            tolerance: self.tolerance,
            jobs: self.jobs,
            ..QuadratureConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Divergent subgraphs and their pole hyperplanes
    Poles {
        graph: PathBuf,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Kruskal sector tree and fundamental cycles of a strict metric graph
    Tree {
        graph: PathBuf,
        /// comma-separated edge lengths (overrides the file's lengths)
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sector charts (tree, cycles, exponents) for every permutation
    Sectors {
        graph: PathBuf,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Meromorphic germ of the regularized amplitude at the base point
    Germ {
        graph: PathBuf,
        testfn: PathBuf,
        geometry: PathBuf,
        /// continue only the heat-kernel head (labelled amplitude)
        #[arg(long)]
        head_only: bool,
        /// heat expansion order for massive backends
        #[arg(long, default_value_t = 2)]
        heat_order: u32,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Renormalized value: evaluation of the projected holomorphic part
    Renormalize {
        graph: PathBuf,
        testfn: PathBuf,
        geometry: PathBuf,
        #[arg(long, default_value_t = 2)]
        heat_order: u32,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the functional-equation corpus and report pass/fail per check
    Verify {
        corpus: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// CSV slice of a germ along a line in sigma-space
    Slice {
        germ: PathBuf,
        /// direction vector, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Vec<f64>,
        /// parameter range `a,b`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.5, 0.5])]
        range: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        match core {
            CoreError::Parse(_) | CoreError::Graph(_) | CoreError::DimensionMismatch(_, _) => 2,
            CoreError::TiedLengths
            | CoreError::Disconnected
            | CoreError::Precondition(_)
            | CoreError::Geometry(_)
            | CoreError::UnknownEdge(_, _)
            | CoreError::InvalidPermutation(_)
            | CoreError::ZeroDenominator
            | CoreError::OverlappingBlocks
            | CoreError::InsufficientOrder { .. } => 3,
            CoreError::EdgeCapExceeded(_, _) | CoreError::DerivativeCap(_, _) => 4,
            CoreError::QuadratureFailure(_) => 5,
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        2
    } else {
        5
    }
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!(std::io::Error::new(e.kind(), format!("{path:?}: {e}"))))
}

fn load_testfn(path: &Path, dim: usize) -> anyhow::Result<TestFunction> {
    let text = read_file(path)?;
    let terms: Vec<TestFunctionTermJson> =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
    let first = terms
        .first()
        .ok_or_else(|| anyhow::anyhow!(CoreError::Parse("empty test function".into())))?;
    if first.center.len() % dim != 0 {
        return Err(anyhow::anyhow!(CoreError::Parse(format!(
            "test function center length {} is not a multiple of dim {dim}",
            first.center.len()
        ))));
    }
    let points = first.center.len() / dim;
    Ok(testfn_from_json(&terms, dim, points)?)
}

fn emit(common: &CommonOpts, value: &serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match &common.output {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn setup_jobs(common: &CommonOpts) {
    if common.jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build_global();
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Poles { graph, dim, common } => {
            let gj = GraphJson::parse(&read_file(&graph)?)?;
            let g = gj.to_graph()?;
            let report = divergent_subgraphs(&g, dim)?;
            let hyperplanes: Vec<_> = report
                .divergent_subgraphs
                .iter()
                .map(|sub| {
                    json!({
                        "edges": sub.iter().map(|e| e + 1).collect::<Vec<_>>(),
                        "rhs": sub.len(),
                    })
                })
                .collect();
            let refined = germrenorm::graph::order_bound_sector_refined(&g, dim).ok();
            emit(
                &common,
                &json!({
                    "hyperplanes": hyperplanes,
                    "order_bound": report.order_bound,
                    "order_bound_sector_refined": refined,
                }),
            )
        }
        Command::Tree {
            graph,
            lengths,
            common,
        } => {
            let mut gj = GraphJson::parse(&read_file(&graph)?)?;
            if let Some(l) = lengths {
                gj.lengths = Some(l);
            }
            let metric = gj.to_metric()?;
            let result = kruskal_tree(&metric)?;
            let cycles: Vec<_> = (0..metric.graph.edge_count())
                .filter(|e| !result.tree_edges.contains(e))
                .map(|e| {
                    let cyc =
                        germrenorm::graph::fundamental_cycle(&metric.graph, &result.tree_edges, e)
                            .unwrap();
                    json!({
                        "edge": e + 1,
                        "cycle": cyc.iter().map(|(ce, sign)| json!({"edge": ce + 1, "sign": sign}))
                            .collect::<Vec<_>>(),
                    })
                })
                .collect();
            emit(
                &common,
                &json!({
                    "tree": result.tree_edges.iter().map(|e| e + 1).collect::<Vec<_>>(),
                    "per_step_trace_ok": result.per_step_trace_ok,
                    "cycles": cycles,
                }),
            )
        }
        Command::Sectors { graph, dim, common } => {
            let gj = GraphJson::parse(&read_file(&graph)?)?;
            let lg = gj.to_labelled()?;
            let ne = lg.graph.edge_count();
            if ne > germrenorm::continuation::AMPLITUDE_EDGE_CAP {
                return Err(anyhow::anyhow!(CoreError::EdgeCapExceeded(
                    ne,
                    germrenorm::continuation::AMPLITUDE_EDGE_CAP
                )));
            }
            let charts: Vec<_> = Permutations::new(ne)
                .map(|perm| SectorChart::new(&lg, &perm, dim).map(|c| c.to_json()))
                .collect::<Result<_, _>>()?;
            emit(&common, &json!({ "sectors": charts }))
        }
        Command::Germ {
            graph,
            testfn,
            geometry,
            head_only,
            heat_order,
            common,
        } => {
            setup_jobs(&common);
            let gj = GraphJson::parse(&read_file(&graph)?)?;
            let geom = GeometryJson::parse(&read_file(&geometry)?)?.to_flat()?;
            let phi = load_testfn(&testfn, geom.dim)?;
            let cfg = common.quad_config();
            let lg = gj.to_labelled()?;
            let order = match common.order {
                Some(o) => o,
                None => default_jet_order(&lg.graph, geom.dim)?,
            };
            let result = if head_only {
                labelled_amplitude_germ(&lg, &phi, &geom, &cfg, order)?
            } else {
                assemble_full_amplitude(&lg.graph, &phi, &geom, heat_order, order, &cfg)?
            };
            let sectors: usize = result.sectors.len();
            emit(
                &common,
                &json!({
                    "germ": serde_json::to_value(germ_to_json(&result.germ))?,
                    "realized_poles": result.realized_poles,
                    "quad_error": result.quad_error,
                    "sectors": sectors,
                }),
            )
        }
        Command::Renormalize {
            graph,
            testfn,
            geometry,
            heat_order,
            common,
        } => {
            setup_jobs(&common);
            let gj = GraphJson::parse(&read_file(&graph)?)?;
            let geom = GeometryJson::parse(&read_file(&geometry)?)?.to_flat()?;
            let phi = load_testfn(&testfn, geom.dim)?;
            let cfg = common.quad_config();
            let g = gj.to_graph()?;
            let order = match common.order {
                Some(o) => o,
                None => default_jet_order(&g, geom.dim)?,
            };
            let result = renormalize(&g, &phi, &geom, heat_order, order, &cfg)?;
            emit(
                &common,
                &json!({
                    "value": [result.value.re, result.value.im],
                    "realized_poles": result.realized_poles,
                    "quad_error": result.quad_error,
                    "holo_jet": serde_json::to_value(germ_to_json(
                        &germrenorm::germ::MeromorphicGerm::from_holo(result.holo_jet)
                    ))?["holo"],
                }),
            )
        }
        Command::Verify { corpus, common } => {
            setup_jobs(&common);
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&corpus)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(anyhow::anyhow!(CoreError::Parse(format!(
                    "no .json cases under {corpus:?}"
                ))));
            }
            let cfg = common.quad_config();
            let mut reports = vec![];
            let mut all_pass = true;
            for path in entries {
                let report = run_case(&path, &cfg)?;
                all_pass &= report.pass;
                println!(
                    "[{}] {} discrepancy {:.3e} (tolerance {:.1e})",
                    if report.pass { "PASS" } else { "FAIL" },
                    report.name,
                    report.discrepancy,
                    report.tolerance
                );
                reports.push(report);
            }
            emit(
                &common,
                &json!({
                    "checks": reports,
                    "all_pass": all_pass,
                }),
            )?;
            if !all_pass {
                return Err(anyhow::anyhow!(CoreError::QuadratureFailure(
                    "verification corpus has failing checks".into()
                )));
            }
            Ok(())
        }
        Command::Slice {
            germ,
            direction,
            range,
            steps,
            common,
        } => {
            let text = read_file(&germ)?;
            let gj: germrenorm::germ::GermJson =
                serde_json::from_str(&text).map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
            let g = germ_from_json(&gj)?;
            if direction.len() != g.dim {
                return Err(anyhow::anyhow!(CoreError::DimensionMismatch(
                    direction.len(),
                    g.dim
                )));
            }
            if range.len() != 2 || steps < 2 {
                return Err(anyhow::anyhow!(CoreError::Parse(
                    "--range needs two values and --steps at least 2".into()
                )));
            }
            let mut csv = String::from("tau,re,im\n");
            for k in 0..steps {
                let tau = range[0] + (range[1] - range[0]) * k as f64 / (steps - 1) as f64;
                let sigma: Vec<Complex64> = direction
                    .iter()
                    .map(|&d| Complex64::new(d * tau, 0.0))
                    .collect();
                let v = g.eval(&sigma);
                csv.push_str(&format!("{tau},{},{}\n", v.re, v.im));
            }
            match &common.output {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

/// One corpus case: a JSON object naming the check and its inputs.
fn run_case(path: &Path, cfg: &QuadratureConfig) -> anyhow::Result<CheckReport> {
    let text = read_file(path)?;
    let case: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
    let name = case["name"].as_str().unwrap_or("unnamed").to_string();
    let kind = case["check"]
        .as_str()
        .ok_or_else(|| anyhow::anyhow!(CoreError::Parse(format!("{path:?}: missing check"))))?;
    let geom = GeometryJson::parse(&case["geometry"].to_string())?.to_flat()?;
    let parse_graph = |v: &serde_json::Value| -> anyhow::Result<germrenorm::FeynmanGraph> {
        Ok(GraphJson::parse(&v.to_string())?.to_graph()?)
    };
    let parse_phi = |v: &serde_json::Value| -> anyhow::Result<TestFunction> {
        let terms: Vec<TestFunctionTermJson> =
            serde_json::from_value(v.clone()).map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
        let points = terms[0].center.len() / geom.dim;
        Ok(testfn_from_json(&terms, geom.dim, points)?)
    };
    let graph = parse_graph(&case["graph"])?;
    let phi = parse_phi(&case["testfn"])?;
    let order = case["order"].as_u64().map(|x| x as u32).unwrap_or(2);
    let tolerance = case["tolerance"].as_f64().unwrap_or(1e-4);
    let mut report = match kind {
        "extension" => check_extension(&graph, &phi, &geom, order, cfg, tolerance)?,
        "locality" => {
            let split: Vec<usize> = serde_json::from_value(case["split"].clone())
                .map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
            check_locality(&graph, &split, &phi, &geom, order, cfg, tolerance)?
        }
        "translation" => {
            let shift: Vec<f64> = serde_json::from_value(case["shift"].clone())
                .map_err(|e| anyhow::anyhow!(CoreError::from(e)))?;
            check_translation_covariance(&graph, &phi, &shift, &geom, order, cfg, tolerance)?
        }
        "compatibility" => check_compatibility(&graph, &phi, &geom, order, cfg, tolerance)?,
        "factorization" => {
            let graph2 = parse_graph(&case["graph2"])?;
            let phi2 = parse_phi(&case["testfn2"])?;
            check_disjoint_factorization(
                &graph, &phi, &graph2, &phi2, &geom, order, cfg, tolerance,
            )?
        }
        other => {
            return Err(anyhow::anyhow!(CoreError::Parse(format!(
                "unknown check kind {other:?}"
            ))))
        }
    };
    report.name = format!("{name}/{}", report.name);
    Ok(report)
}
