//! One function per subcommand: effective config in, artifacts out.

use std::path::PathBuf;
use std::time::Instant;

use geosink::bench::{
    ebe_experiment, interpolation_benchmark, knn_benchmark, make_swiss_roll, EbeConfig, GraphParams, InterpConfig,
    KnnConfig,
};
use geosink::heat::{convergence_study, write_convergence_csv};
use geosink::{
    build_filter, geodesic_sinkhorn, knn_alpha_decay_graph, laplacian, sinkhorn_barycenter, DistributionFamily,
    GraphLaplacian, LaplacianKind, PointCloud, SinkhornParams, VertexWeights,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::input::{matrix_csv, read_labels, read_points, required, Artifact, DistSpec, OutDir};

fn default_graph() -> GraphParams {
    GraphParams { knn: 5, alpha: 40.0, laplacian: LaplacianKind::Normalized, t: 10.0, order: 60 }
}

fn build_laplacian(cloud: &PointCloud, g: &GraphParams) -> CliResult<GraphLaplacian> {
    let adjacency = knn_alpha_decay_graph(cloud, g.knn, g.alpha)?;
    Ok(laplacian(&adjacency, g.laplacian)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub input: Option<PathBuf>,
    pub knn: usize,
    pub alpha: f64,
    pub laplacian: LaplacianKind,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { input: None, knn: 5, alpha: 40.0, laplacian: LaplacianKind::Normalized }
    }
}

pub fn graph(config: &GraphConfig, out: &OutDir) -> CliResult<()> {
    let cloud = read_points(required(&config.input, "input")?)?;
    let adjacency = knn_alpha_decay_graph(&cloud, config.knn, config.alpha)?;
    let lap = laplacian(&adjacency, config.laplacian)?;
    let mut edges = Vec::new();
    adjacency.write_coordinate_list(&mut edges)?;
    out.write("graph.txt", &edges)?;
    let summary = json!({ "n": adjacency.dim(), "nnz": adjacency.nnz(), "lambda_max_bound": lap.lambda_max_bound });
    out.json("graph.json", &Artifact { config, result: &summary })?;
    println!("n={} nnz={} lambda_hat={}", adjacency.dim(), adjacency.nnz(), lap.lambda_max_bound);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub points: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub mu: Option<DistSpec>,
    pub nu: Option<DistSpec>,
    pub graph: GraphParams,
    pub sinkhorn: SinkhornParams,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self { points: None, labels: None, mu: None, nu: None, graph: default_graph(), sinkhorn: SinkhornParams::default() }
    }
}

fn labels_for(path: &Option<PathBuf>) -> CliResult<Option<Vec<usize>>> {
    path.as_deref().map(read_labels).transpose()
}

pub fn distance(config: &DistanceConfig, out: &OutDir) -> CliResult<()> {
    let cloud = read_points(required(&config.points, "points")?)?;
    let labels = labels_for(&config.labels)?;
    let spec = |d: &Option<DistSpec>, name: &str| {
        d.as_ref().ok_or_else(|| CliError::Validation(format!("{name} is required")))?.resolve(cloud.len(), labels.as_deref())
    };
    let (mu, nu) = (spec(&config.mu, "mu")?, spec(&config.nu, "nu")?);
    let g = &config.graph;
    let filter = build_filter(&build_laplacian(&cloud, g)?, g.t, g.order)?;
    let r = geodesic_sinkhorn(&filter, &mu, &nu, &VertexWeights::uniform(cloud.len()), &config.sinkhorn)?;
    let summary = json!({
        "n": cloud.len(),
        "cost": r.cost,
        "kl_distance": r.kl_form_distance(),
        "iterations": r.iterations,
        "converged": r.converged,
        "marginal_error": r.marginal_error,
    });
    out.json("distance.json", &Artifact { config, result: &summary })?;
    println!("cost={} iterations={} converged={}", r.cost, r.iterations, r.converged);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarycenterConfig {
    pub points: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub members: Vec<DistSpec>,
    /// Uniform when absent.
    pub alphas: Option<Vec<f64>>,
    pub graph: GraphParams,
    pub sinkhorn: SinkhornParams,
}

impl Default for BarycenterConfig {
    fn default() -> Self {
        Self {
            points: None,
            labels: None,
            members: Vec::new(),
            alphas: None,
            graph: default_graph(),
            sinkhorn: SinkhornParams::default(),
        }
    }
}

pub fn barycenter(config: &BarycenterConfig, out: &OutDir) -> CliResult<()> {
    let cloud = read_points(required(&config.points, "points")?)?;
    let labels = labels_for(&config.labels)?;
    let members = config.members.iter().map(|m| m.resolve(cloud.len(), labels.as_deref())).collect::<CliResult<Vec<_>>>()?;
    let family = match &config.alphas {
        Some(a) => DistributionFamily::new(members, a.clone(), "members")?,
        None => DistributionFamily::uniform(members, "members")?,
    };
    let g = &config.graph;
    let filter = build_filter(&build_laplacian(&cloud, g)?, g.t, g.order)?;
    let r = sinkhorn_barycenter(&filter, &family, &VertexWeights::uniform(cloud.len()), &config.sinkhorn)?;
    let mut csv = String::from("vertex_index,weight\n");
    for (i, w) in r.barycenter.weights().iter().enumerate() {
        csv.push_str(&format!("{i},{w:?}\n"));
    }
    out.write("barycenter.csv", csv.as_bytes())?;
    let summary = json!({
        "n": cloud.len(),
        "iterations": r.iterations,
        "converged": r.converged,
        "marginal_error": r.marginal_error,
    });
    out.json("barycenter.json", &Artifact { config, result: &summary })?;
    println!("iterations={} converged={}", r.iterations, r.converged);
    Ok(())
}

pub fn ebe(config: &EbeConfig, out: &OutDir) -> CliResult<()> {
    let r = ebe_experiment(config)?;
    out.json("ebe.json", &Artifact { config, result: &r })?;
    println!("{}: tau={:?} baseline_tau={:?}", r.label, r.tau, r.baseline_tau);
    Ok(())
}

pub fn knn_bench(config: &KnnConfig, out: &OutDir) -> CliResult<()> {
    let r = knn_benchmark(config)?;
    let labels: Vec<String> = (0..config.n_distributions).map(|c| format!("d{c}")).collect();
    out.write("truth.csv", &matrix_csv(&labels, &r.truth))?;
    for m in &r.methods {
        out.write(&format!("distances_{}.csv", m.method.name()), &matrix_csv(&labels, &m.distances))?;
    }
    out.json("knn.json", &Artifact { config, result: &r })?;
    for m in &r.methods {
        println!(
            "{}: spearman={:.4} pearson={:.4} p_at_5={:.4} graph_s={:.3} distance_s={:.3}",
            m.method.name(),
            m.metrics.spearman,
            m.metrics.pearson,
            m.metrics.p_at_5,
            m.wall_times.graph_seconds,
            m.wall_times.distance_seconds
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatStudyConfig {
    /// Point CSV; a uniform 3-D swiss roll of `samples` points when absent.
    pub input: Option<PathBuf>,
    pub samples: usize,
    pub seed: u64,
    pub knn: usize,
    pub alpha: f64,
    pub laplacian: LaplacianKind,
    pub t: f64,
    pub orders: Vec<usize>,
}

impl Default for HeatStudyConfig {
    fn default() -> Self {
        Self {
            input: None,
            samples: 500,
            seed: 0,
            knn: 5,
            alpha: 40.0,
            laplacian: LaplacianKind::Normalized,
            t: 1.0,
            orders: (1..=30).collect(),
        }
    }
}

/// Uniform swiss roll: one noiseless point per random center.
pub fn uniform_swiss_roll(samples: usize, seed: u64) -> CliResult<PointCloud> {
    Ok(make_swiss_roll(samples, 1, 0.0, 3, seed)?.ambient)
}

pub fn heat_study(config: &HeatStudyConfig, out: &OutDir) -> CliResult<()> {
    let cloud = match &config.input {
        Some(p) => read_points(p)?,
        None => uniform_swiss_roll(config.samples, config.seed)?,
    };
    let adjacency = knn_alpha_decay_graph(&cloud, config.knn, config.alpha)?;
    let rows = convergence_study(&laplacian(&adjacency, config.laplacian)?, config.t, &config.orders)?;
    let mut csv = Vec::new();
    write_convergence_csv(&rows, &mut csv)?;
    out.write("convergence.csv", &csv)?;
    out.json("heat_study.json", &Artifact { config, result: json!({ "n": cloud.len(), "rows": rows }) })?;
    if let Some(last) = rows.last() {
        println!("n={} K={} chebyshev={:e} euler={:e}", cloud.len(), last.order, last.cheb_fro_error, last.euler_fro_error);
    }
    Ok(())
}

pub fn interp(config: &InterpConfig, out: &OutDir) -> CliResult<()> {
    let start = Instant::now();
    let r = interpolation_benchmark(config)?;
    out.json("interp.json", &Artifact { config, result: &r })?;
    println!(
        "geodesic={:.4} euclidean={:.4} geodesic_wins={}/{} seconds={:.1}",
        r.geodesic_mean,
        r.euclidean_mean,
        r.geodesic_wins,
        r.seeds.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
