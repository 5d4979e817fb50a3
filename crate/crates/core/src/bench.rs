//! Synthetic experiments: swiss-roll nearest-neighbour ranking, Gaussian
//! families for the Expected Barycenter Effect, and spiral interpolation.

use std::time::Instant;

use ndarray::Array2;
use ndarray_linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{expectation_difference, sinkhorn_barycenter, tv_baseline_effect, DistributionFamily};
use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, knn_alpha_decay_graph, laplacian, largest_component, LaplacianKind, PointCloud};
use crate::heat::{build_euler, build_filter, HeatOperator};
use crate::transport::{
    dense_sinkhorn, dense_sinkhorn_kernel, euclidean_cost, exact_w2, geodesic_sinkhorn, geodesic_sinkhorn_batch, gibbs_kernel,
    mccann_interpolate, DensePlan, Distribution, GeodesicPlan, SinkhornParams, TransportResult, VertexWeights,
};

pub const S_RANGE: (f64, f64) = (1.5 * std::f64::consts::PI, 4.5 * std::f64::consts::PI);
pub const H_RANGE: (f64, f64) = (0.0, 20.0);

#[derive(Debug, Clone)]
pub struct SwissRollSample {
    pub ambient: PointCloud,
    /// `(arclength(s), h)` per point.
    pub intrinsic: Array2<f64>,
    /// `(s, h)` per distribution center.
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    /// Orthonormal `ambient_dim x ambient_dim` rotation applied to `(x, y, z, 0, ...)`.
    pub rotation: Array2<f64>,
}

/// `int_0^s sqrt(1 + u^2) du`.
pub fn arclength(s: f64) -> f64 {
    0.5 * (s * (1.0 + s * s).sqrt() + s.asinh())
}

fn roll(s: f64, h: f64) -> [f64; 3] {
    [s * s.cos(), h, s * s.sin()]
}

/// Seeded random orthonormal matrix (Q factor of a Gaussian matrix).
pub fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    let g = Array2::from_shape_simple_fn((dim, dim), || rng.sample::<f64, _>(StandardNormal));
    let (q, _) = g.qr().map_err(|e| Error::InvalidParameter(format!("QR failed: {e}")))?;
    Ok(q)
}

/// Gaussian blobs in the swiss roll's `(s, h)` parameter space, rolled into
/// 3-D and rotated into `ambient_dim` dimensions.
pub fn make_swiss_roll(
    n_distributions: usize,
    samples_per_dist: usize,
    noise_sigma: f64,
    ambient_dim: usize,
    seed: u64,
) -> Result<SwissRollSample> {
    if ambient_dim < 3 {
        return Err(Error::InvalidParameter(format!("ambient_dim must be at least 3, got {ambient_dim}")));
    }
    if n_distributions == 0 || samples_per_dist == 0 {
        return Err(Error::InvalidParameter("need at least one distribution and one sample".into()));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise_sigma must be nonnegative, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = Array2::from_shape_fn((n_distributions, 2), |(_, k)| {
        let (lo, hi) = if k == 0 { S_RANGE } else { H_RANGE };
        rng.gen_range(lo..hi)
    });
    let rotation = random_rotation(ambient_dim, &mut rng)?;
    let n = n_distributions * samples_per_dist;
    let mut ambient = Array2::zeros((n, ambient_dim));
    let mut intrinsic = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for c in 0..n_distributions {
        for k in 0..samples_per_dist {
            let s = centers[[c, 0]] + noise_sigma * rng.sample::<f64, _>(StandardNormal);
            let h = centers[[c, 1]] + noise_sigma * rng.sample::<f64, _>(StandardNormal);
            let row = c * samples_per_dist + k;
            intrinsic[[row, 0]] = arclength(s);
            intrinsic[[row, 1]] = h;
            let p = roll(s, h);
            for j in 0..ambient_dim {
                ambient[[row, j]] = (0..3).map(|i| p[i] * rotation[[j, i]]).sum();
            }
            labels.push(c);
        }
    }
    Ok(SwissRollSample { ambient: PointCloud::new(ambient)?, intrinsic, centers, labels, rotation })
}

/// Distances between distribution centers in the unrolled `(arclength, h)` plane.
pub fn ground_truth_distances(sample: &SwissRollSample) -> Array2<f64> {
    let m = sample.centers.nrows();
    let flat: Vec<(f64, f64)> = (0..m).map(|i| (arclength(sample.centers[[i, 0]]), sample.centers[[i, 1]])).collect();
    Array2::from_shape_fn((m, m), |(i, j)| {
        let (a, b) = (flat[i], flat[j]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub spearman: f64,
    pub pearson: f64,
    pub p_at_5: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn nearest(d: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.nrows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
    others.truncate(k);
    others
}

/// Spearman and Pearson over the strict upper triangles, and the mean
/// overlap of each row's 5 nearest neighbours (fewer when `m <= 5`).
pub fn rank_metrics(predicted: &Array2<f64>, truth: &Array2<f64>) -> Result<RankMetrics> {
    let m = truth.nrows();
    if predicted.dim() != truth.dim() || truth.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: predicted.nrows() });
    }
    if m < 3 {
        return Err(Error::DegenerateInput("need at least three distributions".into()));
    }
    let upper = |d: &Array2<f64>| -> Vec<f64> {
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| d[[i, j]]).collect()
    };
    let (p, t) = (upper(predicted), upper(truth));
    for v in [&p, &t] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInput("distance matrix has non-finite entries".into()));
        }
        if v.iter().all(|&x| x == v[0]) {
            return Err(Error::DegenerateInput("distance matrix is constant off the diagonal".into()));
        }
    }
    let k = 5.min(m - 1);
    let hits: usize = (0..m)
        .map(|i| {
            let truth_nn = nearest(truth, i, k);
            nearest(predicted, i, k).iter().filter(|j| truth_nn.contains(j)).count()
        })
        .sum();
    Ok(RankMetrics {
        spearman: pearson(&average_ranks(&p), &average_ranks(&t)),
        pearson: pearson(&p, &t),
        p_at_5: hits as f64 / (m * k) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GeodesicSinkhorn,
    DenseSinkhornW1,
    DenseSinkhornW2,
    EulerSinkhorn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GeodesicSinkhorn => "geodesic_sinkhorn",
            Method::DenseSinkhornW1 => "dense_sinkhorn_w1",
            Method::DenseSinkhornW2 => "dense_sinkhorn_w2",
            Method::EulerSinkhorn => "euler_sinkhorn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::GeodesicSinkhorn, Method::DenseSinkhornW1, Method::DenseSinkhornW2, Method::EulerSinkhorn]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Graph and heat-operator settings shared by the graph-based experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    pub knn: usize,
    pub alpha: f64,
    pub laplacian: LaplacianKind,
    /// Diffusion time.
    pub t: f64,
    /// Chebyshev degree.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub n_distributions: usize,
    pub samples_per_dist: usize,
    pub noise_sigma: f64,
    pub ambient_dim: usize,
    pub seed: u64,
    pub graph: GraphParams,
    /// Backward-Euler substeps for `euler_sinkhorn`.
    pub euler_steps: usize,
    /// Dense regularisation relative to the mean pairwise cost of the cloud.
    pub dense_epsilon: f64,
    pub sinkhorn: SinkhornParams,
    pub methods: Vec<Method>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            n_distributions: 15,
            samples_per_dist: 1000,
            noise_sigma: 1.0,
            ambient_dim: 10,
            seed: 0,
            graph: GraphParams { knn: 5, alpha: 40.0, laplacian: LaplacianKind::Normalized, t: 6400.0, order: 720 },
            euler_steps: 10,
            dense_epsilon: 0.01,
            sinkhorn: SinkhornParams { max_iter: 500, tol: 1e-3 },
            methods: vec![Method::GeodesicSinkhorn, Method::DenseSinkhornW1, Method::DenseSinkhornW2],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    /// Graph, Laplacian and operator construction.
    pub graph_seconds: f64,
    /// All pairwise distances.
    pub distance_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub metrics: RankMetrics,
    pub distances: Vec<Vec<f64>>,
    pub unconverged_pairs: usize,
    pub total_iterations: usize,
    /// Not deterministic; kept out of byte-compared artifacts.
    #[serde(skip)]
    pub wall_times: WallTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnReport {
    pub truth: Vec<Vec<f64>>,
    /// Points dropped because they fell outside the largest graph component.
    pub dropped_points: usize,
    pub methods: Vec<MethodReport>,
}

fn upper_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

fn symmetric(m: usize, pairs: &[(usize, usize)], values: &[f64]) -> Array2<f64> {
    let mut d = Array2::zeros((m, m));
    for (&(i, j), &v) in pairs.iter().zip(values) {
        d[[i, j]] = v;
        d[[j, i]] = v;
    }
    d
}

fn to_rows(d: &Array2<f64>) -> Vec<Vec<f64>> {
    d.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Geodesic Sinkhorn over many pairs, split into one batch per worker thread.
/// Batching does not change any result.
pub fn pairwise_geodesic<H: HeatOperator + ?Sized>(
    op: &H,
    distributions: &[Distribution],
    pairs: &[(usize, usize)],
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Vec<Result<TransportResult>> {
    let threads = rayon::current_num_threads().max(1);
    let chunk = pairs.len().div_ceil(threads).max(1);
    pairs
        .par_chunks(chunk)
        .flat_map_iter(|chunk| {
            let refs: Vec<(&Distribution, &Distribution)> =
                chunk.iter().map(|&(i, j)| (&distributions[i], &distributions[j])).collect();
            geodesic_sinkhorn_batch(op, &refs, a, params)
        })
        .collect()
}

/// Mean of `|x - y|^power` over all ordered point pairs, in closed form for
/// `power = 2` and by direct summation otherwise.
fn mean_pair_cost(cloud: &PointCloud, power: u32) -> f64 {
    let pts = cloud.points();
    let n = cloud.len() as f64;
    if power == 2 {
        let mean = pts.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let var: f64 = pts.rows().into_iter().map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>()).sum();
        return 2.0 * var / n;
    }
    let total: f64 = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let xi = cloud.point(i);
            (0..cloud.len())
                .map(|j| xi.iter().zip(cloud.point(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .sum::<f64>()
        })
        .sum();
    total / (n * n)
}

/// Indicator distributions of each label restricted to `keep` (ascending),
/// indexed by position in `keep`.
fn label_indicators(labels: &[usize], keep: &[usize], m: usize) -> Result<Vec<Distribution>> {
    (0..m)
        .map(|c| {
            let support: Vec<usize> = keep.iter().enumerate().filter(|(_, &v)| labels[v] == c).map(|(i, _)| i).collect();
            if support.is_empty() {
                return Err(Error::DegenerateInput(format!(
                    "distribution {c} lies outside the largest graph component"
                )));
            }
            Distribution::indicator(keep.len(), &support)
        })
        .collect()
}

fn tally(results: Vec<Result<TransportResult>>) -> Result<(Vec<f64>, usize, usize)> {
    let mut costs = Vec::with_capacity(results.len());
    let (mut unconverged, mut iterations) = (0, 0);
    for r in results {
        let r = r?;
        unconverged += usize::from(!r.converged);
        iterations += r.iterations;
        costs.push(r.cost);
    }
    Ok((costs, unconverged, iterations))
}

/// Pairwise distances between the swiss-roll distributions by each method,
/// scored against the unrolled ground truth.
pub fn knn_benchmark(config: &KnnConfig) -> Result<KnnReport> {
    let sample = make_swiss_roll(
        config.n_distributions,
        config.samples_per_dist,
        config.noise_sigma,
        config.ambient_dim,
        config.seed,
    )?;
    let m = config.n_distributions;
    let truth = ground_truth_distances(&sample);
    let pairs = upper_pairs(m);
    let needs_graph = config.methods.iter().any(|x| matches!(x, Method::GeodesicSinkhorn | Method::EulerSinkhorn));

    let mut dropped_points = 0;
    let mut graph = None;
    let mut graph_seconds = 0.0;
    if needs_graph {
        let start = Instant::now();
        let g = &config.graph;
        let adjacency = knn_alpha_decay_graph(&sample.ambient, g.knn, g.alpha)?;
        let keep = largest_component(&adjacency);
        dropped_points = sample.ambient.len() - keep.len();
        let lap = laplacian(&induced_subgraph(&adjacency, &keep)?, g.laplacian)?;
        let dists = label_indicators(&sample.labels, &keep, m)?;
        graph_seconds = start.elapsed().as_secs_f64();
        graph = Some((lap, dists));
    }

    let mut reports = Vec::new();
    for &method in &config.methods {
        let start = Instant::now();
        let mut op_seconds = 0.0;
        let (costs, unconverged, iterations) = match method {
            Method::GeodesicSinkhorn | Method::EulerSinkhorn => {
                let (lap, dists) = graph.as_ref().expect("graph built");
                let a = VertexWeights::uniform(lap.dim());
                let g = &config.graph;
                let op: Box<dyn HeatOperator> = if method == Method::GeodesicSinkhorn {
                    Box::new(build_filter(lap, g.t, g.order)?)
                } else {
                    Box::new(build_euler(lap, g.t, config.euler_steps)?)
                };
                op_seconds = start.elapsed().as_secs_f64();
                tally(pairwise_geodesic(op.as_ref(), dists, &pairs, &a, &config.sinkhorn))?
            }
            Method::DenseSinkhornW1 | Method::DenseSinkhornW2 => {
                let power = if method == Method::DenseSinkhornW1 { 1 } else { 2 };
                let lambda = config.dense_epsilon * mean_pair_cost(&sample.ambient, power);
                let per = config.samples_per_dist;
                let clouds: Vec<PointCloud> = (0..m)
                    .map(|c| PointCloud::new(sample.ambient.points().slice(ndarray::s![c * per..(c + 1) * per, ..]).to_owned()))
                    .collect::<Result<_>>()?;
                let uniform = Distribution::uniform(per)?;
                let results: Vec<Result<TransportResult>> = pairs
                    .par_iter()
                    .map(|&(i, j)| {
                        let cost = euclidean_cost(&clouds[i], &clouds[j], power)?;
                        dense_sinkhorn(&cost, &uniform, &uniform, lambda, &config.sinkhorn)
                    })
                    .collect();
                tally(results)?
            }
        };
        let distance_seconds = start.elapsed().as_secs_f64() - op_seconds;
        let d = symmetric(m, &pairs, &costs);
        reports.push(MethodReport {
            method,
            metrics: rank_metrics(&d, &truth)?,
            distances: to_rows(&d),
            unconverged_pairs: unconverged,
            total_iterations: iterations,
            wall_times: WallTimes {
                graph_seconds: if needs_graph && method != Method::DenseSinkhornW1 && method != Method::DenseSinkhornW2 {
                    graph_seconds + op_seconds
                } else {
                    0.0
                },
                distance_seconds,
            },
        });
    }
    Ok(KnnReport { truth: to_rows(&truth), dropped_points, methods: reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EbeConfig {
    /// Mean of the tenth treated member; `None` makes it a regular `N(5, 1)`.
    pub outlier: Option<f64>,
    pub n_control: usize,
    pub n_treated: usize,
    pub samples: usize,
    pub control_mean: f64,
    pub treated_mean: f64,
    pub seed: u64,
    pub graph: GraphParams,
    pub sinkhorn: SinkhornParams,
}

impl Default for EbeConfig {
    fn default() -> Self {
        Self {
            outlier: Some(-60.0),
            n_control: 10,
            n_treated: 10,
            samples: 500,
            control_mean: 0.0,
            treated_mean: 5.0,
            seed: 0,
            graph: GraphParams { knn: 5, alpha: 40.0, laplacian: LaplacianKind::Normalized, t: 50.0, order: 70 },
            sinkhorn: SinkhornParams { max_iter: 30, tol: 1e-6 },
        }
    }
}

/// One-dimensional Gaussian samples for both families on a shared cloud.
#[derive(Debug, Clone)]
pub struct EbeData {
    pub cloud: PointCloud,
    pub control: DistributionFamily,
    pub treated: DistributionFamily,
}

pub fn make_ebe_data(config: &EbeConfig) -> Result<EbeData> {
    if config.n_control == 0 || config.n_treated == 0 || config.samples == 0 {
        return Err(Error::InvalidParameter("families and samples must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut means = vec![config.control_mean; config.n_control];
    means.extend(std::iter::repeat(config.treated_mean).take(config.n_treated));
    if let Some(o) = config.outlier {
        *means.last_mut().expect("treated non-empty") = o;
    }
    let n = means.len() * config.samples;
    let values: Vec<f64> = means
        .iter()
        .flat_map(|&mu| (0..config.samples).map(move |_| mu))
        .map(|mu| mu + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let cloud = PointCloud::new(Array2::from_shape_vec((n, 1), values).expect("shape matches"))?;
    let member = |k: usize| Distribution::indicator(n, &(k * config.samples..(k + 1) * config.samples).collect::<Vec<_>>());
    let control = (0..config.n_control).map(member).collect::<Result<Vec<_>>>()?;
    let treated = (config.n_control..means.len()).map(member).collect::<Result<Vec<_>>>()?;
    Ok(EbeData {
        cloud,
        control: DistributionFamily::uniform(control, "control")?,
        treated: DistributionFamily::uniform(treated, "treated")?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbeReport {
    pub label: String,
    pub tau: Vec<f64>,
    pub baseline_tau: Vec<f64>,
    pub treated_converged: bool,
    pub control_converged: bool,
    pub treated_iterations: usize,
    pub control_iterations: usize,
    pub treated_marginal_error: f64,
    pub control_marginal_error: f64,
}

/// Geodesic Expected Barycenter Effect and its mean-based baseline on one
/// shared graph over all samples.
pub fn ebe_experiment(config: &EbeConfig) -> Result<EbeReport> {
    let data = make_ebe_data(config)?;
    let g = &config.graph;
    let adjacency = knn_alpha_decay_graph(&data.cloud, g.knn, g.alpha)?;
    let filter = build_filter(&laplacian(&adjacency, g.laplacian)?, g.t, g.order)?;
    let a = VertexWeights::uniform(data.cloud.len());
    let treated = sinkhorn_barycenter(&filter, &data.treated, &a, &config.sinkhorn)?;
    let control = sinkhorn_barycenter(&filter, &data.control, &a, &config.sinkhorn)?;
    let features = data.cloud.points();
    Ok(EbeReport {
        label: match config.outlier {
            Some(o) => format!("outlier {o}"),
            None => "no outlier".into(),
        },
        tau: expectation_difference(features, &treated.barycenter, &control.barycenter)?,
        baseline_tau: tv_baseline_effect(&data.treated, &data.control, features)?,
        treated_converged: treated.converged,
        control_converged: control.converged,
        treated_iterations: treated.iterations,
        control_iterations: control.iterations,
        treated_marginal_error: treated.marginal_error,
        control_marginal_error: control.marginal_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpConfig {
    pub timepoints: usize,
    pub samples_per_time: usize,
    /// Spiral parameter of the first timepoint's center.
    pub s_start: f64,
    /// Center shift per timepoint, in spiral parameter.
    pub s_step: f64,
    /// Standard deviation of the spiral parameter around each center.
    pub s_spread: f64,
    /// Isotropic 2-D noise added after embedding.
    pub noise: f64,
    /// Radius per unit parameter: points lie at `scale * s * (cos s, sin s)`.
    pub scale: f64,
    /// Unroll onto a straight line with the same arclength instead.
    pub flat: bool,
    pub seeds: Vec<u64>,
    pub graph: GraphParams,
    pub sinkhorn: SinkhornParams,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            timepoints: 5,
            samples_per_time: 200,
            s_start: 20.0,
            s_step: 2.0,
            s_spread: 3.0,
            noise: 0.05,
            scale: 0.3,
            flat: false,
            seeds: vec![0, 1, 2, 3, 4],
            graph: GraphParams { knn: 5, alpha: 40.0, laplacian: LaplacianKind::Normalized, t: 20.0, order: 60 },
            sinkhorn: SinkhornParams { max_iter: 5000, tol: 1e-8 },
        }
    }
}

/// One point cloud per timepoint, sliding along the spiral.
pub fn make_spiral_series(config: &InterpConfig, seed: u64) -> Result<Vec<PointCloud>> {
    if config.timepoints < 3 || config.samples_per_time == 0 {
        return Err(Error::InvalidParameter("need at least 3 timepoints and one sample each".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..config.timepoints)
        .map(|k| {
            let center = config.s_start + k as f64 * config.s_step;
            let mut pts = Array2::zeros((config.samples_per_time, 2));
            for mut row in pts.rows_mut() {
                let s = center + config.s_spread * rng.sample::<f64, _>(StandardNormal);
                let (x, y) = if config.flat {
                    (config.scale * arclength(s), 0.0)
                } else {
                    (config.scale * s * s.cos(), config.scale * s * s.sin())
                };
                row[0] = x + config.noise * rng.sample::<f64, _>(StandardNormal);
                row[1] = y + config.noise * rng.sample::<f64, _>(StandardNormal);
            }
            PointCloud::new(pts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpSeedReport {
    pub seed: u64,
    /// `exact_w2` of the geodesic McCann midpoint per interior timepoint.
    pub geodesic: Vec<f64>,
    pub euclidean: Vec<f64>,
    /// Euclidean regularisation matched to the heat kernel's spread.
    pub lambda: Vec<f64>,
    pub geodesic_mean: f64,
    pub euclidean_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpReport {
    pub seeds: Vec<InterpSeedReport>,
    pub geodesic_mean: f64,
    pub euclidean_mean: f64,
    /// Seeds where the geodesic score is at most the Euclidean one.
    pub geodesic_wins: usize,
}

/// `2 sum_ij H_ij |x_i - x_j|^2 / sum_ij H_ij`: the squared spread of the heat
/// kernel in ambient units, which is the `lambda` whose Gaussian kernel
/// `exp(-d^2 / lambda)` has the same second moment along a 1-D manifold.
fn matched_lambda<H: HeatOperator + ?Sized>(op: &H, cloud: &PointCloud) -> Result<f64> {
    let n = op.dim();
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let mut h = vec![0.0; n * n];
    op.apply_block(&eye, n, &mut h)?;
    let (mut moment, mut mass) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = h[i * n + j].max(0.0);
            let (xi, xj) = (cloud.point(i), cloud.point(j));
            moment += w * xi.iter().zip(xj.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            mass += w;
        }
    }
    Ok(2.0 * moment / mass)
}

fn rows_of(cloud: &PointCloud, idx: &[usize]) -> Result<PointCloud> {
    PointCloud::new(cloud.points().select(ndarray::Axis(0), idx))
}

/// Leave-one-out McCann interpolation at `s = 1/2` for every interior
/// timepoint, with geodesic and heat-matched Euclidean Sinkhorn plans.
pub fn interpolation_seed(config: &InterpConfig, seed: u64) -> Result<InterpSeedReport> {
    let series = make_spiral_series(config, seed)?;
    let n = config.samples_per_time;
    let g = &config.graph;
    let (mut geodesic, mut euclidean, mut lambdas) = (Vec::new(), Vec::new(), Vec::new());
    for k in 1..series.len() - 1 {
        let union = PointCloud::concat(&[&series[k - 1], &series[k + 1]])?;
        let adjacency = knn_alpha_decay_graph(&union, g.knn, g.alpha)?;
        let keep = largest_component(&adjacency);
        let cloud = rows_of(&union, &keep)?;
        let filter = build_filter(&laplacian(&induced_subgraph(&adjacency, &keep)?, g.laplacian)?, g.t, g.order)?;
        let split = keep.partition_point(|&v| v < n);
        if split == 0 || split == keep.len() {
            return Err(Error::DegenerateInput(format!("timepoint {k}: an endpoint lies outside the largest component")));
        }
        let (src, dst): (Vec<usize>, Vec<usize>) = ((0..split).collect(), (split..keep.len()).collect());
        let mu = Distribution::indicator(keep.len(), &src)?;
        let nu = Distribution::indicator(keep.len(), &dst)?;
        let a = VertexWeights::uniform(keep.len());
        let result = geodesic_sinkhorn(&filter, &mu, &nu, &a, &config.sinkhorn)?;
        let plan = GeodesicPlan { op: &filter, result: &result, a: &a };
        let mid = mccann_interpolate(&cloud, &cloud, &plan, 0.5, n, seed)?;
        geodesic.push(exact_w2(&mid, &series[k])?);

        let lambda = matched_lambda(&filter, &cloud)?;
        let (x, y) = (rows_of(&cloud, &src)?, rows_of(&cloud, &dst)?);
        let kernel = gibbs_kernel(&euclidean_cost(&x, &y, 2)?, lambda)?;
        let result = dense_sinkhorn_kernel(
            &kernel,
            &Distribution::uniform(x.len())?,
            &Distribution::uniform(y.len())?,
            lambda,
            &config.sinkhorn,
        )?;
        let plan = DensePlan { kernel: &kernel, result: &result };
        let mid = mccann_interpolate(&x, &y, &plan, 0.5, n, seed)?;
        euclidean.push(exact_w2(&mid, &series[k])?);
        lambdas.push(lambda);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(InterpSeedReport {
        seed,
        geodesic_mean: mean(&geodesic),
        euclidean_mean: mean(&euclidean),
        geodesic,
        euclidean,
        lambda: lambdas,
    })
}

pub fn interpolation_benchmark(config: &InterpConfig) -> Result<InterpReport> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let seeds = config.seeds.par_iter().map(|&s| interpolation_seed(config, s)).collect::<Result<Vec<_>>>()?;
    let m = seeds.len() as f64;
    Ok(InterpReport {
        geodesic_mean: seeds.iter().map(|s| s.geodesic_mean).sum::<f64>() / m,
        euclidean_mean: seeds.iter().map(|s| s.euclidean_mean).sum::<f64>() / m,
        geodesic_wins: seeds.iter().filter(|s| s.geodesic_mean <= s.euclidean_mean).count(),
        seeds,
    })
}
