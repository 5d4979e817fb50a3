//! `geosink`: graph construction, geodesic Sinkhorn distances, barycenters and
//! the synthetic benchmarks from the command line.
//!
//! Every subcommand takes an optional JSON config; flags override it. Exit
//! codes: 0 ok, 2 I/O, 3 invalid input, 4 numerical failure.

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geosink::bench::{GraphParams, Method};
use geosink::{LaplacianKind, SinkhornParams};

use crate::error::{CliError, CliResult};
use crate::input::{load_config, DistSpec, OutDir};

#[derive(Parser)]
#[command(name = "geosink", version, about = "Entropic optimal transport on data-manifold graphs")]
struct Cli {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GEOSINK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the k-NN alpha-decay graph of a point CSV.
    Graph(GraphArgs),
    /// Geodesic Sinkhorn distance between two distributions on a point cloud.
    Distance(DistanceArgs),
    /// Fixed-support barycenter of several distributions.
    Barycenter(BarycenterArgs),
    /// Expected Barycenter Effect on Gaussian families with an outlier.
    Ebe(EbeArgs),
    /// Swiss-roll nearest-neighbour ranking benchmark.
    KnnBench(KnnArgs),
    /// Chebyshev vs backward-Euler heat-kernel error by order.
    HeatStudy(HeatStudyArgs),
    /// McCann interpolation on a spiral time series.
    Interp(InterpArgs),
}

#[derive(Args, Default)]
struct GraphFlags {
    /// Nearest neighbours per point.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    laplacian: Option<LaplacianKind>,
}

#[derive(Args, Default)]
struct HeatFlags {
    #[command(flatten)]
    graph: GraphFlags,
    /// Diffusion time.
    #[arg(long)]
    t: Option<f64>,
    /// Chebyshev degree.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

impl HeatFlags {
    fn apply(&self, g: &mut GraphParams, s: &mut SinkhornParams) {
        set(&mut g.knn, self.graph.k);
        set(&mut g.alpha, self.graph.alpha);
        set(&mut g.laplacian, self.graph.laplacian);
        set(&mut g.t, self.t);
        set(&mut g.order, self.order);
        set(&mut s.max_iter, self.max_iter);
        set(&mut s.tol, self.tol);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Point CSV, one point per row.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphFlags,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    points: Option<PathBuf>,
    /// One integer label per point, for `--mu-label` / `--nu-label`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// `vertex_index,weight` CSV.
    #[arg(long, conflicts_with = "mu_label")]
    mu_weights: Option<PathBuf>,
    #[arg(long)]
    mu_label: Option<usize>,
    #[arg(long, conflicts_with = "nu_label")]
    nu_weights: Option<PathBuf>,
    #[arg(long)]
    nu_label: Option<usize>,
    #[command(flatten)]
    heat: HeatFlags,
}

fn dist_flag(weights: &Option<PathBuf>, label: Option<usize>) -> Option<DistSpec> {
    weights.clone().map(DistSpec::Weights).or(label.map(DistSpec::Label))
}

#[derive(Args)]
struct BarycenterArgs {
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Member given by label; repeatable. Replaces the config's members.
    #[arg(long, value_delimiter = ',')]
    member_label: Vec<usize>,
    /// Member given by weight file; repeatable. Replaces the config's members.
    #[arg(long)]
    member_weights: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[command(flatten)]
    heat: HeatFlags,
}

#[derive(Args)]
struct EbeArgs {
    /// Mean of the last treated member, or `none`.
    #[arg(long)]
    outlier: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    heat: HeatFlags,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    distributions: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Comma-separated: geodesic_sinkhorn, dense_sinkhorn_w1, dense_sinkhorn_w2, euler_sinkhorn.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[command(flatten)]
    heat: HeatFlags,
}

#[derive(Args)]
struct HeatStudyArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated Chebyshev degrees.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[command(flatten)]
    graph: GraphFlags,
}

#[derive(Args)]
struct InterpArgs {
    /// Straight-line control instead of the spiral.
    #[arg(long)]
    flat: bool,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long)]
    seeds: Option<usize>,
    #[command(flatten)]
    heat: HeatFlags,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let config = cli.config.as_deref();
    let out = || OutDir::create(&cli.out_dir);
    match cli.command {
        Command::Graph(a) => {
            let mut c: commands::GraphConfig = load_config(config)?;
            set(&mut c.input, a.input.map(Some));
            set(&mut c.knn, a.graph.k);
            set(&mut c.alpha, a.graph.alpha);
            set(&mut c.laplacian, a.graph.laplacian);
            commands::graph(&c, &out()?)
        }
        Command::Distance(a) => {
            let mut c: commands::DistanceConfig = load_config(config)?;
            set(&mut c.points, a.points.map(Some));
            set(&mut c.labels, a.labels.map(Some));
            set(&mut c.mu, dist_flag(&a.mu_weights, a.mu_label).map(Some));
            set(&mut c.nu, dist_flag(&a.nu_weights, a.nu_label).map(Some));
            a.heat.apply(&mut c.graph, &mut c.sinkhorn);
            commands::distance(&c, &out()?)
        }
        Command::Barycenter(a) => {
            let mut c: commands::BarycenterConfig = load_config(config)?;
            set(&mut c.points, a.points.map(Some));
            set(&mut c.labels, a.labels.map(Some));
            if !a.member_label.is_empty() || !a.member_weights.is_empty() {
                c.members = a.member_label.into_iter().map(DistSpec::Label).collect();
                c.members.extend(a.member_weights.into_iter().map(DistSpec::Weights));
            }
            set(&mut c.alphas, a.alphas.map(Some));
            a.heat.apply(&mut c.graph, &mut c.sinkhorn);
            commands::barycenter(&c, &out()?)
        }
        Command::Ebe(a) => {
            let mut c: geosink::bench::EbeConfig = load_config(config)?;
            if let Some(o) = a.outlier {
                c.outlier = match o.as_str() {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| CliError::Validation(format!("bad outlier {v:?}")))?),
                };
            }
            set(&mut c.samples, a.samples);
            set(&mut c.seed, cli.seed);
            a.heat.apply(&mut c.graph, &mut c.sinkhorn);
            commands::ebe(&c, &out()?)
        }
        Command::KnnBench(a) => {
            let mut c: geosink::bench::KnnConfig = load_config(config)?;
            set(&mut c.n_distributions, a.distributions);
            set(&mut c.samples_per_dist, a.samples);
            set(&mut c.noise_sigma, a.noise);
            set(&mut c.methods, a.methods);
            set(&mut c.seed, cli.seed);
            a.heat.apply(&mut c.graph, &mut c.sinkhorn);
            commands::knn_bench(&c, &out()?)
        }
        Command::HeatStudy(a) => {
            let mut c: commands::HeatStudyConfig = load_config(config)?;
            set(&mut c.input, a.input.map(Some));
            set(&mut c.samples, a.samples);
            set(&mut c.t, a.t);
            set(&mut c.orders, a.orders);
            set(&mut c.knn, a.graph.k);
            set(&mut c.alpha, a.graph.alpha);
            set(&mut c.laplacian, a.graph.laplacian);
            set(&mut c.seed, cli.seed);
            commands::heat_study(&c, &out()?)
        }
        Command::Interp(a) => {
            let mut c: geosink::bench::InterpConfig = load_config(config)?;
            if a.flat {
                c.flat = true;
            }
            let count = a.seeds.unwrap_or(c.seeds.len());
            if let Some(s) = cli.seed {
                c.seeds = (s..s + count as u64).collect();
            } else if a.seeds.is_some() {
                let first = c.seeds.first().copied().unwrap_or(0);
                c.seeds = (first..first + count as u64).collect();
            }
            a.heat.apply(&mut c.graph, &mut c.sinkhorn);
            commands::interp(&c, &out()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
