//! Affinity graphs over point clouds and their Laplacians.

use std::collections::BTreeSet;
use std::io::Read;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Default neighbourhood size of the alpha-decay kernel.
pub const DEFAULT_KNN: usize = 5;
/// Default decay exponent of the alpha-decay kernel.
pub const DEFAULT_ALPHA: f64 = 40.0;

/// An `n x d` cloud of observations, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(Error::DegenerateInput(format!("point cloud must be non-empty, got {n}x{d}")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("point cloud contains non-finite values".into()));
        }
        Ok(Self { points })
    }

    /// Builds a cloud from rows, rejecting ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        let points = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(points)
    }

    /// Reads comma-delimited points. A first line whose first token is not
    /// numeric is treated as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let first = record.get(0).unwrap_or("");
            if line == 0 && first.parse::<f64>().is_err() {
                continue;
            }
            let row = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", line + 1))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Stacks several clouds of equal dimension into one.
    pub fn concat(clouds: &[&PointCloud]) -> Result<Self> {
        let d = clouds.first().map(|c| c.dim()).ok_or_else(|| Error::DegenerateInput("no clouds".into()))?;
        let mut rows = Vec::new();
        for c in clouds {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.dim() });
            }
            rows.extend(c.points.rows().into_iter().map(|r| r.to_vec()));
        }
        Self::from_rows(&rows)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest neighbours of every point (self excluded),
/// ordered by distance with ties broken by lower index, plus the
/// squared distance to the k-th neighbour.
pub fn knn_indices(cloud: &PointCloud, k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!("k must be < n (k = {k}, n = {n})")));
    }
    let pts = cloud.points.as_standard_layout();
    let d = cloud.dim();
    let flat = pts.as_slice().expect("standard layout");
    let result = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &flat[i * d..(i + 1) * d];
            // sorted ascending by (dist, index)
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dj = squared_distance(xi, &flat[j * d..(j + 1) * d]);
                if best.len() == k && dj >= best[k - 1].0 {
                    continue;
                }
                let pos = best.partition_point(|&(bd, bj)| bd < dj || (bd == dj && bj < j));
                best.insert(pos, (dj, j));
                best.truncate(k);
            }
            let kth = best[k - 1].0;
            (best.into_iter().map(|(_, j)| j).collect(), kth)
        })
        .collect();
    Ok(result)
}

/// Symmetric alpha-decay affinity over the union of k-NN relations.
///
/// `A_ij = 0.5 exp(-(d_ij / eps_i)^alpha) + 0.5 exp(-(d_ij / eps_j)^alpha)` where
/// `eps_i` is the distance from point `i` to its k-th nearest neighbour.
pub fn knn_alpha_decay_graph(cloud: &PointCloud, k: usize, alpha: f64) -> Result<SparseSymMatrix> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let knn = knn_indices(cloud, k)?;
    let bandwidth: Vec<f64> = knn.iter().map(|(_, d2)| d2.sqrt()).collect();
    if let Some(index) = bandwidth.iter().position(|&e| e == 0.0) {
        return Err(Error::DuplicatePoints { index });
    }

    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, (nbrs, _)) in knn.iter().enumerate() {
        for &j in nbrs {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let pts = cloud.points().as_standard_layout();
    let flat = pts.as_slice().expect("standard layout");
    let d = cloud.dim();
    let mut upper = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let dist = squared_distance(&flat[i * d..(i + 1) * d], &flat[j * d..(j + 1) * d]).sqrt();
        let w = 0.5 * (-(dist / bandwidth[i]).powf(alpha)).exp()
            + 0.5 * (-(dist / bandwidth[j]).powf(alpha)).exp();
        if w > 0.0 {
            upper.push((i, j, w));
        }
    }
    SparseSymMatrix::from_upper_triplets(cloud.len(), &upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    Combinatorial,
    Normalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(Self::Combinatorial),
            "normalized" => Ok(Self::Normalized),
            other => Err(Error::InvalidParameter(format!("unknown laplacian kind {other:?}"))),
        }
    }
}

/// A graph Laplacian together with an upper bound on its spectrum.
#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    pub matrix: SparseSymMatrix,
    pub kind: LaplacianKind,
    pub lambda_max_bound: f64,
}

impl GraphLaplacian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Builds `L = D - A` or `L = I - D^{-1/2} A D^{-1/2}`.
///
/// Isolated vertices get an identity row in the normalized form.
pub fn laplacian(adjacency: &SparseSymMatrix, kind: LaplacianKind) -> Result<GraphLaplacian> {
    let n = adjacency.dim();
    for i in 0..n {
        for (j, v) in adjacency.row(i) {
            if v < 0.0 {
                return Err(Error::NegativeWeight { row: i, col: j, value: v });
            }
        }
    }
    let degrees = adjacency.row_sums();
    let mut triplets = Vec::with_capacity(adjacency.nnz() + n);
    match kind {
        LaplacianKind::Combinatorial => {
            for i in 0..n {
                triplets.push((i, i, degrees[i]));
                for (j, v) in adjacency.row(i) {
                    triplets.push((i, j, -v));
                }
            }
        }
        LaplacianKind::Normalized => {
            let inv_sqrt: Vec<f64> =
                degrees.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 }).collect();
            for i in 0..n {
                triplets.push((i, i, 1.0));
                for (j, v) in adjacency.row(i) {
                    triplets.push((i, j, -v * (inv_sqrt[i] * inv_sqrt[j])));
                }
            }
        }
    }
    let matrix = SparseSymMatrix::from_triplets(n, &triplets)?;
    let lambda_max_bound = match kind {
        LaplacianKind::Combinatorial => estimate_lambda_max(&matrix),
        LaplacianKind::Normalized => 2.0,
    };
    Ok(GraphLaplacian { matrix, kind, lambda_max_bound })
}

const POWER_MAX_ITER: usize = 200;
const POWER_REL_TOL: f64 = 1e-6;
const POWER_INFLATION: f64 = 1.01;

/// Upper bound on the largest eigenvalue of a PSD matrix.
///
/// Power iteration on the Rayleigh quotient, inflated by 1%; falls back to
/// the Gershgorin bound if it does not settle within 200 iterations.
pub fn estimate_lambda_max(matrix: &SparseSymMatrix) -> f64 {
    let n = matrix.dim();
    let gershgorin = matrix.gershgorin_bound();
    if n == 0 || gershgorin == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        matrix.matvec_into(&x, &mut y);
        let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        if (rayleigh - prev).abs() <= POWER_REL_TOL * rayleigh.abs() {
            return (POWER_INFLATION * rayleigh).min(gershgorin);
        }
        prev = rayleigh;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    gershgorin
}

/// Component label of every vertex; labels are numbered in order of each
/// component's lowest vertex.
pub fn connected_components(adjacency: &SparseSymMatrix) -> Vec<usize> {
    let n = adjacency.dim();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for (j, v) in adjacency.row(i) {
                if v != 0.0 && label[j] == usize::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Vertices of the largest connected component (lowest label on ties), ascending.
pub fn largest_component(adjacency: &SparseSymMatrix) -> Vec<usize> {
    let label = connected_components(adjacency);
    let count = label.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; count];
    label.iter().for_each(|&c| sizes[c] += 1);
    let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
    (0..adjacency.dim()).filter(|&i| label[i] == best).collect()
}

/// The submatrix on `keep` (ascending vertex indices), renumbered `0..keep.len()`.
pub fn induced_subgraph(adjacency: &SparseSymMatrix, keep: &[usize]) -> Result<SparseSymMatrix> {
    let n = adjacency.dim();
    let mut index = vec![usize::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        if old >= n {
            return Err(Error::IndexOutOfRange { index: old, len: n });
        }
        index[old] = new;
    }
    let mut triplets = Vec::new();
    for (new, &old) in keep.iter().enumerate() {
        for (j, v) in adjacency.row(old) {
            if index[j] != usize::MAX {
                triplets.push((new, index[j], v));
            }
        }
    }
    SparseSymMatrix::from_triplets(keep.len(), &triplets)
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}
