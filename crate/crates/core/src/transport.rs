//! Entropic transport: geodesic Sinkhorn on a heat operator, a dense
//! Gibbs-kernel baseline, plan access and McCann interpolation.

use ndarray::Array2;
use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{squared_distance, PointCloud};
use crate::heat::HeatOperator;

/// Floor applied to kernel outputs before dividing.
pub const DIVISION_FLOOR: f64 = 1e-300;
/// Negative kernel outputs below `-NEGATIVE_SLACK * |input|_inf` are errors.
pub const NEGATIVE_SLACK: f64 = 1e-12;
const STAGNATION_WINDOW: usize = 50;
const STAGNATION_LEVEL: f64 = 0.5;
const STAGNATION_PROGRESS: f64 = 0.01;
const MASS_TOL: f64 = 1e-6;
/// Largest assignment problem `exact_w2` will solve.
pub const ASSIGNMENT_LIMIT: usize = 2000;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Accepts weights already summing to one (within 1e-9); they are
    /// renormalised so the sum is exact to rounding.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("distribution sums to {sum}, expected 1")));
        }
        Self::normalize(weights)
    }

    /// Scales arbitrary nonnegative weights to sum to one.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if sum <= 0.0 {
            return Err(Error::DegenerateInput("distribution has no mass".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / sum).collect() })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::normalize(vec![1.0; n])
    }

    /// Uniform mass on the given vertices.
    pub fn indicator(n: usize, support: &[usize]) -> Result<Self> {
        let mut w = vec![0.0; n];
        for &i in support {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            w[i] = 1.0;
        }
        Self::normalize(w)
    }

    pub fn impulse(n: usize, i: usize) -> Result<Self> {
        Self::indicator(n, &[i])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::DegenerateInput("empty distribution".into()));
    }
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid distribution weight {w}")));
        }
    }
    Ok(weights.iter().sum())
}

/// Positive per-vertex weights (the `a` of the discretised measure).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexWeights {
    a: Vec<f64>,
}

impl VertexWeights {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = a.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("vertex weights must be positive, got {bad}")));
        }
        Ok(Self { a })
    }

    /// `a = 1/n` on every vertex.
    pub fn uniform(n: usize) -> Self {
        Self { a: vec![1.0 / n as f64; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { a: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornParams {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-6 }
    }
}

impl SinkhornParams {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Converged (or budget-exhausted) Sinkhorn scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// The algorithm's return value (`4t sum a(mu ln v + nu ln w)` for the
    /// geodesic variant, `lambda (sum mu ln v + sum nu ln w)` for the dense one).
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|v . K w - mu|_1` after the last sweep.
    pub marginal_error: f64,
    /// `KL(pi | K)` with the `-1` convention, `sum pi (ln(pi/K) - 1)`.
    pub kl: f64,
    kl_prefactor: f64,
}

impl TransportResult {
    /// `prefactor * (1 + KL)^{1/2}` with the prefactor `4 t^{1/2}` (geodesic)
    /// or `lambda^{1/2}` (dense); `1 + KL` is clamped at zero.
    pub fn kl_form_distance(&self) -> f64 {
        self.kl_prefactor * (1.0 + self.kl).max(0.0).sqrt()
    }
}

/// Raw Sinkhorn state for one marginal pair.
struct Scalings {
    v: Vec<f64>,
    w: Vec<f64>,
    iterations: usize,
    converged: bool,
    marginal_error: f64,
    /// `v . K w` with the raw (unfloored) kernel output.
    row_marginal: Vec<f64>,
}

pub(crate) type BlockOp<'a> = dyn Fn(&[f64], usize, &mut [f64]) -> Result<()> + 'a;

/// Column state inside the batched loop.
struct Column {
    v: Vec<f64>,
    w: Vec<f64>,
    q: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
}

/// Runs the alternating updates for several marginal pairs at once.
///
/// `forward` maps `m x c` blocks of `w` to `n x c` blocks (`K w`), `backward`
/// maps `v` blocks back (`K^T v`). Columns leave the batch as soon as they
/// converge or fail, so each result is identical to a run on its own.
fn sinkhorn_columns(
    rows: usize,
    cols: usize,
    mus: &[&[f64]],
    nus: &[&[f64]],
    forward: &BlockOp<'_>,
    backward: &BlockOp<'_>,
    params: &SinkhornParams,
) -> Vec<Result<Scalings>> {
    let count = mus.len();
    let mut results: Vec<Option<Result<Scalings>>> = (0..count).map(|_| None).collect();
    let mut state: Vec<Column> = (0..count)
        .map(|_| Column { v: vec![0.0; rows], w: vec![1.0; cols], q: vec![0.0; rows], history: Vec::new(), iterations: 0 })
        .collect();

    let mut active: Vec<usize> = (0..count).collect();
    // q = K 1
    let ws: Vec<&[f64]> = active.iter().map(|&c| state[c].w.as_slice()).collect();
    match checked_apply(forward, &ws, rows) {
        Ok(qs) => active = keep_ok(&active, qs, &mut results, |c, q| state[c].q = q),
        Err(e) => return (0..count).map(|_| Err(clone_error(&e))).collect(),
    }

    for _ in 0..params.max_iter {
        if active.is_empty() {
            break;
        }
        for &c in &active {
            let col = &mut state[c];
            for i in 0..rows {
                col.v[i] = mus[c][i] / col.q[i].max(DIVISION_FLOOR);
            }
        }
        let vs: Vec<&[f64]> = active.iter().map(|&c| state[c].v.as_slice()).collect();
        match checked_apply(backward, &vs, cols) {
            Ok(rs) => {
                active = keep_ok(&active, rs, &mut results, |c, r| {
                    let col = &mut state[c];
                    for j in 0..cols {
                        col.w[j] = nus[c][j] / r[j].max(DIVISION_FLOOR);
                    }
                })
            }
            Err(e) => {
                fail_all(&active, &e, &mut results);
                active.clear();
                break;
            }
        }
        let ws: Vec<&[f64]> = active.iter().map(|&c| state[c].w.as_slice()).collect();
        match checked_apply(forward, &ws, rows) {
            Ok(qs) => active = keep_ok(&active, qs, &mut results, |c, q| state[c].q = q),
            Err(e) => {
                fail_all(&active, &e, &mut results);
                active.clear();
                break;
            }
        }
        let mut still = Vec::with_capacity(active.len());
        for &c in &active {
            let col = &mut state[c];
            col.iterations += 1;
            let err: f64 = (0..rows).map(|i| (col.v[i] * col.q[i] - mus[c][i]).abs()).sum();
            col.history.push(err);
            if !err.is_finite() {
                let row = (0..rows).find(|&i| !(col.v[i] * col.q[i]).is_finite()).unwrap_or(0);
                results[c] = Some(Err(Error::NumericalUnderflow { row }));
            } else if err <= params.tol {
                results[c] = Some(Ok(finish(col, rows, true)));
            } else if stagnated(&col.history) {
                results[c] = Some(Err(Error::Disconnected { marginal_error: err }));
            } else {
                still.push(c);
            }
        }
        active = still;
    }
    for c in active {
        results[c] = Some(Ok(finish(&state[c], rows, false)));
    }
    results.into_iter().map(|r| r.expect("every column resolved")).collect()
}

/// Stores per-column outputs, retiring columns whose output was rejected.
fn keep_ok(
    active: &[usize],
    outputs: Vec<Result<Vec<f64>>>,
    results: &mut [Option<Result<Scalings>>],
    mut store: impl FnMut(usize, Vec<f64>),
) -> Vec<usize> {
    let mut kept = Vec::with_capacity(active.len());
    for (&c, out) in active.iter().zip(outputs) {
        match out {
            Ok(y) => {
                store(c, y);
                kept.push(c);
            }
            Err(e) => results[c] = Some(Err(e)),
        }
    }
    kept
}

fn fail_all(active: &[usize], e: &Error, results: &mut [Option<Result<Scalings>>]) {
    for &c in active {
        results[c] = Some(Err(clone_error(e)));
    }
}

fn finish(col: &Column, rows: usize, converged: bool) -> Scalings {
    Scalings {
        v: col.v.clone(),
        w: col.w.clone(),
        iterations: col.iterations,
        converged,
        marginal_error: *col.history.last().unwrap_or(&f64::INFINITY),
        row_marginal: (0..rows).map(|i| col.v[i] * col.q[i]).collect(),
    }
}

fn stagnated(history: &[f64]) -> bool {
    let len = history.len();
    if len <= STAGNATION_WINDOW {
        return false;
    }
    let window = &history[len - STAGNATION_WINDOW..];
    let start = history[len - STAGNATION_WINDOW - 1];
    window.iter().all(|&e| e > STAGNATION_LEVEL) && start - history[len - 1] < STAGNATION_PROGRESS * start
}

pub(crate) fn clone_error(e: &Error) -> Error {
    match e {
        Error::KernelNotPositive { value } => Error::KernelNotPositive { value: *value },
        Error::SolveFailure { iterations } => Error::SolveFailure { iterations: *iterations },
        Error::LengthMismatch { expected, found } => Error::LengthMismatch { expected: *expected, found: *found },
        other => Error::InvalidParameter(other.to_string()),
    }
}

/// Applies a block operator to columns and returns each output column with
/// negatives clamped to zero; a column with a significant negative entry is
/// rejected on its own.
pub(crate) fn checked_apply(op: &BlockOp<'_>, inputs: &[&[f64]], out_len: usize) -> Result<Vec<Result<Vec<f64>>>> {
    let c = inputs.len();
    if c == 0 {
        return Ok(Vec::new());
    }
    let in_len = inputs[0].len();
    let mut block = vec![0.0; in_len * c];
    for (k, x) in inputs.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            block[i * c + k] = xi;
        }
    }
    let mut out = vec![0.0; out_len * c];
    op(&block, c, &mut out)?;
    Ok(inputs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut col = Vec::with_capacity(out_len);
            for i in 0..out_len {
                let y = out[i * c + k];
                if y < -NEGATIVE_SLACK * scale {
                    return Err(Error::KernelNotPositive { value: y });
                }
                col.push(y.max(0.0));
            }
            Ok(col)
        })
        .collect())
}

fn xlogy_sum(weights: &[f64], scaling: &[f64]) -> f64 {
    weights
        .iter()
        .zip(scaling)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &s)| m * s.max(DIVISION_FLOOR).ln())
        .sum()
}

fn check_same_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Sinkhorn with the heat operator as kernel.
pub fn geodesic_sinkhorn<H: HeatOperator + ?Sized>(
    op: &H,
    mu: &Distribution,
    nu: &Distribution,
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Result<TransportResult> {
    geodesic_sinkhorn_batch(op, &[(mu, nu)], a, params).pop().expect("one pair")
}

/// Geodesic Sinkhorn for many pairs sharing one operator, filtered together
/// in blocks. Each result equals the single-pair run.
pub fn geodesic_sinkhorn_batch<H: HeatOperator + ?Sized>(
    op: &H,
    pairs: &[(&Distribution, &Distribution)],
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Vec<Result<TransportResult>> {
    let n = op.dim();
    let setup = params.validate().and_then(|_| {
        check_same_len(n, a.len())?;
        for (mu, nu) in pairs {
            check_same_len(n, mu.len())?;
            check_same_len(n, nu.len())?;
        }
        Ok(())
    });
    if let Err(e) = setup {
        return pairs.iter().map(|_| Err(clone_error(&e))).collect();
    }
    let av = a.values();
    let weighted = |block: &[f64], c: usize, out: &mut [f64]| -> Result<()> {
        let scaled: Vec<f64> = block.iter().enumerate().map(|(idx, x)| av[idx / c] * x).collect();
        op.apply_block(&scaled, c, out)
    };
    let mus: Vec<&[f64]> = pairs.iter().map(|(m, _)| m.weights()).collect();
    let nus: Vec<&[f64]> = pairs.iter().map(|(_, v)| v.weights()).collect();
    let t = op.time();
    sinkhorn_columns(n, n, &mus, &nus, &weighted, &weighted, params)
        .into_iter()
        .zip(pairs)
        .map(|(res, (mu, nu))| {
            let s = res?;
            let mu = mu.weights();
            let nu = nu.weights();
            let cost = 4.0
                * t
                * (0..n)
                    .filter(|&i| mu[i] > 0.0 || nu[i] > 0.0)
                    .map(|i| {
                        let lv = if mu[i] > 0.0 { mu[i] * s.v[i].max(DIVISION_FLOOR).ln() } else { 0.0 };
                        let lw = if nu[i] > 0.0 { nu[i] * s.w[i].max(DIVISION_FLOOR).ln() } else { 0.0 };
                        av[i] * (lv + lw)
                    })
                    .sum::<f64>();
            let aw: Vec<f64> = s.w.iter().zip(av).map(|(w, a)| w * a).collect();
            let mass: f64 = s.row_marginal.iter().sum();
            let kl = xlogy_sum(mu, &s.v) + xlogy_sum(nu, &aw) - mass;
            Ok(TransportResult {
                v: s.v,
                w: s.w,
                cost,
                iterations: s.iterations,
                converged: s.converged,
                marginal_error: s.marginal_error,
                kl,
                kl_prefactor: 4.0 * t.sqrt(),
            })
        })
        .collect()
}

/// Gibbs kernel `exp(-C / lambda)`, rejecting rows or columns that underflow.
pub fn gibbs_kernel(cost_matrix: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if cost_matrix.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("cost matrix has non-finite entries".into()));
    }
    let kernel = cost_matrix.mapv(|c| (-c / lambda).exp());
    if let Some(row) = kernel.rows().into_iter().position(|r| r.iter().all(|&k| k == 0.0)) {
        return Err(Error::NumericalUnderflow { row });
    }
    if let Some(col) = kernel.columns().into_iter().position(|r| r.iter().all(|&k| k == 0.0)) {
        return Err(Error::NumericalUnderflow { row: col });
    }
    Ok(kernel)
}

/// Classical Sinkhorn on the dense kernel `exp(-C / lambda)`.
pub fn dense_sinkhorn(
    cost_matrix: &Array2<f64>,
    mu: &Distribution,
    nu: &Distribution,
    lambda: f64,
    params: &SinkhornParams,
) -> Result<TransportResult> {
    let kernel = gibbs_kernel(cost_matrix, lambda)?;
    dense_sinkhorn_kernel(&kernel, mu, nu, lambda, params)
}

/// Classical Sinkhorn on a precomputed positive kernel; `lambda` scales the cost.
pub fn dense_sinkhorn_kernel(
    kernel: &Array2<f64>,
    mu: &Distribution,
    nu: &Distribution,
    lambda: f64,
    params: &SinkhornParams,
) -> Result<TransportResult> {
    params.validate()?;
    let (n, m) = kernel.dim();
    check_same_len(n, mu.len())?;
    check_same_len(m, nu.len())?;
    let k = kernel.as_standard_layout();
    let ks = k.as_slice().expect("standard layout");
    let forward = |w: &[f64], _c: usize, out: &mut [f64]| -> Result<()> {
        let w = ndarray::ArrayView1::from(w);
        for (o, row) in out.iter_mut().zip(k.rows()) {
            *o = row.dot(&w);
        }
        Ok(())
    };
    let backward = |v: &[f64], _c: usize, out: &mut [f64]| -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            for (o, &kij) in out.iter_mut().zip(&ks[i * m..(i + 1) * m]) {
                *o += kij * vi;
            }
        }
        Ok(())
    };
    let s = sinkhorn_columns(n, m, &[mu.weights()], &[nu.weights()], &forward, &backward, params)
        .pop()
        .expect("one pair")?;
    let (lv, lw) = (xlogy_sum(mu.weights(), &s.v), xlogy_sum(nu.weights(), &s.w));
    let mass: f64 = s.row_marginal.iter().sum();
    Ok(TransportResult {
        cost: lambda * (lv + lw),
        kl: lv + lw - mass,
        v: s.v,
        w: s.w,
        iterations: s.iterations,
        converged: s.converged,
        marginal_error: s.marginal_error,
        kl_prefactor: lambda.sqrt(),
    })
}

/// Pairwise costs `|x_i - y_j|^p` for `p` = 1 or 2.
pub fn euclidean_cost(x: &PointCloud, y: &PointCloud, power: u32) -> Result<Array2<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let xs = x.points().as_standard_layout();
    let ys = y.points().as_standard_layout();
    let (xf, yf) = (xs.as_slice().expect("standard layout"), ys.as_slice().expect("standard layout"));
    let d = x.dim();
    Ok(Array2::from_shape_fn((x.len(), y.len()), |(i, j)| {
        let d2 = squared_distance(&xf[i * d..(i + 1) * d], &yf[j * d..(j + 1) * d]);
        if power == 2 {
            d2
        } else {
            d2.sqrt()
        }
    }))
}

/// Row-wise access to a transport plan that is never stored densely.
pub trait PlanRows {
    fn num_rows(&self) -> usize;

    /// Total mass of each row.
    fn row_masses(&self) -> Result<Vec<f64>>;

    fn row(&self, i: usize) -> Result<Vec<f64>>;
}

/// Row `i` of `diag(v) H diag(a . w)`, from one filter application to `e_i`,
/// clamped at zero.
pub fn plan_row<H: HeatOperator + ?Sized>(result: &TransportResult, op: &H, a: &VertexWeights, i: usize) -> Result<Vec<f64>> {
    let n = op.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    check_same_len(n, a.len())?;
    check_same_len(n, result.v.len())?;
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    let h = op.apply(&e)?;
    let vi = result.v[i];
    Ok((0..n).map(|j| (vi * h[j] * a.values()[j] * result.w[j]).max(0.0)).collect())
}

/// Plan of a geodesic Sinkhorn result over the graph vertices.
pub struct GeodesicPlan<'a, H: HeatOperator + ?Sized> {
    pub op: &'a H,
    pub result: &'a TransportResult,
    pub a: &'a VertexWeights,
}

impl<H: HeatOperator + ?Sized> PlanRows for GeodesicPlan<'_, H> {
    fn num_rows(&self) -> usize {
        self.op.dim()
    }

    fn row_masses(&self) -> Result<Vec<f64>> {
        let aw: Vec<f64> = self.result.w.iter().zip(self.a.values()).map(|(w, a)| w * a).collect();
        let q = self.op.apply(&aw)?;
        Ok(q.iter().zip(&self.result.v).map(|(q, v)| (q * v).max(0.0)).collect())
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        plan_row(self.result, self.op, self.a, i)
    }
}

/// Plan `diag(v) K diag(w)` of a dense Sinkhorn result.
pub struct DensePlan<'a> {
    pub kernel: &'a Array2<f64>,
    pub result: &'a TransportResult,
}

impl PlanRows for DensePlan<'_> {
    fn num_rows(&self) -> usize {
        self.kernel.nrows()
    }

    fn row_masses(&self) -> Result<Vec<f64>> {
        Ok((0..self.num_rows()).map(|i| self.row_unchecked(i).iter().sum()).collect())
    }

    fn row(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.num_rows() {
            return Err(Error::IndexOutOfRange { index: i, len: self.num_rows() });
        }
        Ok(self.row_unchecked(i))
    }
}

impl DensePlan<'_> {
    fn row_unchecked(&self, i: usize) -> Vec<f64> {
        let vi = self.result.v[i];
        self.kernel.row(i).iter().zip(&self.result.w).map(|(k, w)| vi * k * w).collect()
    }
}

/// Samples the McCann interpolant `sum_ij pi_ij delta_{(1-s) x_i + s y_j}`.
///
/// Rows are drawn by mass, then a column from each drawn row; every distinct
/// row is materialised once.
pub fn mccann_interpolate<P: PlanRows + ?Sized>(
    source: &PointCloud,
    target: &PointCloud,
    plan: &P,
    s: f64,
    num_samples: usize,
    seed: u64,
) -> Result<PointCloud> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("s must lie in [0, 1], got {s}")));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    if num_samples == 0 {
        return Err(Error::InvalidParameter("num_samples must be positive".into()));
    }
    check_same_len(source.len(), plan.num_rows())?;
    let masses = plan.row_masses()?;
    let total: f64 = masses.iter().sum();
    if !(total >= 1.0 - MASS_TOL) {
        return Err(Error::DegeneratePlan { mass: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_dist = WeightedIndex::new(&masses).map_err(|_| Error::DegeneratePlan { mass: total })?;
    let rows: Vec<usize> = (0..num_samples).map(|_| row_dist.sample(&mut rng)).collect();

    let mut order: Vec<usize> = (0..num_samples).collect();
    order.sort_by_key(|&k| (rows[k], k));
    let mut cols = vec![0usize; num_samples];
    let mut k = 0;
    while k < order.len() {
        let i = rows[order[k]];
        let row = plan.row(i)?;
        check_same_len(target.len(), row.len())?;
        let col_dist = WeightedIndex::new(&row).map_err(|_| Error::DegeneratePlan { mass: row.iter().sum() })?;
        while k < order.len() && rows[order[k]] == i {
            cols[order[k]] = col_dist.sample(&mut rng);
            k += 1;
        }
    }

    let d = source.dim();
    let mut flat = Vec::with_capacity(num_samples * d);
    for (&i, &j) in rows.iter().zip(&cols) {
        let (x, y) = (source.point(i), target.point(j));
        flat.extend(x.iter().zip(y.iter()).map(|(a, b)| (1.0 - s) * a + s * b));
    }
    PointCloud::new(Array2::from_shape_vec((num_samples, d), flat).expect("shape matches"))
}

/// Exact 2-Wasserstein distance between equal-size uniform clouds:
/// `sqrt(min_sigma mean |x_i - y_sigma(i)|^2)`.
pub fn exact_w2(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch { left: x.len(), right: y.len() });
    }
    let m = x.len();
    if m > ASSIGNMENT_LIMIT {
        return Err(Error::TooLarge { n: m, limit: ASSIGNMENT_LIMIT });
    }
    let cost = euclidean_cost(x, y, 2)?;
    let assignment = crate::assignment::min_cost_assignment(&cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    Ok((total / m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LaplacianKind;
    use crate::heat::{build_filter, exact_heat_oracle, DenseHeat};
    use crate::sparse::SparseSymMatrix;
    use crate::testutil::*;
    use proptest::prelude::*;

    fn tight() -> SinkhornParams {
        SinkhornParams { max_iter: 5000, tol: 1e-10 }
    }

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::normalize(vec![0.0, 0.0]).is_err());
        let d = Distribution::indicator(4, &[1, 3]).unwrap();
        assert_eq!(d.weights(), &[0.0, 0.5, 0.0, 0.5]);
        assert!(matches!(Distribution::indicator(2, &[2]), Err(Error::IndexOutOfRange { .. })));
        assert!(VertexWeights::new(vec![1.0, 0.0]).is_err());
        let s: f64 = Distribution::normalize(vec![0.1; 7]).unwrap().weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_marginals_give_symmetric_scalings() {
        let l = random_laplacian(40, 3, LaplacianKind::Combinatorial);
        let filter = build_filter(&l, 1.0, 30).unwrap();
        let u = Distribution::uniform(40).unwrap();
        let a = VertexWeights::uniform(40);
        let r = geodesic_sinkhorn(&filter, &u, &u, &a, &SinkhornParams::default()).unwrap();
        assert!(r.converged && r.marginal_error <= 1e-6);
        let ratio = r.v[0] / r.w[0];
        assert!(r.v.iter().zip(&r.w).all(|(v, w)| (v / w - ratio).abs() < 1e-5 * ratio));
    }

    #[test]
    fn two_node_matches_dense_oracle() {
        let l = two_node();
        let filter = build_filter(&l, 1.0, 30).unwrap();
        let (mu, nu) = (Distribution::impulse(2, 0).unwrap(), Distribution::impulse(2, 1).unwrap());
        let a = VertexWeights::ones(2);
        let geo = geodesic_sinkhorn(&filter, &mu, &nu, &a, &tight()).unwrap();
        let h = exact_heat_oracle(&l, 1.0).unwrap();
        let cost = h.mapv(|x| -4.0 * x.ln());
        let dense = dense_sinkhorn(&cost, &mu, &nu, 4.0, &tight()).unwrap();
        assert!((geo.cost - dense.cost).abs() < 1e-8, "{} vs {}", geo.cost, dense.cost);
        // a single admissible plan: all mass 0 -> 1, so cost = -4t ln H_01
        assert!((geo.cost + 4.0 * h[[0, 1]].ln()).abs() < 1e-8);

        let kernel = gibbs_kernel(&cost, 4.0).unwrap();
        let dense_plan = DensePlan { kernel: &kernel, result: &dense };
        for i in 0..2 {
            let g = plan_row(&geo, &filter, &a, i).unwrap();
            let d = dense_plan.row(i).unwrap();
            assert!(g.iter().zip(&d).all(|(x, y)| (x - y).abs() < 1e-8), "{g:?} vs {d:?}");
        }
    }

    #[test]
    fn zero_cost_gives_product_plan() {
        let mu = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let nu = Distribution::new(vec![0.6, 0.4]).unwrap();
        let r = dense_sinkhorn(&Array2::zeros((3, 2)), &mu, &nu, 0.7, &tight()).unwrap();
        let kernel = Array2::ones((3, 2));
        let plan = DensePlan { kernel: &kernel, result: &r };
        for i in 0..3 {
            let row = plan.row(i).unwrap();
            for j in 0..2 {
                assert!((row[j] - mu.weights()[i] * nu.weights()[j]).abs() < 1e-12);
            }
        }
        let ent = |d: &Distribution| d.weights().iter().map(|x| x * x.ln()).sum::<f64>();
        assert!((r.kl - (ent(&mu) + ent(&nu) - 1.0)).abs() < 1e-10);
        assert_eq!(r.kl_form_distance(), 0.7f64.sqrt() * (1.0 + r.kl).max(0.0).sqrt());
    }

    #[test]
    fn two_by_two_matches_brute_force_minimiser() {
        // feasible plans [[p, 1/2 - p], [1/2 - p, p]]; objective <pi, C> + lambda sum pi ln pi
        let objective = |p: f64| {
            let q = 0.5 - p;
            2.0 * q + 2.0 * (p * p.ln() + q * q.ln())
        };
        let (mut lo, mut hi) = (1e-12, 0.5 - 1e-12);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if objective(m1) < objective(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let p = 0.5 * (lo + hi);

        let cost = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let half = Distribution::uniform(2).unwrap();
        let r = dense_sinkhorn(&cost, &half, &half, 1.0, &tight()).unwrap();
        let kernel = gibbs_kernel(&cost, 1.0).unwrap();
        let plan = DensePlan { kernel: &kernel, result: &r };
        let (r0, r1) = (plan.row(0).unwrap(), plan.row(1).unwrap());
        assert!((r0[0] - p).abs() < 1e-6 && (r1[1] - p).abs() < 1e-6);
        assert!((r0[1] - (0.5 - p)).abs() < 1e-6 && (r0[1] - r1[0]).abs() < 1e-12);
    }

    #[test]
    fn identical_clouds_concentrate_on_diagonal() {
        let x = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let cost = euclidean_cost(&x, &x, 2).unwrap();
        let u = Distribution::uniform(6).unwrap();
        let r = dense_sinkhorn(&cost, &u, &u, 0.2, &SinkhornParams::default()).unwrap();
        assert!(r.converged && r.marginal_error <= 1e-6);
        let kernel = gibbs_kernel(&cost, 0.2).unwrap();
        let plan = DensePlan { kernel: &kernel, result: &r };
        for i in 0..6 {
            let row = plan.row(i).unwrap();
            let argmax = (0..6).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            assert_eq!(argmax, i);
        }
    }

    #[test]
    fn tiny_lambda_underflows() {
        let cost = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let u = Distribution::uniform(2).unwrap();
        let err = dense_sinkhorn(&cost, &u, &u, 1e-4, &SinkhornParams::default()).unwrap_err();
        assert!(matches!(err, Error::NumericalUnderflow { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn impulse_source_rows() {
        let l = random_laplacian(30, 5, LaplacianKind::Combinatorial);
        let filter = build_filter(&l, 1.0, 30).unwrap();
        let mu = Distribution::impulse(30, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nu = Distribution::new(random_distribution(30, &mut rng)).unwrap();
        let a = VertexWeights::uniform(30);
        let r = geodesic_sinkhorn(&filter, &mu, &nu, &a, &SinkhornParams::default()).unwrap();
        assert!(r.converged);
        for i in 0..30 {
            let row = plan_row(&r, &filter, &a, i).unwrap();
            assert!(row.iter().all(|&x| x >= 0.0));
            let s: f64 = row.iter().sum();
            if i == 0 {
                assert!((s - 1.0).abs() <= 1e-6);
            } else {
                assert!(s.abs() <= 1e-6);
            }
        }
        assert!(matches!(plan_row(&r, &filter, &a, 30), Err(Error::IndexOutOfRange { .. })));
    }

    /// Both marginals rebuilt from every plan row.
    fn audit_marginals<H: HeatOperator>(op: &H, r: &TransportResult, a: &VertexWeights, mu: &[f64], nu: &[f64]) -> (f64, f64) {
        let n = op.dim();
        let mut cols = vec![0.0; n];
        let mut row_err = 0.0;
        for i in 0..n {
            let row = plan_row(r, op, a, i).unwrap();
            row_err += (row.iter().sum::<f64>() - mu[i]).abs();
            cols.iter_mut().zip(&row).for_each(|(c, x)| *c += x);
        }
        let col_err = cols.iter().zip(nu).map(|(c, x)| (c - x).abs()).sum();
        (row_err, col_err)
    }

    #[test]
    fn plan_rows_reproduce_both_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (seed, &n) in [30usize, 120, 200].iter().enumerate() {
            let l = random_laplacian(n, seed as u64, LaplacianKind::Normalized);
            let filter = build_filter(&l, 2.0, 30).unwrap();
            let mu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let nu = Distribution::indicator(n, &(0..n / 3).collect::<Vec<_>>()).unwrap();
            let a = VertexWeights::uniform(n);
            let r = geodesic_sinkhorn(&filter, &mu, &nu, &a, &SinkhornParams::default()).unwrap();
            assert!(r.converged);
            let (re, ce) = audit_marginals(&filter, &r, &a, mu.weights(), nu.weights());
            assert!(re <= 1e-6 && ce <= 1e-6, "n={n} row {re} col {ce}");
        }
    }

    #[test]
    fn batch_equals_single_runs() {
        let l = random_laplacian(50, 9, LaplacianKind::Combinatorial);
        let filter = build_filter(&l, 0.8, 30).unwrap();
        let a = VertexWeights::uniform(50);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds: Vec<Distribution> = (0..4).map(|_| Distribution::new(random_distribution(50, &mut rng)).unwrap()).collect();
        let pairs = vec![(&ds[0], &ds[1]), (&ds[2], &ds[3]), (&ds[1], &ds[1])];
        let batch = geodesic_sinkhorn_batch(&filter, &pairs, &a, &SinkhornParams::default());
        for ((mu, nu), b) in pairs.iter().zip(batch) {
            let single = geodesic_sinkhorn(&filter, mu, nu, &a, &SinkhornParams::default()).unwrap();
            assert_eq!(b.unwrap(), single);
        }
    }

    #[test]
    fn cost_grows_with_hop_distance_on_path() {
        let l = path(10, LaplacianKind::Combinatorial);
        let filter = build_filter(&l, 0.3, 30).unwrap();
        let a = VertexWeights::ones(10);
        let e = |i| Distribution::impulse(10, i).unwrap();
        let costs: Vec<f64> = (1..4)
            .map(|j| geodesic_sinkhorn(&filter, &e(0), &e(j), &a, &tight()).unwrap().cost)
            .collect();
        assert!(costs[0] < costs[1] && costs[1] < costs[2], "{costs:?}");
    }

    #[test]
    fn disconnected_supports_are_detected() {
        let adj = SparseSymMatrix::from_upper_triplets(6, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)]).unwrap();
        let l = crate::graph::laplacian(&adj, LaplacianKind::Combinatorial).unwrap();
        let filter = build_filter(&l, 1.0, 30).unwrap();
        let mu = Distribution::indicator(6, &[0, 1]).unwrap();
        let nu = Distribution::indicator(6, &[4, 5]).unwrap();
        let err = geodesic_sinkhorn(&filter, &mu, &nu, &VertexWeights::uniform(6), &SinkhornParams::default()).unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }), "{err:?}");
    }

    #[test]
    fn truncated_filter_is_rejected() {
        // K far below t' makes some impulse responses go negative
        let (filter, n, src) = (0..50u64)
            .flat_map(|seed| (0..12).map(move |s| (seed, s)))
            .find_map(|(seed, s)| {
                let n = 12 + seed as usize % 20;
                let l = random_laplacian(n, seed, LaplacianKind::Combinatorial);
                let f = build_filter(&l, 20.0, 3).unwrap();
                let mut e = vec![0.0; n];
                e[s] = 1.0;
                let low = f.apply(&e).unwrap().into_iter().fold(f64::MAX, f64::min);
                (low < -1e-6).then_some((f, n, s))
            })
            .expect("a negative impulse response");
        let mu = Distribution::impulse(n, src).unwrap();
        let nu = Distribution::uniform(n).unwrap();
        let err = geodesic_sinkhorn(&filter, &mu, &nu, &VertexWeights::uniform(n), &SinkhornParams::default()).unwrap_err();
        assert!(matches!(err, Error::KernelNotPositive { .. }), "{err:?}");
        assert!(err.is_numerical());
    }

    #[test]
    fn non_convergence_is_flagged_not_an_error() {
        let l = random_laplacian(30, 1, LaplacianKind::Normalized);
        let filter = build_filter(&l, 0.3, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = Distribution::new(random_distribution(30, &mut rng)).unwrap();
        let nu = Distribution::impulse(30, 4).unwrap();
        let r = geodesic_sinkhorn(&filter, &mu, &nu, &VertexWeights::uniform(30), &SinkhornParams { max_iter: 1, tol: 1e-14 })
            .unwrap();
        assert!(!r.converged && r.iterations == 1);
    }

    #[test]
    fn length_checks() {
        let filter = build_filter(&two_node(), 1.0, 10).unwrap();
        let u3 = Distribution::uniform(3).unwrap();
        let u2 = Distribution::uniform(2).unwrap();
        assert!(geodesic_sinkhorn(&filter, &u3, &u2, &VertexWeights::uniform(2), &SinkhornParams::default()).is_err());
        assert!(geodesic_sinkhorn(&filter, &u2, &u2, &VertexWeights::uniform(2), &SinkhornParams { max_iter: 5, tol: 0.0 }).is_err());
    }

    #[test]
    fn mccann_endpoints() {
        let x = line(&[0.0, 1.0, 2.0, 3.0]);
        let y = line(&[10.0, 11.0, 12.0, 13.0]);
        let cost = euclidean_cost(&x, &y, 2).unwrap();
        let u = Distribution::uniform(4).unwrap();
        let r = dense_sinkhorn(&cost, &u, &u, 5.0, &SinkhornParams::default()).unwrap();
        let kernel = gibbs_kernel(&cost, 5.0).unwrap();
        let plan = DensePlan { kernel: &kernel, result: &r };
        let at0 = mccann_interpolate(&x, &y, &plan, 0.0, 50, 7).unwrap();
        assert!(at0.points().iter().all(|p| [0.0, 1.0, 2.0, 3.0].contains(p)));
        let at1 = mccann_interpolate(&x, &y, &plan, 1.0, 50, 7).unwrap();
        assert!(at1.points().iter().all(|p| [10.0, 11.0, 12.0, 13.0].contains(p)));
        let again = mccann_interpolate(&x, &y, &plan, 0.3, 50, 7).unwrap();
        assert_eq!(again, mccann_interpolate(&x, &y, &plan, 0.3, 50, 7).unwrap());
    }

    #[test]
    fn mccann_single_pair_midpoint() {
        let (x, y) = (line(&[0.0]), line(&[2.0]));
        let one = Distribution::uniform(1).unwrap();
        let r = dense_sinkhorn(&Array2::from_elem((1, 1), 4.0), &one, &one, 1.0, &SinkhornParams::default()).unwrap();
        let kernel = gibbs_kernel(&Array2::from_elem((1, 1), 4.0), 1.0).unwrap();
        let out = mccann_interpolate(&x, &y, &DensePlan { kernel: &kernel, result: &r }, 0.5, 1, 0).unwrap();
        assert_eq!(out.points()[[0, 0]], 1.0);
    }

    struct HalfPlan;
    impl PlanRows for HalfPlan {
        fn num_rows(&self) -> usize {
            1
        }
        fn row_masses(&self) -> Result<Vec<f64>> {
            Ok(vec![0.5])
        }
        fn row(&self, _i: usize) -> Result<Vec<f64>> {
            Ok(vec![0.5])
        }
    }

    #[test]
    fn mccann_rejects_light_plan() {
        let err = mccann_interpolate(&line(&[0.0]), &line(&[1.0]), &HalfPlan, 0.5, 3, 0).unwrap_err();
        assert!(matches!(err, Error::DegeneratePlan { .. }));
    }

    #[test]
    fn exact_w2_examples() {
        let x = line(&[0.3, -1.0, 2.5]);
        assert_eq!(exact_w2(&x, &x).unwrap(), 0.0);
        assert!((exact_w2(&line(&[0.0]), &line(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
        // permutations of {0.5, 3}: (0.25 + 4) / 2 and (9 + 0.25) / 2
        let want = ((0.25f64 + 4.0) / 2.0).min((9.0 + 0.25) / 2.0).sqrt();
        assert!((exact_w2(&line(&[0.0, 1.0]), &line(&[0.5, 3.0])).unwrap() - want).abs() < 1e-12);
        assert!(matches!(exact_w2(&line(&[0.0]), &line(&[0.0, 1.0])), Err(Error::SizeMismatch { .. })));
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn matches_dense_kernel_oracle(seed in 0u64..10_000, n in 5usize..100, t in 0.1f64..5.0) {
            let l = random_laplacian(n, seed, LaplacianKind::Normalized);
            let filter = build_filter(&l, t, 50).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let nu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let a = VertexWeights::ones(n);
            let geo = geodesic_sinkhorn(&filter, &mu, &nu, &a, &tight()).unwrap();
            let h = exact_heat_oracle(&l, t).unwrap();
            let dense = dense_sinkhorn(&h.mapv(|x| -4.0 * t * x.ln()), &mu, &nu, 4.0 * t, &tight()).unwrap();
            prop_assert!(rel(geo.cost, dense.cost) <= 1e-6, "{} vs {}", geo.cost, dense.cost);
            let via_operator = geodesic_sinkhorn(&DenseHeat::new(h, t).unwrap(), &mu, &nu, &a, &tight()).unwrap();
            prop_assert!(rel(geo.cost, via_operator.cost) <= 1e-6);
        }

        #[test]
        fn cost_is_symmetric(seed in 0u64..10_000, n in 5usize..80) {
            let l = random_laplacian(n, seed, LaplacianKind::Combinatorial);
            let filter = build_filter(&l, 1.0, 30).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let nu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let a = VertexWeights::uniform(n);
            let ab = geodesic_sinkhorn(&filter, &mu, &nu, &a, &tight()).unwrap();
            let ba = geodesic_sinkhorn(&filter, &nu, &mu, &a, &tight()).unwrap();
            prop_assert!((ab.cost - ba.cost).abs() <= 1e-8);
        }

        #[test]
        fn relabelling_vertices_leaves_cost(seed in 0u64..10_000, n in 5usize..60) {
            use rand::seq::SliceRandom;
            let adj = random_connected_graph(n, n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut upper = Vec::new();
            for i in 0..n {
                for (j, v) in adj.row(i) {
                    let (pi, pj) = (perm[i], perm[j]);
                    if pi <= pj {
                        upper.push((pi, pj, v));
                    }
                }
            }
            let permuted = SparseSymMatrix::from_upper_triplets(n, &upper).unwrap();
            let mu = random_distribution(n, &mut rng);
            let nu = random_distribution(n, &mut rng);
            let a: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0.5..1.5)).collect();
            let shuffle = |x: &[f64]| {
                let mut y = vec![0.0; n];
                for i in 0..n {
                    y[perm[i]] = x[i];
                }
                y
            };
            let run = |adj: &SparseSymMatrix, mu: Vec<f64>, nu: Vec<f64>, a: Vec<f64>| {
                let l = crate::graph::laplacian(adj, LaplacianKind::Normalized).unwrap();
                let filter = build_filter(&l, 1.0, 30).unwrap();
                geodesic_sinkhorn(
                    &filter,
                    &Distribution::new(mu).unwrap(),
                    &Distribution::new(nu).unwrap(),
                    &VertexWeights::new(a).unwrap(),
                    &tight(),
                )
                .unwrap()
                .cost
            };
            let base = run(&adj, mu.clone(), nu.clone(), a.clone());
            let moved = run(&permuted, shuffle(&mu), shuffle(&nu), shuffle(&a));
            prop_assert!((base - moved).abs() <= 1e-10, "{base} vs {moved}");
        }

        #[test]
        fn converged_plans_are_feasible(seed in 0u64..10_000, n in 5usize..60, t in 0.2f64..3.0) {
            let l = random_laplacian(n, seed, LaplacianKind::Combinatorial);
            let filter = build_filter(&l, t, 40).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let nu = Distribution::new(random_distribution(n, &mut rng)).unwrap();
            let a = VertexWeights::uniform(n);
            let r = geodesic_sinkhorn(&filter, &mu, &nu, &a, &SinkhornParams::default()).unwrap();
            prop_assert!(r.converged && r.marginal_error <= 1e-6);
            let (re, ce) = audit_marginals(&filter, &r, &a, mu.weights(), nu.weights());
            prop_assert!(re <= 1e-6 && ce <= 1e-6, "row {} col {}", re, ce);
        }
    }
}
