//! Heat operators `e^{-tL}`: Chebyshev filter, backward-Euler baseline and a
//! dense eigendecomposition oracle.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};

use crate::bessel::scaled_bessel_i;
use crate::error::{Error, Result};
use crate::graph::{GraphLaplacian, LaplacianKind};
use crate::sparse::SparseSymMatrix;

/// Default Chebyshev degree.
pub const DEFAULT_ORDER: usize = 30;
/// Largest graph the dense oracle will decompose.
pub const DENSE_LIMIT: usize = 2000;

const CG_REL_TOL: f64 = 1e-10;

/// Something that applies (an approximation of) `e^{-tL}` to vertex signals.
pub trait HeatOperator: Sync {
    fn dim(&self) -> usize;

    /// Diffusion time `t` of the approximated operator.
    fn time(&self) -> f64;

    fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<()>;

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(f, &mut out)?;
        Ok(out)
    }

    /// Filters `cols` signals stored row-major in an `n x cols` block
    /// (`block[i * cols + c]` is vertex `i` of signal `c`).
    fn apply_block(&self, block: &[f64], cols: usize, out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len(n * cols, block.len())?;
        check_len(n * cols, out.len())?;
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for c in 0..cols {
            for i in 0..n {
                f[i] = block[i * cols + c];
            }
            self.apply_into(&f, &mut g)?;
            for i in 0..n {
                out[i * cols + c] = g[i];
            }
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Degree-`K` Chebyshev approximation of `e^{-tL}`.
///
/// The Laplacian is rescaled so its spectrum lies in `[0, 2]`; the scale is
/// absorbed into the effective time, so the expansion is in `L_s - I`.
#[derive(Debug)]
pub struct HeatFilter {
    shifted: SparseSymMatrix,
    time: f64,
    effective_time: f64,
    scale: f64,
    coefficients: Vec<f64>,
    matvecs: AtomicU64,
}

impl Clone for HeatFilter {
    fn clone(&self) -> Self {
        Self {
            shifted: self.shifted.clone(),
            time: self.time,
            effective_time: self.effective_time,
            scale: self.scale,
            coefficients: self.coefficients.clone(),
            matvecs: AtomicU64::new(0),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter("order K must be at least 1".into()));
    }
    Ok(())
}

/// Prepares the Chebyshev filter for `e^{-tL}` of degree `order`.
pub fn build_filter(laplacian: &GraphLaplacian, t: f64, order: usize) -> Result<HeatFilter> {
    check_time(t)?;
    check_order(order)?;
    let scale = match laplacian.kind {
        LaplacianKind::Normalized => 1.0,
        LaplacianKind::Combinatorial if laplacian.lambda_max_bound > 0.0 => 2.0 / laplacian.lambda_max_bound,
        LaplacianKind::Combinatorial => 1.0,
    };
    let effective_time = t / scale;
    // e^{-t'(y+1)} = e^{-t'} [I_0(t') + 2 sum_k (-1)^k I_k(t') T_k(y)]
    let coefficients = scaled_bessel_i(order, effective_time)
        .into_iter()
        .enumerate()
        .map(|(k, i)| if k % 2 == 0 { 2.0 * i } else { -2.0 * i })
        .collect();
    Ok(HeatFilter {
        shifted: laplacian.matrix.scale_shift(scale, -1.0),
        time: t,
        effective_time,
        scale,
        coefficients,
        matvecs: AtomicU64::new(0),
    })
}

impl HeatFilter {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn effective_time(&self) -> f64 {
        self.effective_time
    }

    /// Factor applied to `L` before expansion.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Sparse matvecs performed so far (one per column per degree).
    pub fn matvec_count(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    /// `older <- 2 M current - older`, `out += b * older`, one row at a time,
    /// on `cols` interleaved signals.
    fn recurrence_step(&self, current: &[f64], older: &mut [f64], out: &mut [f64], b: f64, cols: usize, acc: &mut [f64]) {
        let m = &self.shifted;
        let (offsets, indices, values) = (m.row_offsets(), m.col_indices(), m.values());
        for i in 0..m.dim() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for k in offsets[i]..offsets[i + 1] {
                let v = values[k];
                let src = &current[indices[k] * cols..(indices[k] + 1) * cols];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += v * s;
                }
            }
            let row = i * cols..(i + 1) * cols;
            for ((o, t), a) in older[row.clone()].iter_mut().zip(&mut out[row]).zip(acc.iter()) {
                *o = 2.0 * a - *o;
                *t += b * *o;
            }
        }
    }

    fn first_step(&self, f: &[f64], t1: &mut [f64], out: &mut [f64], cols: usize, acc: &mut [f64]) {
        let m = &self.shifted;
        let (offsets, indices, values) = (m.row_offsets(), m.col_indices(), m.values());
        let (b0, b1) = (self.coefficients[0], self.coefficients[1]);
        for i in 0..m.dim() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for k in offsets[i]..offsets[i + 1] {
                let v = values[k];
                let src = &f[indices[k] * cols..(indices[k] + 1) * cols];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += v * s;
                }
            }
            for c in 0..cols {
                let idx = i * cols + c;
                t1[idx] = acc[c];
                out[idx] = 0.5 * b0 * f[idx] + b1 * acc[c];
            }
        }
    }

    fn run(&self, f: &[f64], cols: usize, out: &mut [f64]) {
        let mut acc = vec![0.0; cols];
        let mut t1 = vec![0.0; f.len()];
        self.first_step(f, &mut t1, out, cols, &mut acc);
        let mut t0 = f.to_vec();
        for &b in &self.coefficients[2..] {
            self.recurrence_step(&t1, &mut t0, out, b, cols, &mut acc);
            std::mem::swap(&mut t0, &mut t1);
        }
        self.matvecs.fetch_add((self.order() * cols) as u64, Ordering::Relaxed);
    }
}

impl HeatOperator for HeatFilter {
    fn dim(&self) -> usize {
        self.shifted.dim()
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), f.len())?;
        check_len(self.dim(), out.len())?;
        self.run(f, 1, out);
        Ok(())
    }

    /// Same arithmetic per column as `apply_into`, so results agree bitwise.
    fn apply_block(&self, block: &[f64], cols: usize, out: &mut [f64]) -> Result<()> {
        check_len(self.dim() * cols, block.len())?;
        check_len(self.dim() * cols, out.len())?;
        if cols > 0 {
            self.run(block, cols, out);
        }
        Ok(())
    }
}

/// `p_K(L, t) f` for a prepared filter.
pub fn apply(filter: &HeatFilter, f: &[f64]) -> Result<Vec<f64>> {
    filter.apply(f)
}

/// Backward-Euler approximation `(I + (t/K) L)^{-K}`, solved with
/// Jacobi-preconditioned conjugate gradients.
#[derive(Debug, Clone)]
pub struct EulerFilter {
    system: SparseSymMatrix,
    inv_diag: Vec<f64>,
    time: f64,
    steps: usize,
}

pub fn build_euler(laplacian: &GraphLaplacian, t: f64, steps: usize) -> Result<EulerFilter> {
    check_time(t)?;
    check_order(steps)?;
    let system = laplacian.matrix.scale_shift(t / steps as f64, 1.0);
    let inv_diag = system.diagonal().iter().map(|&d| 1.0 / d).collect();
    Ok(EulerFilter { system, inv_diag, time: t, steps })
}

/// `(I + (t/K) L)^{-K} f`.
pub fn apply_euler(laplacian: &GraphLaplacian, t: f64, steps: usize, f: &[f64]) -> Result<Vec<f64>> {
    build_euler(laplacian, t, steps)?.apply(f)
}

impl EulerFilter {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Solves `system x = rhs`, starting from the current `x`.
    fn solve(&self, rhs: &[f64], x: &mut [f64], work: &mut CgWork) -> Result<()> {
        let n = rhs.len();
        let a = &self.system;
        let rhs_norm = norm(rhs);
        if rhs_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let target = CG_REL_TOL * rhs_norm;
        let CgWork { r, z, p, q } = work;
        a.matvec_into(x, q);
        for i in 0..n {
            r[i] = rhs[i] - q[i];
        }
        if norm(r) <= target {
            return Ok(());
        }
        for i in 0..n {
            z[i] = self.inv_diag[i] * r[i];
        }
        p.copy_from_slice(z);
        let mut rz = dot(r, z);
        let max_iter = 10 * n;
        for _ in 0..max_iter {
            a.matvec_into(p, q);
            let alpha = rz / dot(p, q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm(r) <= target {
                return Ok(());
            }
            for i in 0..n {
                z[i] = self.inv_diag[i] * r[i];
            }
            let rz_next = dot(r, z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolveFailure { iterations: max_iter })
    }
}

struct CgWork {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl CgWork {
    fn new(n: usize) -> Self {
        Self { r: vec![0.0; n], z: vec![0.0; n], p: vec![0.0; n], q: vec![0.0; n] }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl HeatOperator for EulerFilter {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len(n, f.len())?;
        check_len(n, out.len())?;
        let mut work = CgWork::new(n);
        let mut rhs = f.to_vec();
        // the previous substep is a good starting guess
        out.copy_from_slice(f);
        for _ in 0..self.steps {
            self.solve(&rhs, out, &mut work)?;
            rhs.copy_from_slice(out);
        }
        Ok(())
    }
}

/// A heat operator given by an explicit dense matrix.
#[derive(Debug, Clone)]
pub struct DenseHeat {
    kernel: Array2<f64>,
    time: f64,
}

impl DenseHeat {
    pub fn new(kernel: Array2<f64>, time: f64) -> Result<Self> {
        if kernel.nrows() != kernel.ncols() {
            return Err(Error::DimensionMismatch { expected: kernel.nrows(), found: kernel.ncols() });
        }
        Ok(Self { kernel, time })
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }
}

impl HeatOperator for DenseHeat {
    fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), f.len())?;
        check_len(self.dim(), out.len())?;
        for (o, row) in out.iter_mut().zip(self.kernel.rows()) {
            *o = row.iter().zip(f).map(|(k, x)| k * x).sum();
        }
        Ok(())
    }
}

/// Exact `e^{-tL}` by symmetric eigendecomposition. Test oracle only.
pub fn exact_heat_oracle(laplacian: &GraphLaplacian, t: f64) -> Result<Array2<f64>> {
    let n = laplacian.dim();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    let (values, vectors) = laplacian
        .matrix
        .to_dense()
        .eigh(UPLO::Lower)
        .map_err(|e| Error::InvalidParameter(format!("eigendecomposition failed: {e}")))?;
    let mut scaled = vectors.clone();
    for (mut col, lambda) in scaled.columns_mut().into_iter().zip(values.iter()) {
        let e = (-t * lambda).exp();
        col.iter_mut().for_each(|v| *v *= e);
    }
    let h = scaled.dot(&vectors.t());
    Ok(Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (h[[i, j]] + h[[j, i]])))
}

/// One line of the Chebyshev-vs-Euler comparison.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub order: usize,
    pub cheb_fro_error: f64,
    pub euler_fro_error: f64,
}

/// Frobenius error of the Chebyshev and Euler reconstructions of `H_t`,
/// rebuilt column by column from unit impulses, for each order.
pub fn convergence_study(laplacian: &GraphLaplacian, t: f64, orders: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let exact = exact_heat_oracle(laplacian, t)?;
    let n = laplacian.dim();
    let identity = Array2::<f64>::eye(n).into_raw_vec_and_offset().0;
    let mut approx = vec![0.0; n * n];
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        // row-major identity: column c of the block is the impulse e_c
        build_filter(laplacian, t, order)?.apply_block(&identity, n, &mut approx)?;
        let cheb_fro_error = frobenius_diff(&approx, &exact);
        build_euler(laplacian, t, order)?.apply_block(&identity, n, &mut approx)?;
        let euler_fro_error = frobenius_diff(&approx, &exact);
        rows.push(ConvergenceRow { order, cheb_fro_error, euler_fro_error });
    }
    Ok(rows)
}

fn frobenius_diff(approx: &[f64], exact: &Array2<f64>) -> f64 {
    approx.iter().zip(exact.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> Result<()> {
    writeln!(out, "order,cheb_fro_error,euler_fro_error")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e}", r.order, r.cheb_fro_error, r.euler_fro_error)?;
    }
    Ok(())
}
