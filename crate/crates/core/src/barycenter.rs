//! Fixed-support entropic barycenters on the heat kernel, the barycentric
//! distance between two families and the Expected Barycenter Effect.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::heat::HeatOperator;
use crate::transport::{
    checked_apply, clone_error, geodesic_sinkhorn, Distribution, SinkhornParams, TransportResult, VertexWeights,
    DIVISION_FLOOR,
};

/// A weighted family of distributions on one graph.
#[derive(Debug, Clone)]
pub struct DistributionFamily {
    members: Vec<Distribution>,
    alphas: Vec<f64>,
    label: String,
}

impl DistributionFamily {
    /// `alphas` must be nonnegative and sum to one within 1e-9.
    pub fn new(members: Vec<Distribution>, alphas: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::DegenerateInput("family has no members".into()));
        }
        if alphas.len() != members.len() {
            return Err(Error::LengthMismatch { expected: members.len(), found: alphas.len() });
        }
        let n = members[0].len();
        if let Some(m) = members.iter().find(|m| m.len() != n) {
            return Err(Error::LengthMismatch { expected: n, found: m.len() });
        }
        if alphas.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("alphas must be nonnegative".into()));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("alphas sum to {sum}, expected 1")));
        }
        Ok(Self { members, alphas, label: label.into() })
    }

    /// Equal weights `1/m`.
    pub fn uniform(members: Vec<Distribution>, label: impl Into<String>) -> Result<Self> {
        let m = members.len().max(1);
        Self::new(members, vec![1.0 / m as f64; m], label)
    }

    pub fn members(&self) -> &[Distribution] {
        &self.members
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of graph vertices.
    pub fn support_len(&self) -> usize {
        self.members[0].len()
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: Distribution,
    /// `(v_i, w_i)` per member; plan `i` is `diag(v_i) H diag(a w_i)`.
    pub scalings: Vec<(Vec<f64>, Vec<f64>)>,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i |v_i . H(a w_i) - mu_i|_1` after the last sweep.
    pub marginal_error: f64,
}

/// Iterative Bregman projections with geometric-mean coupling.
///
/// Each sweep filters all members as one block twice: once for the member
/// marginals and once for the coupling. The barycenter is renormalised on
/// return; the iteration itself is left unnormalised.
pub fn sinkhorn_barycenter<H: HeatOperator + ?Sized>(
    op: &H,
    family: &DistributionFamily,
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Result<BarycenterResult> {
    if !(params.tol > 0.0) || params.max_iter == 0 {
        return Err(Error::InvalidParameter("tol and max_iter must be positive".into()));
    }
    let n = op.dim();
    for len in [family.support_len(), a.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, found: len });
        }
    }
    let av = a.values();
    let weighted = |block: &[f64], c: usize, out: &mut [f64]| -> Result<()> {
        let scaled: Vec<f64> = block.iter().enumerate().map(|(idx, x)| av[idx / c] * x).collect();
        op.apply_block(&scaled, c, out)
    };
    let filter = |inputs: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        checked_apply(&weighted, &refs, n)?.into_iter().collect::<Result<Vec<_>>>().map_err(|e| clone_error(&e))
    };

    let mus: Vec<&[f64]> = family.members.iter().map(|m| m.weights()).collect();
    let m = mus.len();
    let mut v = vec![vec![0.0; n]; m];
    let mut w = vec![vec![1.0; n]; m];
    let mut q = filter(&w)?;
    let mut p = vec![0.0; n];
    let mut iterations = 0;
    let mut error = f64::INFINITY;
    while iterations < params.max_iter {
        for i in 0..m {
            for j in 0..n {
                v[i][j] = mus[i][j] / q[i][j].max(DIVISION_FLOOR);
            }
        }
        let r = filter(&v)?;
        for (j, pj) in p.iter_mut().enumerate() {
            let log: f64 = (0..m).map(|i| family.alphas[i] * r[i][j].max(DIVISION_FLOOR).ln()).sum();
            *pj = log.exp();
        }
        for i in 0..m {
            for j in 0..n {
                w[i][j] = p[j] / r[i][j].max(DIVISION_FLOOR);
            }
        }
        q = filter(&w)?;
        iterations += 1;
        error = (0..m)
            .map(|i| (0..n).map(|j| (v[i][j] * q[i][j] - mus[i][j]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if !error.is_finite() {
            return Err(Error::NumericalUnderflow { row: 0 });
        }
        if error <= params.tol {
            break;
        }
    }
    Ok(BarycenterResult {
        barycenter: Distribution::normalize(p)?,
        scalings: v.into_iter().zip(w).collect(),
        iterations,
        converged: error <= params.tol,
        marginal_error: error,
    })
}

/// `W_H(mu*_T, mu*_C)`: geodesic Sinkhorn between the two barycenters.
pub fn barycentric_distance<H: HeatOperator + ?Sized>(
    op: &H,
    treated: &DistributionFamily,
    control: &DistributionFamily,
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Result<TransportResult> {
    let bt = sinkhorn_barycenter(op, treated, a, params)?;
    let bc = sinkhorn_barycenter(op, control, a, params)?;
    geodesic_sinkhorn(op, &bt.barycenter, &bc.barycenter, a, params)
}

/// `features^T mu` per feature column.
pub fn expectation(features: &Array2<f64>, mu: &Distribution) -> Result<Vec<f64>> {
    if features.nrows() != mu.len() {
        return Err(Error::LengthMismatch { expected: mu.len(), found: features.nrows() });
    }
    Ok(features.columns().into_iter().map(|col| col.iter().zip(mu.weights()).map(|(x, m)| x * m).sum()).collect())
}

/// `E_{mu_T}[Y] - E_{mu_C}[Y]`.
pub fn expectation_difference(features: &Array2<f64>, treated: &Distribution, control: &Distribution) -> Result<Vec<f64>> {
    let et = expectation(features, treated)?;
    let ec = expectation(features, control)?;
    Ok(et.iter().zip(&ec).map(|(t, c)| t - c).collect())
}

/// Expected Barycenter Effect: the feature means under the two geodesic
/// barycenters, differenced. Non-converged barycenters are used as they are.
pub fn expected_barycenter_effect<H: HeatOperator + ?Sized>(
    op: &H,
    treated: &DistributionFamily,
    control: &DistributionFamily,
    features: &Array2<f64>,
    a: &VertexWeights,
    params: &SinkhornParams,
) -> Result<Vec<f64>> {
    let bt = sinkhorn_barycenter(op, treated, a, params)?;
    let bc = sinkhorn_barycenter(op, control, a, params)?;
    expectation_difference(features, &bt.barycenter, &bc.barycenter)
}

/// α-weighted mixture of the members (the total-variation barycenter).
pub fn mixture(family: &DistributionFamily) -> Result<Distribution> {
    let mut mix = vec![0.0; family.support_len()];
    for (m, &alpha) in family.members.iter().zip(&family.alphas) {
        for (x, &y) in mix.iter_mut().zip(m.weights()) {
            *x += alpha * y;
        }
    }
    Distribution::normalize(mix)
}

/// Effect computed from the mixture barycenters: the naive difference of means.
pub fn tv_baseline_effect(treated: &DistributionFamily, control: &DistributionFamily, features: &Array2<f64>) -> Result<Vec<f64>> {
    expectation_difference(features, &mixture(treated)?, &mixture(control)?)
}
