//! Symmetric sparse matrices in compressed-row form.

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored as full compressed rows.
///
/// Both triangles are stored so that a row slice is all a matvec needs.
/// Column indices within a row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from `(row, col, value)` triplets covering both triangles.
    ///
    /// Duplicate coordinates are summed. The result must be symmetric.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let m = Self::assemble(n, triplets)?;
        if !m.is_symmetric(0.0) {
            return Err(Error::InvalidParameter("triplets are not symmetric".into()));
        }
        Ok(m)
    }

    /// Builds a matrix from upper-triangle triplets (`row <= col`), mirroring
    /// each off-diagonal entry.
    pub fn from_upper_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(triplets.len() * 2);
        for &(i, j, v) in triplets {
            if i > j {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) is below the diagonal"
                )));
            }
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::assemble(n, &full)
    }

    fn assemble(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, v) in &sorted {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite value at ({i}, {j})")));
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            col_indices.push(j);
            values.push(v);
            row_offsets[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self { n, row_offsets, col_indices, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, row_offsets: vec![0; n + 1], col_indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting both triangles.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Largest absolute stored value (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Gershgorin bound `max_i sum_j |a_ij|` on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    /// Returns `scale * self + shift * I`.
    pub fn scale_shift(&self, scale: f64, shift: f64) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                triplets.push((i, j, scale * v));
            }
            if shift != 0.0 {
                triplets.push((i, i, shift));
            }
        }
        Self::assemble(self.n, &triplets).expect("indices already validated")
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Quadratic form `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[[i, j]] = v;
            }
        }
        d
    }

    /// Writes the coordinate-list text format: a header `n nnz` followed by one
    /// `i j value` line per stored upper-triangle entry.
    pub fn write_coordinate_list<W: Write>(&self, mut out: W) -> Result<()> {
        let upper: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j >= i).map(move |(j, v)| (i, j, v)))
            .collect();
        writeln!(out, "{} {}", self.n, upper.len())?;
        for (i, j, v) in upper {
            writeln!(out, "{i} {j} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_coordinate_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))??;
        let mut parts = header.split_whitespace();
        let n = parse_field::<usize>(parts.next(), "n")?;
        let nnz = parse_field::<usize>(parts.next(), "nnz")?;
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split_whitespace();
            let i = parse_field::<usize>(f.next(), "row")?;
            let j = parse_field::<usize>(f.next(), "col")?;
            let v = parse_field::<f64>(f.next(), "value")?;
            triplets.push((i, j, v));
        }
        if triplets.len() != nnz {
            return Err(Error::Parse(format!(
                "header declares {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Self::from_upper_triplets(n, &triplets)
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing {name}")))?
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("invalid {name}")))
}
