use crate::error::{Error, Result};

use super::Tensor;

/// Compressed sparse row matrix with constant values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 {
            return Err(Error::dim(
                "csr indptr must have rows + 1 entries starting at 0",
            ));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::dim("csr indptr must be non-decreasing"));
        }
        let nnz = *indptr.last().unwrap();
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::dim(format!(
                "csr nnz {nnz} but {} indices / {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::Index {
                index: bad,
                limit: cols,
            });
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// columns sorted within each row.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (r, c, v) in triplets {
            if r >= rows {
                return Err(Error::Index {
                    index: r,
                    limit: rows,
                });
            }
            if c >= cols {
                return Err(Error::Index {
                    index: c,
                    limit: cols,
                });
            }
            per_row[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in entries {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self::new(rows, cols, indptr, indices, values)
    }

    /// Sparse copy of a dense rank-2 tensor, dropping exact zeros.
    pub fn from_dense(t: &Tensor) -> Result<Self> {
        let (r, c) = t.dims2("CsrMatrix::from_dense")?;
        let mut indptr = Vec::with_capacity(r + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..r {
            for (j, &v) in t.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::new(r, c, indptr, indices, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.rows, self.cols]);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.set(r, c, v);
            }
        }
        t
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("transpose of a valid csr")
    }

    /// `self * dense`.
    pub fn matmul_dense(&self, dense: &Tensor) -> Result<Tensor> {
        let (k, n) = dense.dims2("spmm rhs")?;
        if k != self.cols {
            return Err(Error::dim(format!(
                "spmm ({} x {}) x {:?}",
                self.rows,
                self.cols,
                dense.shape()
            )));
        }
        let mut out = vec![0.0; self.rows * n];
        let src = dense.data();
        if n == 1 {
            for (r, o) in out.iter_mut().enumerate() {
                *o = self.row(r).fold(0.0, |acc, (c, v)| acc + v * src[c]);
            }
            return Tensor::matrix(self.rows, n, out);
        }
        for r in 0..self.rows {
            let dst = &mut out[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                let from = &src[c * n..(c + 1) * n];
                for (d, s) in dst.iter_mut().zip(from) {
                    *d += v * s;
                }
            }
        }
        Tensor::matrix(self.rows, n, out)
    }

    /// `self^T * dense`, without materializing the transpose.
    pub fn transpose_matmul_dense(&self, dense: &Tensor) -> Result<Tensor> {
        let (k, n) = dense.dims2("spmm^T rhs")?;
        if k != self.rows {
            return Err(Error::dim(format!(
                "spmm^T ({} x {})^T x {:?}",
                self.rows,
                self.cols,
                dense.shape()
            )));
        }
        let mut out = vec![0.0; self.cols * n];
        let src = dense.data();
        for r in 0..self.rows {
            let from = &src[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                let dst = &mut out[c * n..(c + 1) * n];
                for (d, s) in dst.iter_mut().zip(from) {
                    *d += v * s;
                }
            }
        }
        Tensor::matrix(self.cols, n, out)
    }
}
