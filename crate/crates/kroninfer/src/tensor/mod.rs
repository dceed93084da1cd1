//! Dense even-order tensor algebra.
//!
//! An [`EvenTensor`] of order `2M` has `M` row modes and `M` column modes.
//! Entries are stored in the canonical linear order induced by the mixed-radix
//! index maps (first index varies fastest): with flattened row index `r` and
//! column index `c`, the entry sits at `data[r + c * nrows]`. The flattening
//! `mat(.)` is therefore a relabeling, and every contraction here executes in
//! the matricized domain, where the Einstein product is plain matrix
//! multiplication.

pub mod io;

use crate::error::{KronError, Result};
use crate::linalg;
use faer::{Mat, MatRef};

/// Canonical (first index fastest) linear offset of a multi-index.
#[inline]
pub fn linear_index(dims: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), idx.len());
    let mut pos = 0;
    let mut stride = 1;
    for (i, d) in idx.iter().zip(dims) {
        debug_assert!(i < d);
        pos += i * stride;
        stride *= d;
    }
    pos
}

/// Inverse of [`linear_index`]: decompose `pos` into mixed-radix digits.
pub fn multi_index(dims: &[usize], mut pos: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len());
    for &d in dims {
        out.push(pos % d);
        pos /= d;
    }
    out
}

fn dims_product(dims: &[usize]) -> usize {
    dims.iter().product()
}

// ---------------------------------------------------------------------------
// DenseMatrix: row-major matrix, the target of mat(.)
// ---------------------------------------------------------------------------

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(KronError::ShapeMismatch {
                context: "DenseMatrix::new",
                expected: format!("{} values", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Plain triple-loop product; used as an independent oracle in tests and
    /// for small systems.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(KronError::ShapeMismatch {
                context: "DenseMatrix::matmul",
                expected: format!("{} inner rows", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Textbook matrix Kronecker product (right factor varies fastest).
    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for ra in 0..self.rows {
            for ca in 0..self.cols {
                let a = self.get(ra, ca);
                for rb in 0..other.rows {
                    for cb in 0..other.cols {
                        out.set(
                            ra * other.rows + rb,
                            ca * other.cols + cb,
                            a * other.get(rb, cb),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// DenseTensor: general order-N tensor for the n-mode operations
// ---------------------------------------------------------------------------

/// Dense tensor of arbitrary order, canonical first-index-fastest storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = dims_product(&dims);
        if data.len() != n {
            return Err(KronError::ShapeMismatch {
                context: "DenseTensor::new",
                expected: format!("{n} values"),
                got: format!("{}", data.len()),
            });
        }
        if dims.contains(&0) {
            return Err(KronError::InvalidParameter(
                "tensor dimensions must be positive".into(),
            ));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims_product(&dims);
        DenseTensor {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n = dims_product(&dims);
        let mut data = Vec::with_capacity(n);
        for pos in 0..n {
            let idx = multi_index(&dims, pos);
            data.push(f(&idx));
        }
        DenseTensor { dims, data }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.data[linear_index(&self.dims, idx)]
    }

    /// n-mode product with a matrix (`mode` is 0-based): mode `n` of size
    /// `I_n` is contracted against the columns of `u` and replaced by `u.rows`.
    pub fn mode_n_product(&self, u: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
        if mode >= self.order() {
            return Err(KronError::InvalidParameter(format!(
                "mode {mode} out of range for order-{} tensor",
                self.order()
            )));
        }
        if u.cols != self.dims[mode] {
            return Err(KronError::ShapeMismatch {
                context: "mode_n_product",
                expected: format!("matrix with {} columns", self.dims[mode]),
                got: format!("{}", u.cols),
            });
        }
        let low: usize = self.dims[..mode].iter().product();
        let mid = self.dims[mode];
        let high: usize = self.dims[mode + 1..].iter().product();
        let mut out_dims = self.dims.clone();
        out_dims[mode] = u.rows;
        let mut out = vec![0.0; low * u.rows * high];
        for h in 0..high {
            for j in 0..u.rows {
                let out_base = (h * u.rows + j) * low;
                for i in 0..mid {
                    let w = u.get(j, i);
                    if w == 0.0 {
                        continue;
                    }
                    let in_base = (h * mid + i) * low;
                    for lo in 0..low {
                        out[out_base + lo] += w * self.data[in_base + lo];
                    }
                }
            }
        }
        DenseTensor::new(out_dims, out)
    }

    /// n-mode vector product: contracts mode `mode` against `v`, dropping it.
    pub fn mode_n_vec_product(&self, v: &[f64], mode: usize) -> Result<DenseTensor> {
        if mode >= self.order() {
            return Err(KronError::InvalidParameter(format!(
                "mode {mode} out of range for order-{} tensor",
                self.order()
            )));
        }
        if v.len() != self.dims[mode] {
            return Err(KronError::ShapeMismatch {
                context: "mode_n_vec_product",
                expected: format!("vector of length {}", self.dims[mode]),
                got: format!("{}", v.len()),
            });
        }
        let low: usize = self.dims[..mode].iter().product();
        let mid = self.dims[mode];
        let high: usize = self.dims[mode + 1..].iter().product();
        let mut out_dims = self.dims.clone();
        out_dims.remove(mode);
        let mut out = vec![0.0; low * high];
        for h in 0..high {
            for i in 0..mid {
                let w = v[i];
                if w == 0.0 {
                    continue;
                }
                let in_base = (h * mid + i) * low;
                let out_base = h * low;
                for lo in 0..low {
                    out[out_base + lo] += w * self.data[in_base + lo];
                }
            }
        }
        if out_dims.is_empty() {
            out_dims.push(1);
        }
        DenseTensor::new(out_dims, out)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(KronError::ShapeMismatch {
                context: "DenseTensor::inner",
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", other.dims),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

// ---------------------------------------------------------------------------
// EvenTensor
// ---------------------------------------------------------------------------

/// Dense even-order tensor with `M` row modes and `M` column modes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenTensor {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    data: Vec<f64>,
}

impl EvenTensor {
    pub fn new(row_dims: Vec<usize>, col_dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if row_dims.len() != col_dims.len() {
            return Err(KronError::ShapeMismatch {
                context: "EvenTensor::new",
                expected: format!("{} column modes", row_dims.len()),
                got: format!("{}", col_dims.len()),
            });
        }
        if row_dims.iter().chain(&col_dims).any(|&d| d == 0) {
            return Err(KronError::InvalidParameter(
                "tensor dimensions must be positive".into(),
            ));
        }
        let n = dims_product(&row_dims) * dims_product(&col_dims);
        if data.len() != n {
            return Err(KronError::ShapeMismatch {
                context: "EvenTensor::new",
                expected: format!("{n} values"),
                got: format!("{}", data.len()),
            });
        }
        Ok(EvenTensor {
            row_dims,
            col_dims,
            data,
        })
    }

    pub fn zeros(row_dims: Vec<usize>, col_dims: Vec<usize>) -> Self {
        let n = dims_product(&row_dims) * dims_product(&col_dims);
        EvenTensor {
            row_dims,
            col_dims,
            data: vec![0.0; n],
        }
    }

    /// Constant tensor.
    pub fn constant(row_dims: Vec<usize>, col_dims: Vec<usize>, value: f64) -> Self {
        let n = dims_product(&row_dims) * dims_product(&col_dims);
        EvenTensor {
            row_dims,
            col_dims,
            data: vec![value; n],
        }
    }

    /// Builds from a function of (row multi-index, column multi-index).
    pub fn from_fn(
        row_dims: Vec<usize>,
        col_dims: Vec<usize>,
        mut f: impl FnMut(&[usize], &[usize]) -> f64,
    ) -> Self {
        let nrows = dims_product(&row_dims);
        let ncols = dims_product(&col_dims);
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in 0..ncols {
            let cidx = multi_index(&col_dims, c);
            for r in 0..nrows {
                let ridx = multi_index(&row_dims, r);
                data.push(f(&ridx, &cidx));
            }
        }
        EvenTensor {
            row_dims,
            col_dims,
            data,
        }
    }

    /// The identity tensor on the given mode dimensions.
    pub fn identity(dims: &[usize]) -> Self {
        let n = dims_product(dims);
        let mut t = EvenTensor::zeros(dims.to_vec(), dims.to_vec());
        for i in 0..n {
            t.data[i + i * n] = 1.0;
        }
        t
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    /// Entries in canonical order (flattened row index fastest).
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn nrows(&self) -> usize {
        dims_product(&self.row_dims)
    }

    pub fn ncols(&self) -> usize {
        dims_product(&self.col_dims)
    }

    pub fn order(&self) -> usize {
        self.row_dims.len() + self.col_dims.len()
    }

    /// Entry at flattened (row, col).
    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.data[r + c * self.nrows()]
    }

    #[inline]
    pub fn set_entry(&mut self, r: usize, c: usize, v: f64) {
        let nr = self.nrows();
        self.data[r + c * nr] = v;
    }

    /// Entry at (row multi-index, col multi-index).
    pub fn at(&self, ridx: &[usize], cidx: &[usize]) -> f64 {
        let r = linear_index(&self.row_dims, ridx);
        let c = linear_index(&self.col_dims, cidx);
        self.entry(r, c)
    }

    /// Column-major view of the flattened matrix (no copy).
    pub fn as_faer(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.nrows(), self.ncols())
    }

    /// Builds an even tensor from a faer matrix with the given mode splits.
    pub fn from_faer(m: MatRef<'_, f64>, row_dims: Vec<usize>, col_dims: Vec<usize>) -> Result<Self> {
        if m.nrows() != dims_product(&row_dims) || m.ncols() != dims_product(&col_dims) {
            return Err(KronError::ShapeMismatch {
                context: "EvenTensor::from_faer",
                expected: format!(
                    "{}x{}",
                    dims_product(&row_dims),
                    dims_product(&col_dims)
                ),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                data.push(m[(r, c)]);
            }
        }
        EvenTensor::new(row_dims, col_dims, data)
    }

    /// Flattens to a row-major matrix per the canonical index maps.
    pub fn flatten(&self) -> DenseMatrix {
        let nr = self.nrows();
        let nc = self.ncols();
        let mut out = vec![0.0; nr * nc];
        for c in 0..nc {
            for r in 0..nr {
                out[r * nc + c] = self.data[r + c * nr];
            }
        }
        DenseMatrix {
            rows: nr,
            cols: nc,
            data: out,
        }
    }

    /// Inverse of [`EvenTensor::flatten`].
    pub fn unflatten(m: &DenseMatrix, row_dims: Vec<usize>, col_dims: Vec<usize>) -> Result<Self> {
        let nr = dims_product(&row_dims);
        let nc = dims_product(&col_dims);
        if m.rows != nr || m.cols != nc {
            return Err(KronError::ShapeMismatch {
                context: "unflatten",
                expected: format!("{nr}x{nc} matrix"),
                got: format!("{}x{}", m.rows, m.cols),
            });
        }
        let mut data = vec![0.0; nr * nc];
        for r in 0..nr {
            for c in 0..nc {
                data[r + c * nr] = m.data[r * nc + c];
            }
        }
        EvenTensor::new(row_dims, col_dims, data)
    }

    /// View as a general dense tensor (row modes then column modes).
    pub fn as_dense(&self) -> DenseTensor {
        let mut dims = self.row_dims.clone();
        dims.extend_from_slice(&self.col_dims);
        DenseTensor {
            dims,
            data: self.data.clone(),
        }
    }

    /// Einstein product: contracts this tensor's column modes against the
    /// other's row modes. Executed as a matrix product of the flattenings.
    pub fn einstein_product(&self, other: &EvenTensor) -> Result<EvenTensor> {
        if self.col_dims != other.row_dims {
            return Err(KronError::ShapeMismatch {
                context: "einstein_product",
                expected: format!("{:?} row modes", self.col_dims),
                got: format!("{:?}", other.row_dims),
            });
        }
        let prod = self.as_faer() * other.as_faer();
        EvenTensor::from_faer(
            prod.as_ref(),
            self.row_dims.clone(),
            other.col_dims.clone(),
        )
    }

    /// Transpose: swaps row and column multi-indices.
    pub fn transpose(&self) -> EvenTensor {
        let nr = self.nrows();
        let nc = self.ncols();
        let mut data = vec![0.0; nr * nc];
        for c in 0..nc {
            for r in 0..nr {
                data[c + r * nc] = self.data[r + c * nr];
            }
        }
        EvenTensor {
            row_dims: self.col_dims.clone(),
            col_dims: self.row_dims.clone(),
            data,
        }
    }

    /// Inverse under the Einstein product, computed through the flattening.
    /// Rejects flattenings with condition estimate above 1e12.
    pub fn einstein_inverse(&self) -> Result<EvenTensor> {
        let nr = self.nrows();
        if nr != self.ncols() {
            return Err(KronError::ShapeMismatch {
                context: "einstein_inverse",
                expected: "square flattening".into(),
                got: format!("{}x{}", nr, self.ncols()),
            });
        }
        let inv = linalg::inverse_via_svd(self.as_faer())?;
        EvenTensor::from_faer(inv.as_ref(), self.col_dims.clone(), self.row_dims.clone())
    }

    /// Tensor Kronecker product. Mode dimensions multiply pairwise; the
    /// composite index ordering is the one induced by the flattened matrix
    /// Kronecker product, so `mat(a (x) b) = mat(a) (x) mat(b)` exactly.
    pub fn kron(&self, other: &EvenTensor) -> Result<EvenTensor> {
        if self.row_dims.len() != other.row_dims.len() {
            return Err(KronError::ShapeMismatch {
                context: "kron",
                expected: format!("order-{} tensor", self.order()),
                got: format!("order-{}", other.order()),
            });
        }
        let row_dims: Vec<usize> = self
            .row_dims
            .iter()
            .zip(&other.row_dims)
            .map(|(a, b)| a * b)
            .collect();
        let col_dims: Vec<usize> = self
            .col_dims
            .iter()
            .zip(&other.col_dims)
            .map(|(a, b)| a * b)
            .collect();
        let (ra_n, ca_n) = (self.nrows(), self.ncols());
        let (rb_n, cb_n) = (other.nrows(), other.ncols());
        let out_rows = ra_n * rb_n;
        let mut data = vec![0.0; out_rows * ca_n * cb_n];
        for ca in 0..ca_n {
            for cb in 0..cb_n {
                let c = ca * cb_n + cb;
                let out_col = &mut data[c * out_rows..(c + 1) * out_rows];
                for ra in 0..ra_n {
                    let a = self.data[ra + ca * ra_n];
                    let out_base = ra * rb_n;
                    let b_col = &other.data[cb * rb_n..(cb + 1) * rb_n];
                    for rb in 0..rb_n {
                        out_col[out_base + rb] = a * b_col[rb];
                    }
                }
            }
        }
        EvenTensor::new(row_dims, col_dims, data)
    }

    pub fn inner(&self, other: &EvenTensor) -> Result<f64> {
        if self.row_dims != other.row_dims || self.col_dims != other.col_dims {
            return Err(KronError::ShapeMismatch {
                context: "inner",
                expected: format!("{:?} x {:?}", self.row_dims, self.col_dims),
                got: format!("{:?} x {:?}", other.row_dims, other.col_dims),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest singular value of the flattening.
    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(self.as_faer())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Entrywise a + alpha * b.
    pub fn add_scaled(&self, other: &EvenTensor, alpha: f64) -> Result<EvenTensor> {
        if self.row_dims != other.row_dims || self.col_dims != other.col_dims {
            return Err(KronError::ShapeMismatch {
                context: "add_scaled",
                expected: format!("{:?} x {:?}", self.row_dims, self.col_dims),
                got: format!("{:?} x {:?}", other.row_dims, other.col_dims),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        EvenTensor::new(self.row_dims.clone(), self.col_dims.clone(), data)
    }

    pub fn scale(&self, alpha: f64) -> EvenTensor {
        EvenTensor {
            row_dims: self.row_dims.clone(),
            col_dims: self.col_dims.clone(),
            data: self.data.iter().map(|x| x * alpha).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> EvenTensor {
        EvenTensor {
            row_dims: self.row_dims.clone(),
            col_dims: self.col_dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &EvenTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Owning faer matrix copy of the flattening (column-major).
    pub fn to_faer(&self) -> Mat<f64> {
        let nr = self.nrows();
        let nc = self.ncols();
        Mat::from_fn(nr, nc, |r, c| self.data[r + c * nr])
    }
}
