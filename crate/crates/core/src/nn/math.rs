//! Row-major matrix storage and the handful of dense kernels the tape needs.

use super::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length {} != {rows}x{cols}", data.len());
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.data.iter()
    }
}

impl<F: Real> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F: Real> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four accumulators. The fixed unrolling keeps the
/// summation order deterministic while giving the compiler room to vectorize.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = i * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = F::zero();
    for k in chunks * 4..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x` elementwise.
#[inline]
pub fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = x · Wᵀ + b` for a batch of row vectors. `w` is `(out_dim × in_dim)`,
/// `x` is `(n × in_dim)`, the result is `(n × out_dim)`.
pub fn affine_batch<F: Real>(x: &Matrix<F>, w: &Matrix<F>, b: &[F]) -> Matrix<F> {
    assert_eq!(x.cols(), w.cols(), "affine input dim {} != layer in_features {}", x.cols(), w.cols());
    assert_eq!(w.rows(), b.len());
    let mut out = Matrix::zeros(x.rows(), w.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (j, oij) in oi.iter_mut().enumerate() {
            *oij = dot(xi, w.row(j)) + b[j];
        }
    }
    out
}

/// Gradient w.r.t. the affine input: `dX = dOut · W`.
pub fn affine_backward_input<F: Real>(d_out: &Matrix<F>, w: &Matrix<F>) -> Matrix<F> {
    assert_eq!(d_out.cols(), w.rows());
    let mut dx = Matrix::zeros(d_out.rows(), w.cols());
    for i in 0..d_out.rows() {
        let di = d_out.row(i);
        let dxi = dx.row_mut(i);
        for (j, &dij) in di.iter().enumerate() {
            axpy(dij, w.row(j), dxi);
        }
    }
    dx
}

/// Gradient w.r.t. the affine weights and biases:
/// `dW = dOutᵀ · X`, `db = column sums of dOut`. Accumulates into `dw`/`db`.
pub fn affine_backward_params<F: Real>(
    d_out: &Matrix<F>,
    x: &Matrix<F>,
    dw: &mut Matrix<F>,
    db: &mut [F],
) {
    assert_eq!(dw.rows(), d_out.cols());
    assert_eq!(dw.cols(), x.cols());
    assert_eq!(db.len(), d_out.cols());
    for i in 0..d_out.rows() {
        let di = d_out.row(i);
        let xi = x.row(i);
        for (j, &dij) in di.iter().enumerate() {
            axpy(dij, xi, dw.row_mut(j));
            db[j] += dij;
        }
    }
}

/// `W · x + b` for a single vector (untaped inference path).
pub fn affine_vec<F: Real>(w: &Matrix<F>, b: &[F], x: &[F]) -> Vec<F> {
    assert_eq!(x.len(), w.cols(), "affine input length {} != layer in_features {}", x.len(), w.cols());
    (0..w.rows()).map(|j| dot(x, w.row(j)) + b[j]).collect()
}
