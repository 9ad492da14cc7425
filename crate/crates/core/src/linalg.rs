//! Small dense linear algebra: row-major matrices, cyclic Jacobi for
//! symmetric eigenproblems, Gauss-Jordan inversion and Gram-Schmidt.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, sample_sphere, Vector};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged or empty matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vector]) -> Result<Self> {
        let c = cols.len();
        if c == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let r = cols[0].dim();
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            if col.dim() != r {
                return Err(Error::InvalidInput("column length mismatch".into()));
            }
            for i in 0..r {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: {}x{} · {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_slice(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vec<f64>> {
        if x.dim() != self.cols {
            return Err(Error::InvalidInput(format!(
                "matrix has {} columns, vector has dimension {}",
                self.cols,
                x.dim()
            )));
        }
        Ok(self.mul_slice(x.as_slice()))
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .unwrap();
            if a[(pivot, col)].abs() <= 1e-14 * scale {
                return Err(Error::InvalidInput("matrix is numerically singular".into()));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.data[i * n + j] -= f * a.data[col * n + j];
                    inv.data[i * n + j] -= f * inv.data[col * n + j];
                }
            }
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymmetricEigen {
    pub fn min_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// `V f(Λ) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut m = Matrix::zeros(n, n);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            let s = f(*lambda);
            for i in 0..n {
                let vi = s * v[i];
                for j in 0..n {
                    m[(i, j)] += vi * v[j];
                }
            }
        }
        m
    }
}

/// Off-diagonal convergence tolerance for [`jacobi_eigen`], relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps plane rotations over every off-diagonal pair until the remaining
/// off-diagonal Frobenius mass is below `JACOBI_TOL · ‖A‖_F`.
pub fn jacobi_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    let n = m.rows();
    if n == 0 || m.cols() != n {
        return Err(Error::InvalidInput("jacobi_eigen needs a non-empty square matrix".into()));
    }
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_norm();
    let tol = JACOBI_TOL * total.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (a[(i, i)], v.column(i))).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SymmetricEigen { values, vectors })
}

/// `(1/|X|) Σ x xᵀ` over the given rows.
pub fn second_moment<'a, I>(points: I, dim: usize) -> Matrix
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut m = Matrix::zeros(dim, dim);
    let mut count = 0usize;
    for x in points {
        debug_assert_eq!(x.len(), dim);
        for i in 0..dim {
            let xi = x[i];
            for j in i..dim {
                m.data[i * dim + j] += xi * x[j];
            }
        }
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        for i in 0..dim {
            for j in i..dim {
                let v = m.data[i * dim + j] * inv;
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
    }
    m
}

/// Extends orthonormal `basis` vectors of `R^d` by Gram-Schmidt against the
/// standard basis until it spans the whole space.
pub fn complete_basis(basis: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = basis.to_vec();
    for i in 0..d {
        if out.len() == d {
            break;
        }
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        // Two passes of modified Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for b in &out {
                let p = dot(&e, b);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&e, &e).sqrt();
        if n > 1e-8 {
            e.iter_mut().for_each(|x| *x /= n);
            out.push(e);
        }
    }
    out
}

/// `k` orthonormal vectors spanning a uniformly random `k`-dimensional
/// subspace of `R^d`.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Vec<Vector>> {
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("cannot draw {k} orthonormal vectors in R^{d}")));
    }
    let mut out: Vec<Vector> = Vec::with_capacity(k);
    while out.len() < k {
        let mut g = sample_sphere(d, rng)?.into_inner();
        for _ in 0..2 {
            for b in &out {
                let p = dot(&g, b.as_slice());
                g.iter_mut().zip(b.as_slice()).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&g, &g).sqrt();
        if n > 1e-6 {
            g.iter_mut().for_each(|x| *x /= n);
            out.push(Vector::from_raw(g));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jacobi_diagonal_and_2x2() {
        let m = Matrix::diag(&[3.0, 1.0, 2.0]);
        let e = jacobi_eigen(&m).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);

        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = jacobi_eigen(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let v = &e.vectors[0];
        assert_abs_diff_eq!(v[0].abs(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = RngStream::new(5, 0);
        let pts: Vec<Vector> = (0..40).map(|_| sample_sphere(6, &mut rng).unwrap()).collect();
        let m = second_moment(pts.iter().map(|p| p.as_slice()), 6);
        let e = jacobi_eigen(&m).unwrap();
        let back = e.reconstruct_with(|l| l);
        assert!(back.max_abs_diff(&m) < 1e-12);
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let trace: f64 = (0..6).map(|i| m[(i, i)]).sum();
        assert_abs_diff_eq!(e.values.iter().sum::<f64>(), trace, epsilon = 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Matrix::from_rows(&[vec![4.0, 7.0, 1.0], vec![2.0, 6.0, 0.5], vec![0.0, 1.0, 3.0]]).unwrap();
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv).unwrap();
        assert!(id.max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(singular.inverse().is_err());
    }

    #[test]
    fn completes_basis() {
        let s = 1.0 / 2f64.sqrt();
        let full = complete_basis(&[vec![s, s, 0.0]], 3);
        assert_eq!(full.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot(&full[i], &full[j]), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let mut rng = RngStream::new(9, 1);
        let b = random_orthonormal(7, 4, &mut rng).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(b[i].dot(&b[j]), expect, epsilon = 1e-12);
            }
        }
        assert!(random_orthonormal(3, 4, &mut rng).is_err());
    }
}
