//! Dense matrix helpers: products, Cholesky solves and a one-sided Jacobi
//! singular value decomposition.

use std::ops::{Index, IndexMut};

use crate::error::{invalid, Error, Result};
use crate::num::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_col_major(rows: usize, cols: usize, data: &[T]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[j * rows + i]))
    }

    /// Stacks equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("rows have unequal lengths"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_col_major(&self) -> Vec<T> {
        (0..self.cols).flat_map(|j| (0..self.rows).map(move |i| (i, j))).map(|ij| self[ij]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(invalid(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self^T * x`.
    pub fn tr_matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.rows {
            return Err(invalid(format!(
                "vector of length {} does not match {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        Ok(out)
    }

    /// `self * self^T`.
    pub fn gram_rows(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(invalid("cholesky needs a square matrix"));
    }
    let scale = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
    let threshold = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(Error::SingularSystem(format!(
                "matrix is not positive definite (pivot {j} = {d})"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `a x = b` for symmetric positive definite `a`, column by column.
pub fn solve_spd<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if b.rows() != a.rows() {
        return Err(invalid("right-hand side row count mismatch"));
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        let mut y = b.col(c);
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in 0..n {
            x[(i, c)] = y[i];
        }
    }
    Ok(x)
}

/// Singular values and right singular vectors of a `rows x cols` matrix,
/// ordered by descending singular value.
///
/// `vectors` has one entry per singular value, each of length `cols`.
#[derive(Debug, Clone)]
pub struct RightSingular<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

const MAX_SWEEPS: usize = 80;

/// Right singular vectors of `x` via Householder QR of `x^T` followed by
/// one-sided (Hestenes) Jacobi on the triangular factor.
pub fn right_singular<T: Real>(x: &Matrix<T>) -> RightSingular<T> {
    let (m, n) = (x.rows(), x.cols());
    // columns of x^T are the rows of x
    let mut cols: Vec<Vec<T>> = (0..m).map(|i| x.row(i).to_vec()).collect();

    let reflectors = if n > m {
        let (r_cols, reflectors) = householder_qr(&mut cols, n);
        cols = r_cols;
        Some(reflectors)
    } else {
        None
    };

    hestenes(&mut cols);

    let mut order: Vec<(T, usize)> = cols.iter().enumerate().map(|(i, c)| (dot(c, c).sqrt(), i)).collect();
    // descending, ties by original position
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

    let mut values = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for (sigma, idx) in order {
        let mut v: Vec<T> = if sigma > T::zero() {
            cols[idx].iter().map(|&c| c / sigma).collect()
        } else {
            vec![T::zero(); cols[idx].len()]
        };
        if let Some(reflectors) = &reflectors {
            v = apply_q(reflectors, &v, n);
        }
        values.push(sigma);
        vectors.push(v);
    }
    RightSingular { values, vectors }
}

struct Reflector<T> {
    start: usize,
    v: Vec<T>,
    beta: T,
}

/// QR of the `len x cols.len()` matrix whose columns are `cols`. Returns the
/// columns of R (each of length `cols.len()`) and the reflectors of Q.
fn householder_qr<T: Real>(cols: &mut [Vec<T>], len: usize) -> (Vec<Vec<T>>, Vec<Reflector<T>>) {
    let k_max = cols.len().min(len);
    let mut reflectors = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let x = &cols[k][k..];
        let norm = dot(x, x).sqrt();
        if norm == T::zero() {
            reflectors.push(Reflector { start: k, v: vec![T::zero(); len - k], beta: T::zero() });
            continue;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = dot(&v, &v);
        let beta = if vnorm2 > T::zero() { T::lit(2.0) / vnorm2 } else { T::zero() };
        for col in cols.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let s = beta * dot(&v, tail);
            for (t, &vi) in tail.iter_mut().zip(&v) {
                *t = *t - s * vi;
            }
        }
        reflectors.push(Reflector { start: k, v, beta });
    }
    let m = cols.len();
    let r_cols = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (0..m).map(|i| if i <= j && i < len { c[i] } else { T::zero() }).collect())
        .collect();
    (r_cols, reflectors)
}

fn apply_q<T: Real>(reflectors: &[Reflector<T>], y: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    out[..y.len()].copy_from_slice(y);
    for r in reflectors.iter().rev() {
        let tail = &mut out[r.start..];
        let s = r.beta * dot(&r.v, tail);
        for (t, &vi) in tail.iter_mut().zip(&r.v) {
            *t = *t - s * vi;
        }
    }
    out
}

/// Rotates `cols` in place until they are mutually orthogonal.
fn hestenes<T: Real>(cols: &mut [Vec<T>]) {
    let n = cols.len();
    if n < 2 {
        return;
    }
    let len = cols[0].len();
    let tol = T::epsilon() * T::from_usize_lossy(len.max(n));
    let total: T = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = total * T::epsilon() * T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut norms: Vec<T> = cols.iter().map(|c| dot(c, c)).collect();
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (a, b) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = c * x - s * y;
                    *b = s * x + c * y;
                }
                norms[i] = alpha - t * gamma;
                norms[j] = beta + t * gamma;
            }
        }
        if !rotated {
            return;
        }
    }
    log::warn!("one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps");
}
