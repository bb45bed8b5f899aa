use crate::error::{invalid, Result};
use crate::linalg::{dot, right_singular, Matrix};
use crate::num::Real;

use super::column_mean;

/// Mean vector plus orthonormal principal directions of a set of spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis<T> {
    mean: Vec<T>,
    /// `dim x K`, one component per column.
    components: Matrix<T>,
    singular_values: Vec<T>,
    requested: usize,
}

impl<T: Real> PcaBasis<T> {
    pub fn from_parts(mean: Vec<T>, components: Matrix<T>, singular_values: Vec<T>, requested: usize) -> Result<Self> {
        if components.rows() != mean.len() {
            return Err(invalid(format!(
                "components have {} rows but the mean has {} entries",
                components.rows(),
                mean.len()
            )));
        }
        if singular_values.len() != components.cols() {
            return Err(invalid("one singular value is required per component"));
        }
        if mean.iter().chain(components.as_slice()).any(|x| !x.is_finite()) {
            return Err(invalid("basis entries must be finite"));
        }
        Ok(Self { mean, components, singular_values, requested })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix<T> {
        &self.components
    }

    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    /// Retained order, after truncation to the effective rank.
    pub fn order(&self) -> usize {
        self.components.cols()
    }

    /// Order asked for at training time.
    pub fn requested_order(&self) -> usize {
        self.requested
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `components^T (x - mean)`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(invalid(format!("vector has {} entries, basis expects {}", x.len(), self.dim())));
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        self.components.tr_matvec(&centered)
    }

    /// `mean + components g`.
    pub fn reconstruct(&self, g: &[T]) -> Result<Vec<T>> {
        if g.len() != self.order() {
            return Err(invalid(format!("gain vector has {} entries, basis order is {}", g.len(), self.order())));
        }
        let mut out = self.components.matvec(g)?;
        for (o, &m) in out.iter_mut().zip(&self.mean) {
            *o = *o + m;
        }
        Ok(out)
    }

    /// Sum of squared distances between each row of `data` and its
    /// reconstruction from this basis.
    pub fn reconstruction_error(&self, data: &Matrix<T>) -> Result<T> {
        let mut total = T::zero();
        for i in 0..data.rows() {
            let row = data.row(i);
            let rec = self.reconstruct(&self.project(row)?)?;
            total = total + row.iter().zip(&rec).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        }
        Ok(total)
    }
}

/// Top-`k` principal components of the rows of `data`.
pub fn pca<T: Real>(data: &Matrix<T>, k: usize) -> Result<PcaBasis<T>> {
    let (j, f) = (data.rows(), data.cols());
    let k_max = j.saturating_sub(1).min(f);
    if k < 1 || k > k_max {
        return Err(invalid(format!(
            "PCA order {k} out of range 1..={k_max} for {j} records of {f} bins"
        )));
    }
    if data.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(invalid("PCA input must be finite"));
    }
    let mean = column_mean(data);
    let centered = Matrix::from_fn(j, f, |r, c| data[(r, c)] - mean[c]);
    let svd = right_singular(&centered);

    let sigma_max = svd.values.first().copied().unwrap_or_else(T::zero);
    let tol = sigma_max * T::from_usize_lossy(j.max(f)) * T::epsilon();
    let rank = svd.values.iter().take_while(|&&s| s > tol && s > T::zero()).count();
    let kept = k.min(rank);
    if kept < k {
        log::warn!("PCA order {k} exceeds the effective rank {rank} of the data; keeping {kept} components");
    }

    let mut comps = Vec::with_capacity(kept * f);
    for v in svd.vectors.iter().take(kept) {
        let mut v = v.clone();
        // renormalize, then make the largest-magnitude entry positive
        let n = dot(&v, &v).sqrt();
        let mut big = 0;
        for x in v.iter_mut() {
            *x = *x / n;
        }
        for i in 1..f {
            if v[i].abs() > v[big].abs() {
                big = i;
            }
        }
        if v[big] < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        comps.extend(v);
    }
    let components = Matrix::from_col_major(f, kept, &comps)?;
    PcaBasis::from_parts(mean, components, svd.values[..kept].to_vec(), k)
}
